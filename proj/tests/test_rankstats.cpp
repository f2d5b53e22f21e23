#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "taskdist/rankstats.hpp"

using namespace taskdist;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, int levels = 0) {
    std::mt19937_64 rng(seed);
    std::vector<double> v(n);
    if (levels > 0) {
        std::uniform_int_distribution<int> dist(0, levels - 1);
        for (auto& x : v) x = dist(rng);
    } else {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (auto& x : v) x = dist(rng);
    }
    return v;
}

// Tie-corrected tau-b by direct pair enumeration.
double kendall_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) { ++ties_x; continue; }
            if (dy == 0) { ++ties_y; continue; }
            if (dx * dy > 0) ++concordant; else ++discordant;
        }
    const double denom = std::sqrt((concordant + discordant + ties_x) *
                                   (concordant + discordant + ties_y));
    if (denom == 0) return 0.0;
    return (concordant - discordant) / denom;
}

double hsic_double_sum(const Matrix& k, const Matrix& l) {
    const std::size_t n = k.rows();
    double term1 = 0, term2 = 0, term3 = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) term1 += k(i, j) * l(i, j);
    double ksum = 0, lsum = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) { ksum += k(i, j); lsum += l(i, j); }
    term2 = ksum * lsum / (double(n) * n);
    for (std::size_t i = 0; i < n; ++i) {
        double ki = 0, li = 0;
        for (std::size_t j = 0; j < n; ++j) { ki += k(i, j); li += l(i, j); }
        term3 += ki * li;
    }
    term3 *= 2.0 / n;
    const double nm1 = double(n) - 1.0;
    return (term1 + term2 - term3) / (nm1 * nm1);
}

}  // namespace

TEST_CASE("pearson hand values") {
    const std::vector<double> a{1, 2, 3};
    CHECK(pearson(a, a) == doctest::Approx(1.0));
    CHECK(pearson(std::vector<double>{1, 0}, std::vector<double>{0, 1}) ==
          doctest::Approx(-1.0));
    bool degenerate = false;
    CHECK(pearson(std::vector<double>{5, 5, 5}, a, &degenerate) == 0.0);
    CHECK(degenerate);
    CHECK_THROWS(pearson(std::vector<double>{1}, std::vector<double>{1}));
    CHECK_THROWS(pearson(a, std::vector<double>{1, 2}));
}

TEST_CASE("pearson affine invariance and symmetry") {
    const auto x = random_vector(40, 1);
    const auto y = random_vector(40, 2);
    CHECK(pearson(x, y) == doctest::Approx(pearson(y, x)));
    std::vector<double> scaled(x);
    for (auto& v : scaled) v = 3.5 * v + 2.0;
    CHECK(pearson(scaled, y) == doctest::Approx(pearson(x, y)).epsilon(1e-10));
}

TEST_CASE("pairwise_pearson_distance hand values") {
    {
        Matrix rows(2, 2, std::vector<double>{1, 0, 1, 0});
        const Matrix d = pairwise_pearson_distance(rows);
        CHECK(d(0, 0) == 0.0);
        CHECK(d(0, 1) == doctest::Approx(0.0));
    }
    {
        Matrix rows(2, 2, std::vector<double>{1, 0, 0, 1});
        const Matrix d = pairwise_pearson_distance(rows);
        CHECK(d(0, 1) == doctest::Approx(2.0));
        CHECK(d(1, 0) == doctest::Approx(2.0));
    }
    {
        // one-hot rows over 3 classes: pearson of distinct one-hots is -1/2
        Matrix rows(3, 3, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
        const Matrix d = pairwise_pearson_distance(rows);
        CHECK(d(0, 1) == doctest::Approx(1.5));
        CHECK(d(0, 2) == doctest::Approx(1.5));
        CHECK(d(1, 2) == doctest::Approx(1.5));
    }
    CHECK_THROWS(pairwise_pearson_distance(Matrix(1, 3)));
    CHECK_THROWS(pairwise_pearson_distance(Matrix(3, 1)));
}

TEST_CASE("pairwise_pearson_distance symmetric, zero diagonal, in range") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1, 1);
    Matrix rows(20, 8);
    for (auto& v : rows.values()) v = dist(rng);
    const Matrix d = pairwise_pearson_distance(rows);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < 20; ++j) {
            CHECK(d(i, j) == d(j, i));
            CHECK(d(i, j) >= 0.0);
            CHECK(d(i, j) <= 2.0 + 1e-12);
        }
    }
    CHECK(pairwise_pearson_distance(rows).values() ==
          pairwise_pearson_distance_serial(rows).values());
}

TEST_CASE("rank_transform hand values") {
    CHECK(rank_transform(std::vector<double>{10, 20, 30}).ranks ==
          std::vector<double>{1, 2, 3});
    CHECK(rank_transform(std::vector<double>{5, 5}).ranks ==
          std::vector<double>{1.5, 1.5});
    CHECK(rank_transform(std::vector<double>{3, 1, 2, 2}).ranks ==
          std::vector<double>{4, 1, 2.5, 2.5});
    CHECK_THROWS(rank_transform(std::vector<double>{}));
}

TEST_CASE("spearman hand values") {
    CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
          doctest::Approx(-1.0));
    CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
          doctest::Approx(0.8));
    CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) ==
          doctest::Approx(1.0));
    bool degenerate = false;
    CHECK(spearman(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3},
                   &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("spearman equals pearson of ranks and is monotone-map invariant") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = random_vector(60, rng(), trial % 2 ? 6 : 0);
        const auto y = random_vector(60, rng(), trial % 3 ? 5 : 0);
        const auto rx = rank_transform(x).ranks;
        const auto ry = rank_transform(y).ranks;
        CHECK(spearman(x, y) == doctest::Approx(pearson(rx, ry)).epsilon(1e-12));
        // strictly increasing map: v -> exp(v) + v^3
        std::vector<double> fx(x);
        for (auto& v : fx) v = std::exp(v) + v * v * v;
        CHECK(spearman(fx, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("kendall_tau hand values") {
    CHECK(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) ==
          doctest::Approx(1.0));
    CHECK(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) ==
          doctest::Approx(1.0 / 3.0));
    CHECK(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
          doctest::Approx(-1.0));
    bool degenerate = false;
    CHECK(kendall_tau(std::vector<double>{4, 4}, std::vector<double>{1, 2}, &degenerate) ==
          0.0);
    CHECK(degenerate);
}

TEST_CASE("kendall_tau matches the pair-enumeration oracle with ties") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + trial;
        const auto x = random_vector(n, rng(), trial % 2 ? 4 : 0);
        const auto y = random_vector(n, rng(), trial % 3 ? 3 : 0);
        CHECK(kendall_tau(x, y) == doctest::Approx(kendall_oracle(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("hsic hand values and double-sum oracle") {
    {
        Matrix identity(2, 2, std::vector<double>{1, 0, 0, 1});
        CHECK(hsic(identity, identity) == doctest::Approx(1.0));
    }
    {
        Matrix k(3, 3, std::vector<double>{2, 1, 0, 1, 3, 1, 0, 1, 2});
        Matrix ones(3, 3, 1.0);
        CHECK(hsic(k, ones) == doctest::Approx(0.0));
    }
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + trial % 5;
        Matrix a(n, 2 + trial % 3);
        for (auto& v : a.values()) v = dist(rng);
        Matrix b(n, 2 + (trial + 1) % 3);
        for (auto& v : b.values()) v = dist(rng);
        const Matrix k = matmul_nt(a, a);  // PSD gram matrices
        const Matrix l = matmul_nt(b, b);
        CHECK(hsic(k, l) == doctest::Approx(hsic_double_sum(k, l)).epsilon(1e-10));
        CHECK(hsic(k, l) >= -1e-12);
    }
    CHECK_THROWS(hsic(Matrix(2, 2), Matrix(3, 3)));
    CHECK_THROWS(hsic(Matrix(1, 1), Matrix(1, 1)));
}

TEST_CASE("lower_triangle ordering contract") {
    {
        Matrix d(2, 2, std::vector<double>{0, 7, 7, 0});
        CHECK(lower_triangle(d) == std::vector<double>{7});
    }
    {
        Matrix d(3, 3, std::vector<double>{0, 1, 2, 1, 0, 3, 2, 3, 0});
        CHECK(lower_triangle(d) == std::vector<double>{1, 2, 3});
    }
    CHECK(lower_triangle(Matrix(4, 4)).size() == 6);
    CHECK_THROWS(lower_triangle(Matrix(3, 2)));
}
