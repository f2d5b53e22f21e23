#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "taskdist/weighting.hpp"

using namespace taskdist;

TEST_CASE("normalize_scores hand values") {
    CHECK(normalize_scores(std::vector<double>{0.9, 0.5, 0.1}) ==
          std::vector<double>{1.0, 0.5, 0.0});
    CHECK(normalize_scores(std::vector<double>{0.4, 0.4}) == std::vector<double>{1.0, 1.0});
    CHECK(normalize_scores(std::vector<double>{-0.2, 0.8}) == std::vector<double>{0.0, 1.0});
    CHECK_THROWS(normalize_scores(std::vector<double>{}));
}

TEST_CASE("power_weights hand values") {
    {
        const auto w = power_weights({1.0, 0.5, 0.0}, 1.0);
        CHECK(w.alphas[0] == doctest::Approx(2.0 / 3.0));
        CHECK(w.alphas[1] == doctest::Approx(1.0 / 3.0));
        CHECK(w.alphas[2] == 0.0);
    }
    {
        const auto w = power_weights({1.0, 0.5, 0.0}, 2.0);
        CHECK(w.alphas[0] == doctest::Approx(0.8));
        CHECK(w.alphas[1] == doctest::Approx(0.2));
        CHECK(w.alphas[2] == 0.0);
    }
    {
        const auto w = power_weights({0.0, 0.0, 0.7, 0.1}, 0.0);
        for (double a : w.alphas) CHECK(a == doctest::Approx(0.25));
    }
    CHECK_THROWS(power_weights({0.0, 0.0}, 2.0));
}

TEST_CASE("softmax_weights hand values and stability") {
    {
        const auto w = softmax_weights({0.3, 0.3, 0.3}, 2.0);
        for (double a : w.alphas) CHECK(a == doctest::Approx(1.0 / 3.0));
    }
    {
        const auto w = softmax_weights({std::log(2.0), 0.0}, 1.0);
        CHECK(w.alphas[0] == doctest::Approx(2.0 / 3.0));
        CHECK(w.alphas[1] == doctest::Approx(1.0 / 3.0));
    }
    {
        const auto w = softmax_weights({1.0, 0.0}, 1e6);
        CHECK(w.alphas[0] == doctest::Approx(0.5).epsilon(1e-5));
        CHECK(w.alphas[1] == doctest::Approx(0.5).epsilon(1e-5));
    }
    {
        // max-subtraction keeps huge scores finite
        const auto w = softmax_weights({5000.0, 4999.0}, 1.0);
        CHECK(std::isfinite(w.alphas[0]));
        CHECK(w.alphas[0] > w.alphas[1]);
    }
    CHECK_THROWS(softmax_weights({1.0, 2.0}, 0.0));
    CHECK_THROWS(softmax_weights({1.0, 2.0}, -1.0));
}

TEST_CASE("softmax_weights shift invariance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(4);
        for (auto& s : scores) s = dist(rng);
        const double shift = dist(rng) * 10;
        std::vector<double> shifted(scores);
        for (auto& s : shifted) s += shift;
        const auto a = softmax_weights(scores, 0.5 + std::abs(dist(rng)));
        const auto b = softmax_weights(shifted, a.param);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(a.alphas[i] == doctest::Approx(b.alphas[i]).epsilon(1e-9));
    }
}

TEST_CASE("nearest_weights hand values") {
    CHECK(nearest_weights({0.2, 0.9, 0.4}).alphas == std::vector<double>{0, 1, 0});
    CHECK(nearest_weights({0.9, 0.9}).alphas == std::vector<double>{1, 0});
    CHECK(nearest_weights({0.3}).alphas == std::vector<double>{1});
    CHECK_THROWS(nearest_weights({}));
}

TEST_CASE("baseline_weights hand values") {
    {
        const auto w = baseline_weights(Scheme::Equal, {0.1, 0.2, 0.3, 0.4}, 0);
        for (double a : w.alphas) CHECK(a == doctest::Approx(0.25));
    }
    {
        const auto w = baseline_weights(Scheme::Inverse, {1.0, 0.5, 0.0}, 0);
        CHECK(w.alphas[0] == doctest::Approx(0.0));
        CHECK(w.alphas[1] == doctest::Approx(1.0 / 3.0));
        CHECK(w.alphas[2] == doctest::Approx(2.0 / 3.0));
    }
    CHECK_THROWS(baseline_weights(Scheme::Inverse, {1.0, 1.0}, 0));
    {
        const auto w = baseline_weights(Scheme::RandomSimplex, {0.5, 0.5, 0.5}, 42);
        w.validate();
        CHECK(w.alphas == baseline_weights(Scheme::RandomSimplex, {0.5, 0.5, 0.5}, 42).alphas);
    }
    {
        const auto w = baseline_weights(Scheme::RandomSelection, {0.5, 0.5, 0.5}, 7);
        CHECK(std::ranges::count(w.alphas, 1.0) == 1);
        CHECK(std::ranges::count(w.alphas, 0.0) == 2);
    }
}

TEST_CASE("weighting invariants over random cases") {
    std::mt19937_64 rng(2025);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> size_dist(1, 8);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t s = size_dist(rng);
        std::vector<double> scores(s);
        for (auto& v : scores) v = dist(rng);
        const auto normalized = normalize_scores(scores);

        // simplex validity for every scheme
        const double p = std::abs(dist(rng)) * 20.0;
        std::vector<SourceWeights> all;
        if (p > 0 || std::ranges::max(normalized) > 0)
            all.push_back(power_weights(normalized, p));
        all.push_back(softmax_weights(scores, 0.1 + std::abs(dist(rng)) * 5));
        all.push_back(nearest_weights(scores));
        all.push_back(baseline_weights(Scheme::Equal, normalized, trial));
        all.push_back(baseline_weights(Scheme::RandomSimplex, normalized, trial));
        all.push_back(baseline_weights(Scheme::RandomSelection, normalized, trial));
        if (std::ranges::min(normalized) < 1.0)
            all.push_back(baseline_weights(Scheme::Inverse, normalized, trial));
        for (const auto& w : all) {
            w.validate();
            double sum = 0;
            for (double a : w.alphas) {
                CHECK(a >= 0.0);
                sum += a;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }

        // argmax preservation for p > 0
        if (p > 0 && std::ranges::max(normalized) > 0) {
            const auto w = power_weights(normalized, p);
            const auto best_score = std::ranges::max_element(normalized) - normalized.begin();
            const auto best_alpha = std::ranges::max_element(w.alphas) - w.alphas.begin();
            CHECK(normalized[best_alpha] == doctest::Approx(normalized[best_score]));
        }

        // p == 0 gives exactly equal weights
        const auto eq = power_weights(normalized, 0.0);
        for (double a : eq.alphas) CHECK(a == doctest::Approx(1.0 / double(s)));
    }
}

TEST_CASE("topk_indices selects the k best scores") {
    const std::vector<double> scores{0.1, 0.9, 0.4, 0.7};
    {
        const auto idx = topk_indices(scores, 2);
        REQUIRE(idx.size() == 2);
        CHECK(std::ranges::count(idx, std::size_t{1}) == 1);
        CHECK(std::ranges::count(idx, std::size_t{3}) == 1);
    }
    CHECK(topk_indices(scores, 4).size() == 4);
    CHECK_THROWS(topk_indices(scores, 5));
}

TEST_CASE("scheme round-trips through strings") {
    for (auto s : {Scheme::Power, Scheme::Softmax, Scheme::Nearest, Scheme::Equal,
                   Scheme::Inverse, Scheme::RandomSimplex, Scheme::RandomSelection})
        CHECK(scheme_from_string(to_string(s)) == s);
    CHECK_THROWS(scheme_from_string("bogus"));
}
