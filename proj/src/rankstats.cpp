#include "taskdist/rankstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace taskdist {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.size() != y.size())
        throw std::invalid_argument(std::string(what) + ": length mismatch");
    if (x.size() < 2)
        throw std::invalid_argument(std::string(what) + ": need at least 2 elements");
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y, bool* degenerate) {
    check_pair(x, y, "pearson");
    const auto n = static_cast<double>(x.size());
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx / n < kVarianceEpsilon || syy / n < kVarianceEpsilon) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

namespace {

template <bool Parallel>
Matrix pairwise_distance_impl(const Matrix& rows, bool* degenerate) {
    if (rows.rows() < 2 || rows.cols() < 2)
        throw std::invalid_argument("pairwise_pearson_distance: need at least 2 rows and 2 cols");
    const std::size_t n = rows.rows(), d = rows.cols();

    // Center each row once; a row is degenerate when its variance vanishes.
    Matrix centered(n, d);
    std::vector<double> norm(n, 0.0);
    std::vector<char> row_degenerate(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double mi = mean_of(rows.row(i));
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = rows(i, j) - mi;
            centered(i, j) = c;
            ss += c * c;
        }
        norm[i] = std::sqrt(ss);
        if (ss / static_cast<double>(d) < kVarianceEpsilon) row_degenerate[i] = 1;
    }

    bool any_degenerate = false;
    Matrix dist(n, n);
#pragma omp parallel for if (Parallel && n > 4) schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        if (!row_degenerate[i]) dist(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double r;
            if (row_degenerate[i] || row_degenerate[j]) {
                r = 0.0;
            } else {
                double dot = 0.0;
                for (std::size_t p = 0; p < d; ++p) dot += centered(i, p) * centered(j, p);
                r = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
            }
            dist(i, j) = 1.0 - r;
            dist(j, i) = 1.0 - r;
        }
    }
    for (std::size_t i = 0; i < n; ++i) any_degenerate = any_degenerate || row_degenerate[i];
    if (degenerate && any_degenerate) *degenerate = true;
    return dist;
}

}  // namespace

Matrix pairwise_pearson_distance(const Matrix& rows, bool* degenerate) {
    return pairwise_distance_impl<true>(rows, degenerate);
}

Matrix pairwise_pearson_distance_serial(const Matrix& rows, bool* degenerate) {
    return pairwise_distance_impl<false>(rows, degenerate);
}

RankVector rank_transform(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("rank_transform: empty input");
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });

    RankVector out;
    out.ranks.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        // positions i..j share the same value; assign the average rank
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = avg;
        i = j + 1;
    }
    return out;
}

double spearman(std::span<const double> x, std::span<const double> y, bool* degenerate) {
    check_pair(x, y, "spearman");
    const RankVector rx = rank_transform(x), ry = rank_transform(y);
    return pearson(rx.ranks, ry.ranks, degenerate);
}

double kendall_tau(std::span<const double> x, std::span<const double> y, bool* degenerate) {
    check_pair(x, y, "kendall_tau");
    const std::size_t n = x.size();
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) {
                ++ties_x;
                ++ties_y;
            } else if (dx == 0.0) {
                ++ties_x;
            } else if (dy == 0.0) {
                ++ties_y;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const auto n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(n0 - ties_x)) *
                         std::sqrt(static_cast<double>(n0 - ties_y));
    if (denom == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const double tau = static_cast<double>(concordant - discordant) / denom;
    return std::clamp(tau, -1.0, 1.0);
}

double hsic(const Matrix& k, const Matrix& l) {
    if (k.rows() != k.cols() || l.rows() != l.cols())
        throw std::invalid_argument("hsic: inputs must be square");
    if (k.rows() != l.rows())
        throw std::invalid_argument("hsic: K and L must have the same size");
    const std::size_t n = k.rows();
    if (n < 2) throw std::invalid_argument("hsic: need N >= 2");

    // H L H = L with row means, column means removed and the grand mean added.
    std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            row_mean[i] += l(i, j);
            col_mean[j] += l(i, j);
            grand += l(i, j);
        }
    for (std::size_t i = 0; i < n; ++i) {
        row_mean[i] /= static_cast<double>(n);
        col_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n) * static_cast<double>(n);

    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double centered = l(i, j) - row_mean[i] - col_mean[j] + grand;
            trace += k(j, i) * centered;
        }
    const double scale = static_cast<double>(n - 1);
    return trace / (scale * scale);
}

std::vector<double> lower_triangle(const Matrix& d) {
    if (d.rows() != d.cols())
        throw std::invalid_argument("lower_triangle: matrix must be square");
    const std::size_t n = d.rows();
    if (n < 2) throw std::invalid_argument("lower_triangle: need N >= 2");
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.push_back(d(i, j));
    return out;
}

}  // namespace taskdist
