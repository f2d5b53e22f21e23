#pragma once

#include <span>
#include <vector>

#include "taskdist/matrix.hpp"

namespace taskdist {

// Variance threshold below which a vector counts as constant.
inline constexpr double kVarianceEpsilon = 1e-12;

struct RankVector {
    std::vector<double> ranks;  // average ranks in [1, n]
};

// Pearson correlation. Returns 0 and sets *degenerate when either input has
// variance below kVarianceEpsilon.
double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate = nullptr);

// D[i][j] = 1 - pearson(row_i, row_j). Symmetric, zero diagonal for
// non-degenerate rows, entries in [0, 2].
Matrix pairwise_pearson_distance(const Matrix& rows, bool* degenerate = nullptr);
Matrix pairwise_pearson_distance_serial(const Matrix& rows, bool* degenerate = nullptr);

// Average ranks for ties, order-preserving on distinct values.
RankVector rank_transform(std::span<const double> v);

// Pearson correlation of the rank transforms.
double spearman(std::span<const double> x, std::span<const double> y,
                bool* degenerate = nullptr);

// Kendall's tau-b (tie-corrected).
double kendall_tau(std::span<const double> x, std::span<const double> y,
                   bool* degenerate = nullptr);

// (1/(N-1)^2) * tr(K H L H) with H = I - (1/N) 11^T. K, L square symmetric.
double hsic(const Matrix& k, const Matrix& l);

// Strict upper off-diagonal entries {D[i][j] : i < j} in row-major order.
std::vector<double> lower_triangle(const Matrix& d);

}  // namespace taskdist
