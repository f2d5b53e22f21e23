#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskdist {

// Dense row-major matrix of doubles. Carrier for features, pseudo-labels
// and distance matrices throughout the library.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_)
            throw std::invalid_argument("Matrix: values size does not match rows*cols");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const;
    void require_finite(const std::string& what) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// C = A * B. OpenMP-parallel over output rows; each output element is
// reduced serially so results are bit-identical to the serial versions.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_serial(const Matrix& a, const Matrix& b);

// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_nt_serial(const Matrix& a, const Matrix& b);

// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_tn_serial(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

}  // namespace taskdist
