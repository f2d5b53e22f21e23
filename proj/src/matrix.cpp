#include "taskdist/matrix.hpp"

#include <cmath>

namespace taskdist {

bool Matrix::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Matrix::require_finite(const std::string& what) const {
    if (!all_finite())
        throw std::invalid_argument(what + ": matrix contains non-finite values");
}

namespace {

void check_mul(std::size_t inner_a, std::size_t inner_b, const char* what) {
    if (inner_a != inner_b)
        throw std::invalid_argument(std::string(what) + ": inner dimensions do not match");
}

template <bool Parallel>
Matrix mul_nn(const Matrix& a, const Matrix& b) {
    check_mul(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
#pragma omp parallel for if (Parallel && n > 1) schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a(static_cast<std::size_t>(i), p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j)
                c(static_cast<std::size_t>(i), j) += aip * b(p, j);
        }
    }
    return c;
}

template <bool Parallel>
Matrix mul_nt(const Matrix& a, const Matrix& b) {
    check_mul(a.cols(), b.cols(), "matmul_nt");
    Matrix c(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
#pragma omp parallel for if (Parallel && n > 1) schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        auto ra = a.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < m; ++j) {
            auto rb = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ra[p] * rb[p];
            c(static_cast<std::size_t>(i), j) = acc;
        }
    }
    return c;
}

template <bool Parallel>
Matrix mul_tn(const Matrix& a, const Matrix& b) {
    check_mul(a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
#pragma omp parallel for if (Parallel && n > 1) schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a(p, static_cast<std::size_t>(i)) * b(p, j);
            c(static_cast<std::size_t>(i), j) = acc;
        }
    }
    return c;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) { return mul_nn<true>(a, b); }
Matrix matmul_serial(const Matrix& a, const Matrix& b) { return mul_nn<false>(a, b); }
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return mul_nt<true>(a, b); }
Matrix matmul_nt_serial(const Matrix& a, const Matrix& b) { return mul_nt<false>(a, b); }
Matrix matmul_tn(const Matrix& a, const Matrix& b) { return mul_tn<true>(a, b); }
Matrix matmul_tn_serial(const Matrix& a, const Matrix& b) { return mul_tn<false>(a, b); }

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

}  // namespace taskdist
