#include <chrono>
#include <cstdio>
#include <random>

#include "taskdist/matrix.hpp"
#include "taskdist/rankstats.hpp"

using namespace taskdist;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

template <typename F>
double time_ms(F&& f, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    {
        const Matrix a = random_matrix(256, 256, 1);
        const Matrix b = random_matrix(256, 256, 2);
        const double serial = time_ms([&] { (void)matmul_serial(a, b); }, 10);
        const double parallel = time_ms([&] { (void)matmul(a, b); }, 10);
        std::printf("matmul 256x256:              serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                    serial, parallel, serial / parallel);
    }
    {
        const Matrix a = random_matrix(512, 128, 3);
        const Matrix b = random_matrix(512, 128, 4);
        const double serial = time_ms([&] { (void)matmul_nt_serial(a, b); }, 10);
        const double parallel = time_ms([&] { (void)matmul_nt(a, b); }, 10);
        std::printf("matmul_nt 512x128:           serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                    serial, parallel, serial / parallel);
    }
    {
        const Matrix x = random_matrix(500, 64, 5);
        const double serial = time_ms([&] { (void)pairwise_pearson_distance_serial(x); }, 5);
        const double parallel = time_ms([&] { (void)pairwise_pearson_distance(x); }, 5);
        std::printf("pearson distance 500 rows:   serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
                    serial, parallel, serial / parallel);
    }
    return 0;
}
