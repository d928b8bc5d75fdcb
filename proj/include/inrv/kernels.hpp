#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels used by the graph. The default versions are
// OpenMP-parallel; `serial` holds straightforward reference loops kept for
// testing and benchmarking. Both accumulate every output element in the same
// order, so their results are bit-identical for any thread count.
namespace inrv::kernels {

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);

// c[k x n] = a[m x k]^T * b[m x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);

// out[n] = sum over rows of a[m x n]
void column_sum(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n);

// out[m x n] = a[m x n] + row[n] broadcast over rows
void add_row(std::span<const double> a, std::span<const double> row, std::span<double> out, std::size_t m,
             std::size_t n);

// Number of worker threads the parallel kernels may use.
int max_threads();
void set_max_threads(int threads);

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n);
void column_sum(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n);
void add_row(std::span<const double> a, std::span<const double> row, std::span<double> out, std::size_t m,
             std::size_t n);

}  // namespace serial
}  // namespace inrv::kernels
