#include <algorithm>
#include <cstring>
#include <vector>

#include "inrv/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace inrv::kernels {

namespace {

// Below this many multiply-adds a kernel runs on the calling thread.
constexpr std::size_t kParallelWork = 1 << 16;

constexpr std::size_t kRowTile = 4;
constexpr std::size_t kTileCols = 16;
constexpr std::size_t kLanes = 8;

using Vec = double __attribute__((vector_size(kLanes * sizeof(double))));

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, const Vec& v) { std::memcpy(p, &v, sizeof v); }

// Register-tiled update of an R x (V * kLanes) block of c, summing over p in
// ascending order with separate multiply and add, so every element matches
// the serial loops bit for bit. a(r, p) = a[r * a_row_step + p * a_col_step].
template <std::size_t R, std::size_t V>
inline void tile(const double* __restrict a, std::size_t a_row_step, std::size_t a_col_step,
                 const double* __restrict b, std::size_t b_row, std::size_t depth, double* __restrict c,
                 std::size_t c_row) {
  Vec acc[R][V];
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t v = 0; v < V; ++v) acc[r][v] = Vec{};
  }
  for (std::size_t p = 0; p < depth; ++p) {
    const double* bp = b + p * b_row;
    Vec bv[V];
    for (std::size_t v = 0; v < V; ++v) bv[v] = load(bp + v * kLanes);
    for (std::size_t r = 0; r < R; ++r) {
      const double ar = a[r * a_row_step + p * a_col_step];
      for (std::size_t v = 0; v < V; ++v) acc[r][v] += ar * bv[v];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t v = 0; v < V; ++v) store(c + r * c_row + v * kLanes, acc[r][v]);
  }
}

template <std::size_t R>
inline void tile_scalar(const double* a, std::size_t a_row_step, std::size_t a_col_step, const double* b,
                        std::size_t b_row, std::size_t depth, double* c, std::size_t c_row, std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    double acc[R] = {};
    for (std::size_t p = 0; p < depth; ++p) {
      const double bj = b[p * b_row + j];
      for (std::size_t r = 0; r < R; ++r) acc[r] += a[r * a_row_step + p * a_col_step] * bj;
    }
    for (std::size_t r = 0; r < R; ++r) c[r * c_row + j] = acc[r];
  }
}

template <std::size_t R>
void row_block(const double* a, std::size_t a_row_step, std::size_t a_col_step, const double* b, std::size_t depth,
               std::size_t cols, double* c) {
  std::size_t j = 0;
  for (; j + 2 * kLanes <= cols; j += 2 * kLanes) tile<R, 2>(a, a_row_step, a_col_step, b + j, cols, depth, c + j, cols);
  for (; j + kLanes <= cols; j += kLanes) tile<R, 1>(a, a_row_step, a_col_step, b + j, cols, depth, c + j, cols);
  if (j < cols) tile_scalar<R>(a, a_row_step, a_col_step, b + j, cols, depth, c + j, cols, cols - j);
}

// c[rows x cols] = A * B where A is addressed through (row_step, col_step).
void tiled_product(const double* a, std::size_t a_row_step, std::size_t a_col_step, const double* b,
                   std::size_t rows, std::size_t depth, std::size_t cols, double* c) {
  const auto row_blocks = static_cast<std::ptrdiff_t>((rows + kRowTile - 1) / kRowTile);
  const bool parallel = rows * depth * cols >= kParallelWork && row_blocks > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t blk = 0; blk < row_blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowTile;
    const double* ablk = a + i0 * a_row_step;
    double* cblk = c + i0 * cols;
    switch (std::min(kRowTile, rows - i0)) {
      case 4: row_block<4>(ablk, a_row_step, a_col_step, b, depth, cols, cblk); break;
      case 3: row_block<3>(ablk, a_row_step, a_col_step, b, depth, cols, cblk); break;
      case 2: row_block<2>(ablk, a_row_step, a_col_step, b, depth, cols, cblk); break;
      default: row_block<1>(ablk, a_row_step, a_col_step, b, depth, cols, cblk); break;
    }
  }
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  tiled_product(a.data(), k, 1, b.data(), m, k, n, c.data());
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  // Output row p of c reads column p of a: row step 1, column (depth) step k.
  tiled_product(a.data(), 1, k, b.data(), k, m, n, c.data());
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
               std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  tiled_product(a.data(), k, 1, bt.data(), m, k, n, c.data());
}

void column_sum(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n) {
  const auto col_blocks = static_cast<std::ptrdiff_t>((n + kTileCols - 1) / kTileCols);
  const bool parallel = m * n >= kParallelWork && col_blocks > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t blk = 0; blk < col_blocks; ++blk) {
    const std::size_t j0 = static_cast<std::size_t>(blk) * kTileCols;
    const std::size_t j1 = std::min(n, j0 + kTileCols);
    for (std::size_t j = j0; j < j1; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = a.data() + i * n;
      for (std::size_t j = j0; j < j1; ++j) out[j] += row[j];
    }
  }
}

void add_row(std::span<const double> a, std::span<const double> row, std::span<double> out, std::size_t m,
             std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) out[base + j] = a[base + j] + row[j];
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

}  // namespace inrv::kernels
