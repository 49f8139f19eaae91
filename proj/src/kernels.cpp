#include "fairnvt/kernels.hpp"

#include <atomic>
#include <cmath>

namespace fairnvt::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::kParallel
#else
    Backend::kSerial
#endif
};

constexpr std::size_t kMatmulParallelCutoff = 8192;  // m * k * n

inline void mm_nn_row(const double* a, const double* b, double* c, std::size_t i,
                      std::size_t k, std::size_t n) {
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  const double* ai = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = ai[p];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

inline void mm_nt_row(const double* a, const double* b, double* c, std::size_t i,
                      std::size_t k, std::size_t n) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = acc;
  }
}

inline void mm_tn_row(const double* a, const double* b, double* c, std::size_t i,
                      std::size_t m, std::size_t k, std::size_t n) {
  // c[i, j] = sum_p a[p, i] * b[p, j]
  (void)m;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
    ci[j] = acc;
  }
}

inline void softmax_row(const double* x, double* y, std::size_t cols) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = x[j] > mx ? x[j] : mx;
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline void log_softmax_row(const double* x, double* y, std::size_t cols) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = x[j] > mx ? x[j] : mx;
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) sum += std::exp(x[j] - mx);
  const double lse = std::log(sum);
  for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - mx - lse;
}

}  // namespace

Backend default_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_default_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, Backend backend) {
  if (backend == Backend::kParallel) {
    const bool big = m * k * n >= kMatmulParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (long long i = 0; i < static_cast<long long>(m); ++i)
      mm_nn_row(a, b, c, static_cast<std::size_t>(i), k, n);
  } else {
    for (std::size_t i = 0; i < m; ++i) mm_nn_row(a, b, c, i, k, n);
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, Backend backend) {
  if (backend == Backend::kParallel) {
    const bool big = m * k * n >= kMatmulParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (long long i = 0; i < static_cast<long long>(m); ++i)
      mm_nt_row(a, b, c, static_cast<std::size_t>(i), k, n);
  } else {
    for (std::size_t i = 0; i < m; ++i) mm_nt_row(a, b, c, i, k, n);
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, Backend backend) {
  if (backend == Backend::kParallel) {
    const bool big = m * k * n >= kMatmulParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (long long i = 0; i < static_cast<long long>(m); ++i)
      mm_tn_row(a, b, c, static_cast<std::size_t>(i), m, k, n);
  } else {
    for (std::size_t i = 0; i < m; ++i) mm_tn_row(a, b, c, i, m, k, n);
  }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols,
                  Backend backend) {
  if (backend == Backend::kParallel) {
    const bool big = rows * cols >= kMapParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (long long i = 0; i < static_cast<long long>(rows); ++i)
      softmax_row(x + i * cols, y + i * cols, cols);
  } else {
    for (std::size_t i = 0; i < rows; ++i) softmax_row(x + i * cols, y + i * cols, cols);
  }
}

void log_softmax_rows(const double* x, double* y, std::size_t rows,
                      std::size_t cols, Backend backend) {
  if (backend == Backend::kParallel) {
    const bool big = rows * cols >= kMapParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (long long i = 0; i < static_cast<long long>(rows); ++i)
      log_softmax_row(x + i * cols, y + i * cols, cols);
  } else {
    for (std::size_t i = 0; i < rows; ++i)
      log_softmax_row(x + i * cols, y + i * cols, cols);
  }
}

void row_sumsq(const double* x, double* out, std::size_t rows, std::size_t cols,
               Backend backend) {
  if (backend == Backend::kParallel) {
    const bool big = rows * cols >= kMapParallelCutoff;
#pragma omp parallel for schedule(static) if (big)
    for (long long i = 0; i < static_cast<long long>(rows); ++i) {
      const double* xi = x + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += xi[j] * xi[j];
      out[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* xi = x + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += xi[j] * xi[j];
      out[i] = acc;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  matmul_nn(a, b, c, m, k, n, default_backend());
}
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  matmul_nt(a, b, c, m, k, n, default_backend());
}
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  matmul_tn(a, b, c, m, k, n, default_backend());
}
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  softmax_rows(x, y, rows, cols, default_backend());
}
void log_softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  log_softmax_rows(x, y, rows, cols, default_backend());
}
void row_sumsq(const double* x, double* out, std::size_t rows, std::size_t cols) {
  row_sumsq(x, out, rows, cols, default_backend());
}

}  // namespace fairnvt::kernels
