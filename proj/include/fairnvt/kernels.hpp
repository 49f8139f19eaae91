#pragma once

#include <cstddef>

namespace fairnvt::kernels {

// Every kernel has a serial path and an OpenMP path. The parallel path assigns
// each output element to exactly one thread and keeps the per-element
// accumulation order identical to the serial path, so results are bit-equal to
// the serial reference for any thread count.
enum class Backend { kSerial, kParallel };

Backend default_backend();
void set_default_backend(Backend b);

// c[m x n] = a[m x k] * b[k x n]
void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, Backend backend);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, Backend backend);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, Backend backend);

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);

// Row softmax with per-row max subtraction.
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols,
                  Backend backend);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);

// Row log-softmax: y = x - max - log(sum(exp(x - max))). Stays finite for
// arbitrarily spread logits where log(softmax(x)) would not.
void log_softmax_rows(const double* x, double* y, std::size_t rows,
                      std::size_t cols, Backend backend);
void log_softmax_rows(const double* x, double* y, std::size_t rows,
                      std::size_t cols);

// out[r] = sum_c x[r, c]^2
void row_sumsq(const double* x, double* out, std::size_t rows, std::size_t cols,
               Backend backend);
void row_sumsq(const double* x, double* out, std::size_t rows, std::size_t cols);

inline constexpr std::size_t kMapParallelCutoff = 4096;

// y[i] = f(x[i])
template <class F>
void map(const double* x, double* y, std::size_t n, F f, Backend backend) {
  if (backend == Backend::kParallel) {
#pragma omp parallel for schedule(static) if (n >= kMapParallelCutoff)
    for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = f(x[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  }
}

template <class F>
void map(const double* x, double* y, std::size_t n, F f) {
  map(x, y, n, f, default_backend());
}

// y[i] = f(a[i], b[i])
template <class F>
void zip(const double* a, const double* b, double* y, std::size_t n, F f,
         Backend backend) {
  if (backend == Backend::kParallel) {
#pragma omp parallel for schedule(static) if (n >= kMapParallelCutoff)
    for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = f(a[i], b[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
  }
}

template <class F>
void zip(const double* a, const double* b, double* y, std::size_t n, F f) {
  zip(a, b, y, n, f, default_backend());
}

}  // namespace fairnvt::kernels
