#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "fairnvt/kernels.hpp"
#include "fairnvt/rng.hpp"
#include "fairnvt/tensor.hpp"

namespace {

using fairnvt::Tensor;
using fairnvt::kernels::Backend;

double bench_ms(int reps, const auto& fn) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

Tensor random_matrix(std::size_t r, std::size_t c, fairnvt::RngStream& rng) {
  Tensor t({r, c});
  fairnvt::fill_gaussian(t, 1.0, rng);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 20;
  std::size_t n = 512;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) reps = std::atoi(argv[++i]);
    if (std::strcmp(argv[i], "--size") == 0 && i + 1 < argc) n = std::strtoull(argv[++i], nullptr, 10);
  }

  fairnvt::RngStream rng(7, fairnvt::stream_id::kDataGen);
  const Tensor a = random_matrix(n, n, rng);
  const Tensor b = random_matrix(n, n, rng);
  Tensor out({n, n});

  struct Case {
    const char* name;
    void (*run)(const Tensor&, const Tensor&, Tensor&, std::size_t, Backend);
  };
  const Case cases[] = {
      {"matmul_nn",
       [](const Tensor& x, const Tensor& y, Tensor& o, std::size_t m, Backend be) {
         fairnvt::kernels::matmul_nn(x.data(), y.data(), o.data(), m, m, m, be);
       }},
      {"matmul_nt",
       [](const Tensor& x, const Tensor& y, Tensor& o, std::size_t m, Backend be) {
         fairnvt::kernels::matmul_nt(x.data(), y.data(), o.data(), m, m, m, be);
       }},
      {"matmul_tn",
       [](const Tensor& x, const Tensor& y, Tensor& o, std::size_t m, Backend be) {
         fairnvt::kernels::matmul_tn(x.data(), y.data(), o.data(), m, m, m, be);
       }},
      {"softmax_rows",
       [](const Tensor& x, const Tensor&, Tensor& o, std::size_t m, Backend be) {
         fairnvt::kernels::softmax_rows(x.data(), o.data(), m, m, be);
       }},
  };

  std::printf("kernel        size   serial_ms  parallel_ms  speedup\n");
  for (const Case& c : cases) {
    const double serial =
        bench_ms(reps, [&] { c.run(a, b, out, n, Backend::kSerial); });
    const double parallel =
        bench_ms(reps, [&] { c.run(a, b, out, n, Backend::kParallel); });
    std::printf("%-12s %5zu  %9.3f  %11.3f  %7.2fx\n", c.name, n, serial, parallel,
                serial / parallel);
  }
  return 0;
}
