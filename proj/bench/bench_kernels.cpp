// SPDX-License-Identifier: Apache-2.0
//
// Times the OpenMP kernels against their serial reference twins, plus one
// training step of the full model. `--quick` shrinks everything for a smoke run.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sgn/kernels.hpp"
#include "sgn/model.hpp"
#include "sgn/training.hpp"

namespace {

using Clock = std::chrono::steady_clock;
namespace k = sgn::kernels;

double best_ms(const std::function<void()>& f, int reps) {
  f();
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  return best;
}

std::vector<float> randoms(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

float max_diff(const std::vector<float>& a, const std::vector<float>& b) {
  float d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void row(const char* name, const std::string& shape, double serial, double parallel, float diff) {
  std::printf("%-14s %-22s %10.3f %10.3f %8.2fx %10.2e\n", name, shape.c_str(), serial, parallel,
              serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
  sgn::keep_freed_memory();
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const int reps = quick ? 1 : 5;
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-14s %-22s %10s %10s %9s %10s\n", "kernel", "shape", "serial ms", "omp ms", "speedup", "max diff");

  {
    // Frame-level GCN-sized products: (B·T·J)×C_in times C_in×C_out.
    const std::size_t m = quick ? 512 : 64 * 20 * 25, n = quick ? 64 : 256, kk = quick ? 64 : 128;
    const auto a = randoms(m * kk, 1), b = randoms(kk * n, 2);
    std::vector<float> c1(m * n), c2(m * n);
    const double s = best_ms([&] { k::reference::gemm(k::Trans::no, k::Trans::no, m, n, kk, a.data(), b.data(), c1.data(), false); }, reps);
    const double p = best_ms([&] { k::gemm(k::Trans::no, k::Trans::no, m, n, kk, a.data(), b.data(), c2.data(), false); }, reps);
    row("gemm", std::to_string(m) + "x" + std::to_string(kk) + "x" + std::to_string(n), s, p, max_diff(c1, c2));
  }
  {
    // Temporal convolution: reference direct loop vs im2col + gemm.
    const std::size_t outer = quick ? 4 : 64, T = 20, sites = 1, cin = quick ? 32 : 256, cout = quick ? 32 : 256, w = 3;
    const auto x = randoms(outer * T * sites * cin, 3), kern = randoms(cout * cin * w, 4);
    std::vector<float> o1(outer * T * sites * cout), o2(o1.size()), cols(outer * T * sites * cin * w);
    const double s = best_ms([&] { k::reference::conv1d_temporal(x.data(), outer, T, sites, cin, kern.data(), cout, w, o1.data()); }, reps);
    const double p = best_ms([&] {
      k::im2col_temporal(x.data(), outer, T, sites, cin, w, cols.data());
      k::gemm(k::Trans::no, k::Trans::yes, outer * T * sites, cout, cin * w, cols.data(), kern.data(), o2.data(), false);
    }, reps);
    row("conv1d", std::to_string(outer) + "x" + std::to_string(T) + "x" + std::to_string(cin) + "->" + std::to_string(cout), s, p, max_diff(o1, o2));
  }
  {
    // Spatial max-pooling over joints.
    const std::size_t outer = quick ? 64 : 64 * 20, n = 25, inner = quick ? 32 : 256;
    const auto x = randoms(outer * n * inner, 5);
    std::vector<float> o1(outer * inner), o2(o1.size());
    std::vector<std::size_t> a1(o1.size()), a2(o1.size());
    const double s = best_ms([&] { k::reference::pool_max(x.data(), outer, n, inner, o1.data(), a1.data()); }, reps);
    const double p = best_ms([&] { k::pool_max(x.data(), outer, n, inner, o2.data(), a2.data()); }, reps);
    row("pool_max", std::to_string(outer) + "x" + std::to_string(n) + "x" + std::to_string(inner), s, p, max_diff(o1, o2));
  }
  {
    // Adjacency softmax, J×J per frame.
    const std::size_t rows = quick ? 1024 : 64 * 20 * 25, n = 25;
    const auto x = randoms(rows * n, 6);
    std::vector<float> o1(rows * n), o2(o1.size());
    const double s = best_ms([&] { k::reference::softmax_rows(x.data(), rows, n, o1.data()); }, reps);
    const double p = best_ms([&] { k::softmax_rows(x.data(), rows, n, o2.data()); }, reps);
    row("softmax_rows", std::to_string(rows) + "x" + std::to_string(n), s, p, max_diff(o1, o2));
  }
  {
    // One forward/backward of the full model at J=25, T=20, K=60.
    const std::size_t B = quick ? 2 : 16;
    const sgn::ModelConfig cfg = quick ? sgn::shrink_widths(sgn::model_preset("sgn"), 8) : sgn::model_preset("sgn");
    sgn::Model<float> model(cfg, 0);
    for (auto* t : model.trainable()) t->set_requires_grad(true);
    sgn::Tensor<float> x({B, cfg.T, cfg.J, 3});
    const auto r = randoms(x.size(), 7);
    std::copy(r.begin(), r.end(), x.data().begin());
    std::vector<int> labels(B);
    for (std::size_t b = 0; b < B; ++b) labels[b] = static_cast<int>(b % cfg.K);
    const double ms = best_ms([&] {
      sgn::Tape<float> tape(true);
      auto out = model.forward(tape, x, true);
      auto loss = sgn::smoothed_cross_entropy(out.logits, labels, 0.1);
      tape.backward(loss);
    }, reps);
    std::printf("train step (%s, B=%zu): %.2f ms\n", cfg.name.c_str(), B, ms);
  }
  return 0;
}
