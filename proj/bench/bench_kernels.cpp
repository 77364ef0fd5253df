// Serial reference kernels against the BLAS/OpenMP kernels, plus one training step.

#include <benchmark/benchmark.h>

#include "nnlm/kernels.hpp"
#include "nnlm/reference_kernels.hpp"
#include "nnlm/rng.hpp"
#include "nnlm/unet.hpp"

using namespace nnlm;

namespace {

Tensor random_tensor(const Shape& s, std::uint64_t seed) {
  Tensor t(s);
  Rng rng = make_rng(seed, "bench");
  for (float& v : t.data()) v = static_cast<float>(normal(rng));
  return t;
}

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::vector<float> v(n);
  Rng rng = make_rng(seed, "bench_w");
  for (float& x : v) x = static_cast<float>(0.1 * normal(rng));
  return v;
}

void BM_ConvForwardReference(benchmark::State& st) {
  const int e = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1));
  const Tensor x = random_tensor(Shape{1, c, Dims{e, e, e}}, 1);
  const auto w = random_vec(static_cast<std::size_t>(c) * c * 27, 2);
  const std::vector<float> b(c, 0.0f);
  for (auto _ : st) benchmark::DoNotOptimize(reference::conv3d_forward(x, w, b, c, Stride{1, 1, 1}));
}

void BM_ConvForwardBlas(benchmark::State& st) {
  const int e = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1));
  const Tensor x = random_tensor(Shape{1, c, Dims{e, e, e}}, 1);
  const auto w = random_vec(static_cast<std::size_t>(c) * c * 27, 2);
  const std::vector<float> b(c, 0.0f);
  Tensor y;
  kernels::Workspace ws;
  for (auto _ : st) {
    kernels::conv3d_forward(x, w, b, c, Stride{1, 1, 1}, y, ws);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void BM_ConvBackwardReference(benchmark::State& st) {
  const int e = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1));
  const Tensor x = random_tensor(Shape{1, c, Dims{e, e, e}}, 1);
  const Tensor dy = random_tensor(Shape{1, c, Dims{e, e, e}}, 3);
  const auto w = random_vec(static_cast<std::size_t>(c) * c * 27, 2);
  Tensor dx;
  std::vector<float> dw, db;
  for (auto _ : st) reference::conv3d_backward(x, dy, w, Stride{1, 1, 1}, dx, dw, db);
}

void BM_ConvBackwardBlas(benchmark::State& st) {
  const int e = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1));
  const Tensor x = random_tensor(Shape{1, c, Dims{e, e, e}}, 1);
  const Tensor dy = random_tensor(Shape{1, c, Dims{e, e, e}}, 3);
  const auto w = random_vec(static_cast<std::size_t>(c) * c * 27, 2);
  Tensor dx;
  std::vector<float> dw(w.size()), db(c);
  kernels::Workspace ws;
  for (auto _ : st) kernels::conv3d_backward(x, dy, w, Stride{1, 1, 1}, &dx, dw, db, ws);
}

void BM_NormActReference(benchmark::State& st) {
  const int e = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1));
  const Tensor x = random_tensor(Shape{1, c, Dims{e, e, e}}, 1);
  const std::vector<float> g(c, 1.0f), b(c, 0.0f);
  for (auto _ : st) benchmark::DoNotOptimize(reference::norm_act_forward(x, g, b));
}

void BM_NormActParallel(benchmark::State& st) {
  const int e = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1));
  const Tensor x = random_tensor(Shape{1, c, Dims{e, e, e}}, 1);
  const std::vector<float> g(c, 1.0f), b(c, 0.0f);
  Tensor y;
  std::vector<float> mean, inv;
  for (auto _ : st) kernels::norm_act_forward(x, g, b, y, mean, inv);
}

void BM_TrainStep(benchmark::State& st) {
  NetworkSpec spec;
  spec.output_channels = 4;
  spec.widths = {16, 32, 64};
  spec.strides = {Stride{1, 1, 1}, Stride{2, 2, 2}, Stride{2, 2, 2}};
  spec.patch_size = {32, 32, 32};
  UNet net(spec, 0);
  const Tensor x = random_tensor(Shape{2, 1, Dims{32, 32, 32}}, 4);
  Tensor g(Shape{2, 4, Dims{32, 32, 32}}, 1e-4f);
  for (auto _ : st) {
    net.zero_grad();
    net.forward(x);
    net.backward(g);
  }
}

}  // namespace

BENCHMARK(BM_ConvForwardReference)->Args({16, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardBlas)->Args({16, 16})->Args({32, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardReference)->Args({16, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardBlas)->Args({16, 16})->Args({32, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormActReference)->Args({32, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormActParallel)->Args({32, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
