#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "slmspec/kernels.hpp"
#include "slmspec/rng.hpp"

using namespace slmspec;

namespace {

constexpr int kSide = 256;
constexpr std::size_t kBands = 31;
constexpr std::size_t kFrames = 4;

const MeasurementOperator& op() {
  static const MeasurementOperator o = [] {
    rng::Stream st(1);
    MeasurementOperator m;
    m.width = m.height = kSide;
    m.bands = kBands;
    m.frames = kFrames;
    m.indices.resize(kFrames * m.pixels());
    for (auto& i : m.indices) i = static_cast<std::uint8_t>(st.below(256));
    m.bank.resize(256 * kBands);
    for (double& v : m.bank) v = st.uniform();
    return m;
  }();
  return o;
}

const std::vector<double>& cube() {
  static const std::vector<double> x = [] {
    rng::Stream st(2);
    std::vector<double> v(op().pixels() * kBands);
    for (double& e : v) e = st.uniform();
    return v;
  }();
  return x;
}

template <bool Serial>
void BM_Forward(benchmark::State& s) {
  std::vector<double> y(kFrames * op().pixels());
  for (auto _ : s) {
    if constexpr (Serial) kernels::serial::forward(op(), cube(), y);
    else kernels::forward(op(), cube(), y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Serial>
void BM_Adjoint(benchmark::State& s) {
  std::vector<double> r(kFrames * op().pixels(), 0.5), g(cube().size());
  for (auto _ : s) {
    std::fill(g.begin(), g.end(), 0.0);
    if constexpr (Serial) kernels::serial::adjoint_accumulate(op(), r, g);
    else kernels::adjoint_accumulate(op(), r, g);
    benchmark::DoNotOptimize(g.data());
  }
}

template <bool Serial>
void BM_TvCharbonnier(benchmark::State& s) {
  std::vector<double> g(cube().size());
  for (auto _ : s) {
    double v = Serial ? kernels::serial::tv_charbonnier(cube(), kSide, kSide, kBands, 0.01, 1.0, g)
                      : kernels::tv_charbonnier(cube(), kSide, kSide, kBands, 0.01, 1.0, g);
    benchmark::DoNotOptimize(v);
  }
}

template <bool Serial>
void BM_SpectralSmoothness(benchmark::State& s) {
  std::vector<double> g(cube().size());
  for (auto _ : s) {
    double v = Serial ? kernels::serial::spectral_smoothness(cube(), op().pixels(), kBands, 1.0, g)
                      : kernels::spectral_smoothness(cube(), op().pixels(), kBands, 1.0, g);
    benchmark::DoNotOptimize(v);
  }
}

template <bool Serial>
void BM_BoxMean(benchmark::State& s) {
  const std::span<const double> img(cube().data(), op().pixels());
  std::vector<double> out(op().pixels());
  const int radius = static_cast<int>(s.range(0));
  for (auto _ : s) {
    if constexpr (Serial) kernels::serial::box_mean(img, kSide, kSide, radius, out);
    else kernels::box_mean(img, kSide, kSide, radius, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_PixelNormalEquations(benchmark::State& s) {
  std::vector<std::size_t> pix(op().pixels() / 16);
  std::iota(pix.begin(), pix.end(), std::size_t{0});
  std::vector<double> y(kFrames * op().pixels(), 1.0);
  std::vector<double> gram(pix.size() * kBands * kBands), rhs(pix.size() * kBands);
  for (auto _ : s) {
    kernels::pixel_normal_equations(op(), y, pix, gram, rhs);
    benchmark::DoNotOptimize(gram.data());
  }
}

}  // namespace

BENCHMARK(BM_Forward<true>)->Name("forward/serial");
BENCHMARK(BM_Forward<false>)->Name("forward/openmp");
BENCHMARK(BM_Adjoint<true>)->Name("adjoint/serial");
BENCHMARK(BM_Adjoint<false>)->Name("adjoint/openmp");
BENCHMARK(BM_TvCharbonnier<true>)->Name("tv_charbonnier/serial");
BENCHMARK(BM_TvCharbonnier<false>)->Name("tv_charbonnier/openmp");
BENCHMARK(BM_SpectralSmoothness<true>)->Name("spectral_smoothness/serial");
BENCHMARK(BM_SpectralSmoothness<false>)->Name("spectral_smoothness/openmp");
BENCHMARK(BM_BoxMean<true>)->Name("box_mean/serial")->Arg(1)->Arg(8);
BENCHMARK(BM_BoxMean<false>)->Name("box_mean/openmp")->Arg(1)->Arg(8);
BENCHMARK(BM_PixelNormalEquations)->Name("pixel_normal_equations/openmp");

BENCHMARK_MAIN();
