#include "slmspec/scenes.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "slmspec/error.hpp"

namespace slmspec::scenes {

std::vector<double> smooth_spectrum(const SpectralGrid& grid, rng::Stream& stream) {
  const double lo = grid.front(), hi = grid.back();
  const double base = stream.uniform(0.05, 0.3);
  const int bumps = 1 + static_cast<int>(stream.below(3));
  std::vector<double> s(grid.size(), base);
  for (int b = 0; b < bumps; ++b) {
    const double center = stream.uniform(lo - 50.0, hi + 50.0);
    const double sigma = stream.uniform(80.0, 250.0);
    const double amp = stream.uniform(0.3, 1.0);
    for (std::size_t l = 0; l < grid.size(); ++l) {
      const double t = (grid[l] - center) / sigma;
      s[l] += amp * std::exp(-0.5 * t * t);
    }
  }
  const double peak = *std::max_element(s.begin(), s.end());
  for (double& v : s) v /= peak;
  return s;
}

namespace {

// Chromaticity of a spectrum under the RGB guide response.
std::array<double, 3> chroma(const SpectralGrid& grid, const SensorResponse& rgb, const std::vector<double>& s) {
  std::array<double, 3> c{};
  for (std::size_t l = 0; l < grid.size(); ++l)
    for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] += s[l] * rgb.at(l, k);
  const double sum = c[0] + c[1] + c[2];
  for (double& v : c) v = sum > 0.0 ? v / sum : 0.0;
  return c;
}

// Spectra whose guide chromaticities differ pairwise by at least kMinChroma, so
// that distinct materials are also distinct in the guide. Gives up after a fixed
// number of draws per spectrum and keeps the last candidate.
constexpr double kMinChroma = 0.08;

std::vector<std::vector<double>> distinct_spectra(const SpectralGrid& grid, int count, rng::Stream& st) {
  const SensorResponse rgb = SensorResponse::rgb_gaussian(grid);
  std::vector<std::vector<double>> out;
  std::vector<std::array<double, 3>> seen;
  for (int i = 0; i < count; ++i) {
    std::vector<double> cand;
    std::array<double, 3> c{};
    for (int attempt = 0; attempt < 200; ++attempt) {
      cand = smooth_spectrum(grid, st);
      c = chroma(grid, rgb, cand);
      bool ok = true;
      for (const auto& o : seen)
        ok = ok && std::hypot(c[0] - o[0], c[1] - o[1], c[2] - o[2]) >= kMinChroma;
      if (ok) break;
    }
    out.push_back(std::move(cand));
    seen.push_back(c);
  }
  return out;
}

// Low-frequency shading field in [0.5, 1].
std::vector<double> shading(int width, int height, rng::Stream& st) {
  const double fx = st.uniform(0.5, 1.5), fy = st.uniform(0.5, 1.5);
  const double px = st.uniform(0.0, 6.3), py = st.uniform(0.0, 6.3);
  std::vector<double> s(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width, v = static_cast<double>(y) / height;
      const double w = 0.5 + 0.25 * (std::sin(6.2832 * fx * u + px) * std::cos(6.2832 * fy * v + py) + 1.0);
      s[static_cast<std::size_t>(y) * width + x] = w;
    }
  return s;
}

HyperspectralCube paint(int width, int height, const SpectralGrid& grid, const std::vector<int>& label,
                        const std::vector<std::vector<double>>& spectra, const std::vector<double>& shade) {
  HyperspectralCube cube(width, height, grid);
  const std::size_t N = grid.size();
  auto d = cube.data();
  for (std::size_t p = 0; p < label.size(); ++p)
    for (std::size_t l = 0; l < N; ++l)
      d[p * N + l] = static_cast<float>(shade[p] * spectra[static_cast<std::size_t>(label[p])][l]);
  return cube;
}

}  // namespace

HyperspectralCube region_scene(int width, int height, const SpectralGrid& grid, int regions, std::uint64_t seed) {
  if (width < 1 || height < 1 || regions < 1) throw DataError("scene needs a positive size and region count");
  rng::Stream st(rng::derive(seed, 0x5eedULL));
  std::vector<double> sx(static_cast<std::size_t>(regions)), sy(static_cast<std::size_t>(regions));
  for (int r = 0; r < regions; ++r) {
    sx[static_cast<std::size_t>(r)] = st.uniform(0.0, width);
    sy[static_cast<std::size_t>(r)] = st.uniform(0.0, height);
  }
  const auto spectra = distinct_spectra(grid, regions, st);
  std::vector<int> label(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      int best = 0;
      double bd = 1e300;
      for (int r = 0; r < regions; ++r) {
        const double dx = x + 0.5 - sx[static_cast<std::size_t>(r)], dy = y + 0.5 - sy[static_cast<std::size_t>(r)];
        if (dx * dx + dy * dy < bd) {
          bd = dx * dx + dy * dy;
          best = r;
        }
      }
      label[static_cast<std::size_t>(y) * width + x] = best;
    }
  return paint(width, height, grid, label, spectra, shading(width, height, st));
}

HyperspectralCube block_scene(int width, int height, const SpectralGrid& grid, int blocks, std::uint64_t seed) {
  if (width < blocks || height < blocks || blocks < 1) throw DataError("scene is smaller than its block grid");
  rng::Stream st(rng::derive(seed, 0xb10cULL));
  const auto spectra = distinct_spectra(grid, blocks * blocks, st);
  std::vector<int> label(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      label[static_cast<std::size_t>(y) * width + x] = (y * blocks / height) * blocks + x * blocks / width;
  const std::vector<double> flat(label.size(), 1.0);
  return paint(width, height, grid, label, spectra, flat);
}

std::vector<HyperspectralCube> committed_scenes(int width, int height, const SpectralGrid& grid, std::uint64_t seed) {
  return {region_scene(width, height, grid, 5, rng::derive(seed, 1)),
          region_scene(width, height, grid, 8, rng::derive(seed, 2)),
          block_scene(width, height, grid, 3, rng::derive(seed, 3))};
}

Rank1Scene rank1_scene(int width, int height, const SpectralGrid& grid, const std::vector<int>& labels, int count,
                       std::uint64_t seed) {
  const std::size_t P = static_cast<std::size_t>(width) * height;
  if (labels.size() != P || count < 1) throw DataError("label map does not match the scene");
  rng::Stream st(rng::derive(seed, 0x1a2bULL));
  const std::size_t N = grid.size();
  Rank1Scene s;
  s.spectra.resize(static_cast<std::size_t>(count) * N);
  for (int q = 0; q < count; ++q) {
    const auto sp = smooth_spectrum(grid, st);
    std::copy(sp.begin(), sp.end(), s.spectra.begin() + static_cast<std::ptrdiff_t>(q * N));
  }
  s.cube = HyperspectralCube(width, height, grid);
  s.guide.width = width;
  s.guide.height = height;
  s.guide.channels = 3;
  s.guide.data.resize(P * 3);
  auto d = s.cube.data();
  for (std::size_t p = 0; p < P; ++p) {
    const int q = labels[p];
    if (q < 0 || q >= count) throw DataError("label out of range");
    const float g = static_cast<float>(st.uniform(0.25, 1.0));
    for (int c = 0; c < 3; ++c) s.guide.data[p * 3 + static_cast<std::size_t>(c)] = g;
    for (std::size_t l = 0; l < N; ++l) d[p * N + l] = static_cast<float>(g * s.spectra[static_cast<std::size_t>(q) * N + l]);
  }
  return s;
}

}  // namespace slmspec::scenes
