#include "slmspec/data_model.hpp"

#include <algorithm>
#include <cmath>

#include "slmspec/error.hpp"

namespace slmspec {

std::string to_string(SamplingMode mode) {
  return mode == SamplingMode::UniformLambda ? "uniform-in-lambda" : "uniform-in-wavenumber";
}

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "uniform-in-lambda") return SamplingMode::UniformLambda;
  if (s == "uniform-in-wavenumber") return SamplingMode::UniformWavenumber;
  throw DataError("unknown sampling mode '" + s + "'");
}

SpectralGrid::SpectralGrid(std::vector<double> wavelengths_nm, SamplingMode mode)
    : wavelengths_(std::move(wavelengths_nm)), mode_(mode) {
  if (wavelengths_.size() < 2) throw DataError("spectral grid needs at least two bands");
  for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
    if (!std::isfinite(wavelengths_[i]) || wavelengths_[i] <= 0.0)
      throw DataError("spectral grid wavelengths must be finite and positive");
    if (i > 0 && wavelengths_[i] <= wavelengths_[i - 1])
      throw DataError("spectral grid wavelengths must be strictly increasing");
  }
}

SpectralGrid SpectralGrid::uniform_lambda(double lo_nm, double hi_nm, std::size_t bands) {
  if (bands < 2 || !(hi_nm > lo_nm)) throw DataError("invalid uniform grid request");
  std::vector<double> w(bands);
  for (std::size_t i = 0; i < bands; ++i)
    w[i] = lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) / static_cast<double>(bands - 1);
  w.back() = hi_nm;
  return SpectralGrid(std::move(w), SamplingMode::UniformLambda);
}

SpectralGrid SpectralGrid::uniform_wavenumber(double lo_nm, double hi_nm, std::size_t bands) {
  if (bands < 2 || !(hi_nm > lo_nm) || lo_nm <= 0.0) throw DataError("invalid uniform grid request");
  const double s_hi = 1.0 / lo_nm;
  const double s_lo = 1.0 / hi_nm;
  std::vector<double> w(bands);
  // Increasing wavelength means decreasing wavenumber.
  for (std::size_t i = 0; i < bands; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(bands - 1);
    w[i] = 1.0 / (s_hi + (s_lo - s_hi) * t);
  }
  w.front() = lo_nm;
  w.back() = hi_nm;
  return SpectralGrid(std::move(w), SamplingMode::UniformWavenumber);
}

HyperspectralCube::HyperspectralCube(int width, int height, SpectralGrid grid)
    : width_(width), height_(height), grid_(std::move(grid)) {
  if (width <= 0 || height <= 0) throw DataError("cube dimensions must be positive");
  if (grid_.empty()) throw DataError("cube needs a spectral grid");
  data_.assign(pixels() * bands(), 0.0f);
}

HyperspectralCube::HyperspectralCube(int width, int height, SpectralGrid grid, std::vector<float> data)
    : width_(width), height_(height), grid_(std::move(grid)), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw DataError("cube dimensions must be positive");
  if (grid_.empty()) throw DataError("cube needs a spectral grid");
  if (data_.size() != pixels() * bands())
    throw DataError("cube payload size does not match width*height*bands");
}

void HyperspectralCube::validate() const {
  for (float v : data_)
    if (!std::isfinite(v) || v < 0.0f) throw DataError("cube values must be finite and nonnegative");
}

std::vector<double> GuideImage::gray() const {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> g(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s += data[p * channels + c];
    g[p] = s / channels;
  }
  return g;
}

SensorResponse SensorResponse::flat(const SpectralGrid& grid) {
  return SensorResponse{grid, 1, std::vector<double>(grid.size(), 1.0)};
}

SensorResponse SensorResponse::rgb_gaussian(const SpectralGrid& grid) {
  constexpr double centers[3] = {640.0, 550.0, 460.0};  // r, g, b
  constexpr double sigma = 35.0;
  SensorResponse r{grid, 3, std::vector<double>(grid.size() * 3, 0.0)};
  for (int c = 0; c < 3; ++c) {
    double peak = 0.0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
      const double d = (grid[l] - centers[c]) / sigma;
      r.response[l * 3 + c] = std::exp(-0.5 * d * d);
      peak = std::max(peak, r.response[l * 3 + c]);
    }
    if (peak > 0.0)
      for (std::size_t l = 0; l < grid.size(); ++l) r.response[l * 3 + c] /= peak;
  }
  return r;
}

void SensorResponse::validate() const {
  if (channels < 1 || response.size() != grid.size() * static_cast<std::size_t>(channels))
    throw DataError("sensor response size does not match its grid");
  for (double v : response)
    if (!std::isfinite(v) || v < 0.0) throw DataError("sensor response must be finite and nonnegative");
}

std::string to_string(PatternFamily f) {
  switch (f) {
    case PatternFamily::Constant: return "constant";
    case PatternFamily::OnedH: return "oned_h";
    case PatternFamily::OnedV: return "oned_v";
    case PatternFamily::OnedHScale2: return "oned_h_scale2";
    case PatternFamily::OnedHScale4: return "oned_h_scale4";
    case PatternFamily::TwodHPeriodic: return "twod_h_periodic";
    case PatternFamily::TwodHMirror: return "twod_h_mirror";
    case PatternFamily::TwodVPeriodic: return "twod_v_periodic";
    case PatternFamily::TwodVMirror: return "twod_v_mirror";
    case PatternFamily::Random3x3: return "random3x3";
  }
  return "unknown";
}

PatternFamily pattern_family_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(PatternFamily::Random3x3); ++i) {
    const auto f = static_cast<PatternFamily>(i);
    if (to_string(f) == s) return f;
  }
  throw DataError("unknown pattern family '" + s + "'");
}

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (xs.size() < 2 || xs.size() != ys.size()) throw DataError("interpolation needs matching samples");
  if (x < xs.front() || x > xs.back()) throw DataError("interpolation point outside sample range");
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  if (hi >= xs.size()) return ys.back();
  if (hi == 0) return ys.front();
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

HyperspectralCube spectral_resample(const HyperspectralCube& cube, const SpectralGrid& target) {
  const SpectralGrid& src = cube.grid();
  if (target.empty()) throw DataError("empty target grid");
  if (target.front() < src.front() || target.back() > src.back())
    throw DataError("target band outside source coverage");

  // Each target band is a fixed two-tap blend of source bands.
  const std::size_t nt = target.size();
  std::vector<std::size_t> lo(nt);
  std::vector<double> w(nt);
  const auto& xs = src.wavelengths();
  for (std::size_t j = 0; j < nt; ++j) {
    const double x = target[j];
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    if (hi >= xs.size()) {
      lo[j] = xs.size() - 2;
      w[j] = 1.0;
    } else {
      lo[j] = hi - 1;
      w[j] = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
    }
  }

  HyperspectralCube out(cube.width(), cube.height(), target);
  const auto n = static_cast<std::ptrdiff_t>(cube.pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    auto s = cube.spectrum(static_cast<std::size_t>(p));
    auto d = out.spectrum(static_cast<std::size_t>(p));
    for (std::size_t j = 0; j < nt; ++j) {
      const double a = s[lo[j]];
      const double b = s[lo[j] + 1];
      d[j] = static_cast<float>(a + w[j] * (b - a));
    }
  }
  return out;
}

}  // namespace slmspec
