#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slmspec {

enum class SamplingMode { UniformLambda, UniformWavenumber };

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& s);

/// Ordered band centers in nm. Strictly increasing, positive, at least two bands.
class SpectralGrid {
 public:
  SpectralGrid() = default;
  explicit SpectralGrid(std::vector<double> wavelengths_nm,
                        SamplingMode mode = SamplingMode::UniformLambda);

  static SpectralGrid uniform_lambda(double lo_nm, double hi_nm, std::size_t bands);
  /// Bands equally spaced in 1/lambda, returned in increasing wavelength.
  static SpectralGrid uniform_wavenumber(double lo_nm, double hi_nm, std::size_t bands);

  std::size_t size() const noexcept { return wavelengths_.size(); }
  bool empty() const noexcept { return wavelengths_.empty(); }
  double operator[](std::size_t i) const { return wavelengths_[i]; }
  double front() const { return wavelengths_.front(); }
  double back() const { return wavelengths_.back(); }
  const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
  SamplingMode mode() const noexcept { return mode_; }

  bool operator==(const SpectralGrid&) const = default;

 private:
  std::vector<double> wavelengths_;
  SamplingMode mode_ = SamplingMode::UniformLambda;
};

/// Radiance H[x, y, l]. Stored band-interleaved by pixel: data[(y * width + x) * bands + l].
class HyperspectralCube {
 public:
  HyperspectralCube() = default;
  HyperspectralCube(int width, int height, SpectralGrid grid);
  HyperspectralCube(int width, int height, SpectralGrid grid, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t bands() const noexcept { return grid_.size(); }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  const SpectralGrid& grid() const noexcept { return grid_; }

  float& at(int x, int y, std::size_t l) { return data_[index(x, y, l)]; }
  float at(int x, int y, std::size_t l) const { return data_[index(x, y, l)]; }

  std::span<float> spectrum(std::size_t pixel) { return {data_.data() + pixel * bands(), bands()}; }
  std::span<const float> spectrum(std::size_t pixel) const {
    return {data_.data() + pixel * bands(), bands()};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Throws DataError unless every value is finite and nonnegative.
  void validate() const;

  bool operator==(const HyperspectralCube&) const = default;

 private:
  std::size_t index(int x, int y, std::size_t l) const {
    return (static_cast<std::size_t>(y) * width_ + x) * bands() + l;
  }

  int width_ = 0;
  int height_ = 0;
  SpectralGrid grid_;
  std::vector<float> data_;
};

/// One captured frame i_k. Values are electrons unless stated otherwise.
struct MeasurementImage {
  int width = 0;
  int height = 0;
  std::string pattern_id;
  double electrons_per_unit = 1.0;  // exposure scale applied to the radiance projection
  std::vector<float> data;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const MeasurementImage&) const = default;
};

/// Guide camera frame, pixel-interleaved channels.
struct GuideImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  /// Per-pixel channel mean, the grayscale guide g.
  std::vector<double> gray() const;
};

/// Spectral sensitivity on a grid, max-normalized to 1. One or three channels.
struct SensorResponse {
  SpectralGrid grid;
  int channels = 1;
  std::vector<double> response;  // response[l * channels + c]

  double at(std::size_t l, int c = 0) const { return response[l * channels + c]; }

  static SensorResponse flat(const SpectralGrid& grid);
  /// Gaussian bumps at 460/550/640 nm with 35 nm sigma.
  static SensorResponse rgb_gaussian(const SpectralGrid& grid);
  void validate() const;
};

enum class PatternFamily {
  Constant,
  OnedH,
  OnedV,
  OnedHScale2,
  OnedHScale4,
  TwodHPeriodic,
  TwodHMirror,
  TwodVPeriodic,
  TwodVMirror,
  Random3x3,
};

std::string to_string(PatternFamily f);
PatternFamily pattern_family_from_string(const std::string& s);

/// How the 256 indices are laid out inside a 16x16 tile.
enum class TileLayout { Raster256, Max240 };

struct PatternSpec {
  PatternFamily family = PatternFamily::Constant;
  int level = 0;  // constant family only
  int shift_x = 0;
  int shift_y = 0;
  std::uint64_t seed = 0;  // random family only
  int stripe_height = 3;   // 1D stagger period
  TileLayout layout = TileLayout::Raster256;

  bool operator==(const PatternSpec&) const = default;
};

/// 8-bit SLM index image p(x, y), row-major.
struct SlmPattern {
  int width = 0;
  int height = 0;
  std::string id;
  PatternSpec spec;
  std::vector<std::uint8_t> values;

  std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const SlmPattern&) const = default;
};

/// Piecewise-linear resampling onto `target`. Bands outside the source range are an error.
HyperspectralCube spectral_resample(const HyperspectralCube& cube, const SpectralGrid& target);

/// Scalar piecewise-linear interpolation of samples (xs ascending) at x; x must lie in range.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

}  // namespace slmspec
