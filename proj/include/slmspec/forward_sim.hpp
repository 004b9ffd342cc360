#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "slmspec/data_model.hpp"
#include "slmspec/kernels.hpp"
#include "slmspec/lc_optics.hpp"

namespace slmspec::sim {

struct NoiseConfig {
  double max_electrons = 1000.0;  // tau_max
  double read_noise_electrons = 2.0;
  std::uint64_t seed = 0;
  bool enabled = true;

  void validate() const;
  static NoiseConfig noiseless() { return {1000.0, 0.0, 0, false}; }
};

/// Frames captured under a list of patterns, in electrons.
struct CaptureSet {
  std::vector<MeasurementImage> measurements;
  std::vector<SlmPattern> patterns;
  lc::FilterBank bank;
  SensorResponse sensor;
  NoiseConfig noise;
  double electrons_per_unit = 1.0;
  std::optional<GuideImage> guide;

  std::size_t size() const noexcept { return measurements.size(); }
  int width() const { return measurements.empty() ? 0 : measurements.front().width; }
  int height() const { return measurements.empty() ? 0 : measurements.front().height; }
  void validate() const;
};

/// bank * diag(sensor): the rows a mono pixel actually integrates against.
std::vector<double> effective_bank(const lc::FilterBank& bank, const SensorResponse& sensor);

/// Operator for `patterns` over `bank` with the sensor folded in.
MeasurementOperator make_operator(std::span<const SlmPattern> patterns, const lc::FilterBank& bank,
                                  const SensorResponse& sensor);

/// Electrons per radiance unit such that the brightest noiseless reading over
/// every pixel and every one of the 256 filters equals max_electrons. The
/// scale does not depend on which patterns are displayed, so all capture sets
/// of one scene share it. Returns 1 for an all-zero projection.
double exposure_scale(const HyperspectralCube& cube, const lc::FilterBank& bank, const SensorResponse& sensor,
                      double max_electrons);

/// Poisson(mean) by CDF inversion below 30, else round(mean + sqrt(mean) z).
double sample_poisson(double mean, double u, double z);

/// One frame. Noise for pixel p is keyed by (seed, pattern id, p). Without an
/// explicit scale the frame's own exposure_scale is used.
MeasurementImage simulate_measurement(const HyperspectralCube& cube, const SlmPattern& pattern,
                                      const lc::FilterBank& bank, const SensorResponse& sensor,
                                      const NoiseConfig& noise, std::optional<double> electrons_per_unit = {});

/// Frames for a list of patterns under one shared scale.
CaptureSet simulate_patterned(const HyperspectralCube& cube, std::span<const SlmPattern> patterns,
                              const lc::FilterBank& bank, const SensorResponse& sensor, const NoiseConfig& noise,
                              std::optional<double> electrons_per_unit = {});

/// 256 constant-pattern frames, index order.
CaptureSet simulate_full_scan(const HyperspectralCube& cube, const lc::FilterBank& bank,
                              const SensorResponse& sensor, const NoiseConfig& noise,
                              std::optional<double> electrons_per_unit = {});

/// Pixelwise lookup of the full scan: out(x, y) = frame[pattern(x, y)](x, y).
MeasurementImage simulate_patterned_from_fullscan(const CaptureSet& full, const SlmPattern& pattern);

/// RGB guide: per-channel projection of the cube on the response, in radiance units.
GuideImage simulate_guide(const HyperspectralCube& cube, const SensorResponse& rgb_response);

/// Spatially invariant baseline: one constant-pattern frame per index.
CaptureSet lc_cell_mode(const HyperspectralCube& cube, const lc::FilterBank& bank,
                        std::span<const std::uint8_t> indices, const SensorResponse& sensor,
                        const NoiseConfig& noise, std::optional<double> electrons_per_unit = {});

/// Directory layout: manifest.json, frame_NNN.hsi, patterns/<id>.pgm, bank.csv
/// (+ .json sidecar), sensor.csv and optionally guide.hsi.
void save_capture_set(const CaptureSet& set, const std::filesystem::path& dir);
CaptureSet load_capture_set(const std::filesystem::path& dir);

/// Cube samples as doubles, pixel-interleaved.
std::vector<double> cube_values(const HyperspectralCube& cube);

}  // namespace slmspec::sim
