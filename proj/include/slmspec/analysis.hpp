#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slmspec/data_model.hpp"
#include "slmspec/forward_sim.hpp"
#include "slmspec/lc_optics.hpp"
#include "slmspec/reconstruct.hpp"

namespace slmspec::analysis {

struct Psnr {
  double db = 0.0;
  bool infinite = false;
};

/// 20 log10(max|ref| / RMSE).
Psnr psnr(std::span<const float> reference, std::span<const float> estimate);
Psnr psnr(const HyperspectralCube& reference, const HyperspectralCube& estimate);

/// Angle in degrees between two spectra from |<a,b>| / (|a||b|); NaN when either is zero.
double spectral_angle_deg(std::span<const float> a, std::span<const float> b);

struct SamMap {
  std::vector<double> degrees;  // NaN at flagged pixels
  std::vector<std::uint8_t> valid;
  double median_deg = 0.0;
  double mean_deg = 0.0;
  double max_deg = 0.0;
  std::size_t flagged = 0;
};

SamMap sam_map(const HyperspectralCube& reference, const HyperspectralCube& estimate);

enum class Method { Lsq, Tv, Rank1 };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct ReconSpec {
  Method method = Method::Rank1;
  recon::TvConfig tv;
  recon::GuidedConfig guided;
  double lsq_ridge = 1e-8;
};

/// Dispatch on method; the guide is only used by rank-1.
HyperspectralCube run_reconstruction(const sim::CaptureSet& captures, const GuideImage& guide, const ReconSpec& spec);

struct Scenario {
  HyperspectralCube cube;
  lc::FilterBank bank;
  SensorResponse sensor;
  SensorResponse rgb;
  sim::NoiseConfig noise;
};

struct PatternRow {
  std::string pattern_id;
  std::string family;
  double psnr_db = 0.0;
  bool psnr_infinite = false;
  double sam_median_deg = 0.0;
};

/// One single-capture reconstruction per pattern, sharing the scene's exposure scale.
std::vector<PatternRow> pattern_benchmark(const Scenario& sc, std::span<const SlmPattern> patterns,
                                          const ReconSpec& spec);

struct SweepRow {
  std::size_t count = 0;
  std::string strategy;  // "patterned" or "lc_cell"
  std::string method;
  double psnr_db = 0.0;
  double sam_median_deg = 0.0;
};

struct SweepConfig {
  std::vector<std::size_t> counts{1, 2, 4, 8, 16};
  int baseline_draws = 10;
  std::uint64_t seed = 0;
  bool include_baseline = true;
};

/// The first `count` selected patterns versus LC-cell mode with `count` distinct
/// random indices (averaged over baseline_draws draws), same reconstruction method.
std::vector<SweepRow> multiframe_sweep(const Scenario& sc, std::span<const SlmPattern> selected,
                                       const ReconSpec& spec, const SweepConfig& cfg);

/// Distinct indices for baseline draw `draw` of size `count`.
std::vector<std::uint8_t> baseline_indices(std::uint64_t seed, std::size_t count, int draw);

struct FwhmResult {
  double line_nm = 0.0;
  double fwhm_nm = 0.0;
  double peak_nm = 0.0;
};

/// Recovers a unit line at each wavelength from a noiseless full scan with ridge
/// least squares on the bank's grid, then measures the full width at half maximum.
std::vector<FwhmResult> fwhm_probe(const lc::FilterBank& bank, std::span<const double> lines_nm,
                                   double ridge_rel = 1e-8);

}  // namespace slmspec::analysis
