#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slmspec/data_model.hpp"
#include "slmspec/forward_sim.hpp"
#include "slmspec/kernels.hpp"

namespace slmspec::recon {

// ---------------------------------------------------------------------------
// Per-pixel least squares

/// Per-pixel ridge least squares against the effective bank, in radiance units.
/// The ridge is ridge_rel * trace(A^T A) / N for each distinct index sequence.
/// ridge_rel = 0 demands a nonsingular A^T A.
HyperspectralCube reconstruct_lsq(const sim::CaptureSet& set, double ridge_rel = 1e-8);

/// The 256-frame full-scan case; rejects incomplete scans.
HyperspectralCube reconstruct_lsq_fullscan(const sim::CaptureSet& full, double ridge_rel = 1e-8);

// ---------------------------------------------------------------------------
// TV-regularized inversion

struct TvConfig {
  std::optional<double> eta_tv;  // default 100 / sqrt(max_electrons)
  double eta_spectral = 0.5;
  int iterations = 200;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double charbonnier_eps = 1e-3;
  enum class DataTerm { Auto, Direct, Gram } data_term = DataTerm::Auto;

  void validate() const;
};

double default_eta_tv(double max_electrons);

/// sum_k ||i_k - X Phi_k||^2 + eta_tv * TV(X) + eta_spectral * ||X D||^2, X in electrons.
///
/// Two exact evaluations of the data term: Direct applies the operator frame by
/// frame; Gram folds the frames of each pixel into (G, b, c) so the cost is
/// per pixel x^T G x - 2 b^T x + c. Pixels sharing an index sequence share G.
class TvProblem {
 public:
  TvProblem(MeasurementOperator op, std::vector<double> measurements, double eta_tv, double eta_spectral,
            double charbonnier_eps, TvConfig::DataTerm data_term = TvConfig::DataTerm::Auto);

  std::size_t size() const noexcept { return op_.pixels() * op_.bands; }
  const MeasurementOperator& op() const noexcept { return op_; }
  bool uses_gram() const noexcept { return gram_mode_; }

  double objective(std::span<const double> x) const;
  /// Objective, with its gradient written (not accumulated) into grad.
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;

 private:
  double data_term(std::span<const double> x, std::span<double> grad) const;

  MeasurementOperator op_;
  std::vector<double> y_;
  double eta_tv_;
  double eta_spectral_;
  double eps_;
  bool gram_mode_ = false;
  std::vector<std::size_t> group_;  // pixel -> gram block
  std::vector<double> gram_;        // groups x N x N
  std::vector<double> rhs_;         // P x N
  std::vector<double> yy_;          // P
};

struct TvResult {
  HyperspectralCube cube;
  std::vector<double> objective_trace;  // before each step, then at the final iterate
};

TvResult reconstruct_tv(const sim::CaptureSet& captures, const TvConfig& cfg = {});

// ---------------------------------------------------------------------------
// Superpixels and rank-1 guided inversion

struct SuperpixelMap {
  int width = 0;
  int height = 0;
  int count = 0;
  double compactness = 10.0;
  std::vector<int> labels;  // [0, count)
};

/// SLIC in CIELAB with grid-seeded centers, a fixed number of iterations and
/// connectivity enforcement. One-channel guides are treated as gray.
SuperpixelMap slic_superpixels(const GuideImage& guide, int q, double compactness = 10.0, int iterations = 10);

/// Rebuilds a map from raw labels: splits disconnected pieces and renumbers in raster order.
SuperpixelMap relabel_connected(int width, int height, std::span<const int> labels);

enum class QSchedule { Sqrt, Linear };

struct GuidedConfig {
  std::optional<int> q_superpixels;  // fixed count; overrides the schedule
  std::optional<double> q_base;      // default pixels / 256
  QSchedule q_schedule = QSchedule::Sqrt;
  std::optional<double> ridge_eta;   // default: 1e-5 at one capture to 1e-6 at 256
  double compactness = 10.0;
  bool postfilter = false;
  int guided_filter_radius = 8;
  double guided_filter_eps = 1e-4;

  void validate() const;
};

double rank1_ridge_eta(std::size_t captures);
int rank1_superpixel_count(std::size_t pixels, std::size_t captures, const GuidedConfig& cfg);

struct Rank1Result {
  HyperspectralCube cube;
  SuperpixelMap superpixels;
  std::vector<double> spectra;  // count x N, in normalized units
  double eta = 0.0;
  double measurement_peak = 0.0;  // max electrons used to normalize i
  double guide_peak = 0.0;        // max gray value used to normalize g
};

Rank1Result reconstruct_rank1(const sim::CaptureSet& captures, const GuideImage& guide, const GuidedConfig& cfg = {});
Rank1Result reconstruct_rank1(const sim::CaptureSet& captures, const GuideImage& guide, const SuperpixelMap& labels,
                              const GuidedConfig& cfg = {});

/// Box-window guided filter applied to each band with the max-normalized gray guide.
HyperspectralCube guided_filter(const HyperspectralCube& cube, const GuideImage& guide, int radius = 8,
                                double eps = 1e-4);

}  // namespace slmspec::recon
