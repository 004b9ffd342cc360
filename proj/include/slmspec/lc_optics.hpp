#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "slmspec/data_model.hpp"

namespace slmspec::lc {

/// Crossed-polarizer LC cell: 0.5 * (1 - cos(2 pi R / lambda)).
double lc_transmittance(double retardance_nm, double lambda_nm);

/// Same quantity by explicit Jones propagation: +45 deg polarizer, retarder with
/// fast/slow axes on x/y, -45 deg analyzer.
double jones_transmittance(double retardance_nm, double lambda_nm);

enum class ControlKind { Volts, Index };

/// Delta-n(v) * d_LC sampled at control values. Monotonicity is not assumed.
struct RetardanceCurve {
  ControlKind kind = ControlKind::Volts;
  std::vector<double> control;
  std::vector<double> retardance_nm;

  void validate() const;
  /// Piecewise-linear in control; the control value must lie inside the sampled range.
  double at(double control_value) const;
};

struct GammaCurve {
  std::array<double, 256> mapping{};  // index -> volts
  double v_min = 0.0;
  double v_max = 0.0;
  double c0_nm_per_index = 0.0;
};

/// Realized filter set: row r is the transmittance for SLM index r.
struct FilterBank {
  SpectralGrid grid;
  std::vector<double> transmittance;  // 256 x bands
  std::vector<double> retardance_nm;  // per row, including the extra offset
  double extra_retardance_nm = 0.0;

  std::size_t bands() const noexcept { return grid.size(); }
  std::span<const double> row(std::size_t r) const { return {transmittance.data() + r * bands(), bands()}; }
  void validate() const;
};

struct RetardanceSearch {
  double min_nm = 300.0;
  double max_nm = 3000.0;
  double step_nm = 1.0;
};

/// Brute-force retardance estimate. Each candidate filter is matched to the
/// measurement with a least-squares scale (>= 0) and offset; the smallest
/// residual wins, ties going to the smaller retardance.
double fit_retardance_from_spectrum(const SpectralGrid& grid, std::span<const double> measured,
                                    const RetardanceSearch& search = {});

/// Sum of squared residuals for every search candidate, in candidate order.
std::vector<double> retardance_loss(const SpectralGrid& grid, std::span<const double> measured,
                                    const RetardanceSearch& search);

/// Gamma curve whose composed retardance is affine in the 8-bit index, pinned to
/// gamma(0) = v_min and gamma(255) = v_max.
GammaCurve design_gamma_curve(const RetardanceCurve& curve, double v_min, double v_max);

/// Gamma curve mapping indices linearly onto [v_min, v_max].
GammaCurve linear_gamma(double v_min, double v_max);

FilterBank build_filter_bank(const GammaCurve& gamma, const RetardanceCurve& curve, const SpectralGrid& grid,
                             double extra_retardance_nm = 0.0);

/// Reference device used by the simulator: retardance falling quadratically
/// from `r_at_vmin` at 0 V to `r_at_vmax` at `v_max`, sampled every 0.1 V by default.
RetardanceCurve quadratic_retardance_curve(double r_at_vmin = 3000.0, double r_at_vmax = 800.0,
                                           double v_max = 4.2, std::size_t samples = 43);

/// Linearized bank of the reference device on `grid`.
FilterBank reference_filter_bank(const SpectralGrid& grid, double extra_retardance_nm = 0.0);

// Files. The bank is `index,band0,...` CSV plus a `<csv>.json` sidecar with the grid.
void save_filter_bank(const FilterBank& bank, const std::filesystem::path& csv_path);
FilterBank load_filter_bank(const std::filesystem::path& csv_path);
void save_retardance_curve(const RetardanceCurve& curve, const std::filesystem::path& path);
RetardanceCurve load_retardance_curve(const std::filesystem::path& path);
void save_gamma_curve(const GammaCurve& gamma, const std::filesystem::path& path);
GammaCurve load_gamma_curve(const std::filesystem::path& path);

}  // namespace slmspec::lc
