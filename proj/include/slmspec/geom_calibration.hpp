#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace slmspec::geom {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box used to normalize coordinates to [-1, 1].
struct Domain {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  Point normalize(Point p) const { return {2.0 * (p.x - x0) / (x1 - x0) - 1.0, 2.0 * (p.y - y0) / (y1 - y0) - 1.0}; }
};

/// Bivariate cubic on normalized coordinates u, v. Coefficient order:
/// 1, u, v, u^2, uv, v^2, u^3, u^2 v, u v^2, v^3.
struct PolynomialMap2D {
  static constexpr int kTerms = 10;
  Domain domain;
  std::array<double, kTerms> coeff{};

  double operator()(double x, double y) const;
  static std::array<double, kTerms> basis(double u, double v);
  /// Map equal to x (or y) on the given domain.
  static PolynomialMap2D identity_x(const Domain& d);
  static PolynomialMap2D identity_y(const Domain& d);
};

/// Least-squares fit of a cubic to (points, values) on `domain`.
PolynomialMap2D fit_polynomial(std::span<const Point> points, std::span<const double> values, const Domain& domain);

struct ScanObservation {
  std::vector<Point> camera;   // (x_c, y_c)
  std::vector<double> target;  // SLM row (or column) index
  std::vector<std::uint8_t> true_inlier;
  Domain domain;
};

struct ScanConfig {
  int slm_extent = 1080;      // rows (or columns) on the SLM
  int stagger = 33;           // scan step
  int samples_per_line = 40;  // camera points per scanned line
  double noise_px = 0.0;
  double outlier_fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Number of scanned lines: ceil(extent / stagger).
int scanned_lines(int extent, int stagger);

/// Correspondences for one SLM coordinate. For each scanned SLM line s (every
/// `stagger` lines), camera points with cam_to_slm(x_c, y_c) = s are found along
/// y at evenly spaced x_c; Gaussian noise perturbs the camera coordinates and
/// outliers are moved to uniform positions in the camera domain.
ScanObservation simulate_scan(const PolynomialMap2D& cam_to_slm, const ScanConfig& cfg);

struct RansacConfig {
  double threshold = 0.5;
  int max_iters = 500;
  int sample_size = 12;
  std::uint64_t seed = 0;
};

struct RansacResult {
  PolynomialMap2D map;
  std::vector<std::uint8_t> inlier;
  std::size_t inliers = 0;
  int best_iteration = -1;
  std::vector<std::size_t> candidate_inliers;  // per iteration, for auditing
};

RansacResult fit_polynomial_ransac(const ScanObservation& obs, const RansacConfig& cfg);

struct InverseMaps {
  PolynomialMap2D x;  // camera -> SLM x (or the inverse of fwd_x, fwd_y)
  PolynomialMap2D y;
  double max_composition_error = 0.0;
};

/// Samples the forward maps on a `samples x samples` grid over `domain`, refits
/// the reverse direction and reports max |inverse(forward(p)) - p| on a
/// staggered test grid. Throws when that error exceeds `max_error`.
InverseMaps invert_mapping(const PolynomialMap2D& fwd_x, const PolynomialMap2D& fwd_y, const Domain& domain,
                           int samples = 64, double max_error = 0.5);

struct GridRefinement {
  PolynomialMap2D x;
  PolynomialMap2D y;
  std::array<double, 6> affine{1, 0, 0, 0, 1, 0};  // x' = a0 x + a1 y + a2, y' = a3 x + a4 y + a5
  double residual_before = 0.0;  // max over intersections
  double residual_after = 0.0;
  bool flagged = false;          // residual_after above threshold
};

/// Grid intersections observed on camera (`observed`) for SLM points `slm`.
/// Fits an affine correction c with observed = c(current(slm)) and composes it
/// into the polynomial coefficients.
GridRefinement refine_with_grid(const PolynomialMap2D& current_x, const PolynomialMap2D& current_y,
                                std::span<const Point> slm, std::span<const Point> observed, double threshold = 0.5);

struct Homography {
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, h[8] = 1
  double condition = 1.0;

  Point apply(Point p) const;
};

struct HomographyFit {
  Homography H;
  std::vector<double> residuals;  // reprojection error per pair
  double max_residual = 0.0;
};

/// Normalized DLT. Throws on fewer than four pairs or degenerate geometry.
HomographyFit fit_homography(std::span<const Point> src, std::span<const Point> dst);

}  // namespace slmspec::geom
