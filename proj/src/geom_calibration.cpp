#include "slmspec/geom_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "slmspec/error.hpp"
#include "slmspec/rng.hpp"

namespace slmspec::geom {

std::array<double, PolynomialMap2D::kTerms> PolynomialMap2D::basis(double u, double v) {
  return {1.0, u, v, u * u, u * v, v * v, u * u * u, u * u * v, u * v * v, v * v * v};
}

double PolynomialMap2D::operator()(double x, double y) const {
  const Point n = domain.normalize({x, y});
  const auto b = basis(n.x, n.y);
  double s = 0.0;
  for (int i = 0; i < kTerms; ++i) s += coeff[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
  return s;
}

// x = x0 + (u + 1)(x1 - x0)/2.
PolynomialMap2D PolynomialMap2D::identity_x(const Domain& d) {
  PolynomialMap2D m;
  m.domain = d;
  m.coeff[0] = 0.5 * (d.x0 + d.x1);
  m.coeff[1] = 0.5 * (d.x1 - d.x0);
  return m;
}

PolynomialMap2D PolynomialMap2D::identity_y(const Domain& d) {
  PolynomialMap2D m;
  m.domain = d;
  m.coeff[0] = 0.5 * (d.y0 + d.y1);
  m.coeff[2] = 0.5 * (d.y1 - d.y0);
  return m;
}

namespace {

bool fit_into(std::span<const Point> pts, std::span<const double> vals, std::span<const std::size_t> subset,
              const Domain& domain, PolynomialMap2D& out) {
  const auto n = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd A(n, PolynomialMap2D::kTerms);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t j = subset[static_cast<std::size_t>(i)];
    const Point u = domain.normalize(pts[j]);
    const auto row = PolynomialMap2D::basis(u.x, u.y);
    for (int c = 0; c < PolynomialMap2D::kTerms; ++c) A(i, c) = row[static_cast<std::size_t>(c)];
    b[i] = vals[j];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < PolynomialMap2D::kTerms) return false;
  const Eigen::VectorXd c = qr.solve(b);
  out.domain = domain;
  for (int i = 0; i < PolynomialMap2D::kTerms; ++i) out.coeff[static_cast<std::size_t>(i)] = c[i];
  return true;
}

Domain bounding_box(std::span<const Point> pts) {
  Domain d{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const Point& p : pts) {
    d.x0 = std::min(d.x0, p.x);
    d.x1 = std::max(d.x1, p.x);
    d.y0 = std::min(d.y0, p.y);
    d.y1 = std::max(d.y1, p.y);
  }
  if (!(d.x1 > d.x0) || !(d.y1 > d.y0)) throw DataError("points span a degenerate box");
  return d;
}

}  // namespace

PolynomialMap2D fit_polynomial(std::span<const Point> points, std::span<const double> values, const Domain& domain) {
  if (points.size() != values.size()) throw DataError("one value per point");
  if (points.size() < static_cast<std::size_t>(PolynomialMap2D::kTerms))
    throw DataError("a cubic map needs at least 10 correspondences");
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  PolynomialMap2D m;
  if (!fit_into(points, values, all, domain, m)) throw DataError("correspondences are degenerate for a cubic fit");
  return m;
}

int scanned_lines(int extent, int stagger) {
  if (stagger < 1 || extent < 1) throw DataError("scan needs positive extent and stagger");
  return (extent + stagger - 1) / stagger;
}

ScanObservation simulate_scan(const PolynomialMap2D& cam_to_slm, const ScanConfig& cfg) {
  const int lines = scanned_lines(cfg.slm_extent, cfg.stagger);
  if (cfg.samples_per_line < 1) throw DataError("scan needs samples along each line");
  if (!(cfg.noise_px >= 0.0) || !(cfg.outlier_fraction >= 0.0 && cfg.outlier_fraction <= 1.0))
    throw DataError("invalid scan noise settings");
  const Domain& d = cam_to_slm.domain;
  ScanObservation obs;
  obs.domain = d;
  for (int li = 0; li < lines; ++li) {
    const double s = static_cast<double>(li) * cfg.stagger;
    for (int k = 0; k < cfg.samples_per_line; ++k) {
      const double x = d.x0 + (k + 0.5) * (d.x1 - d.x0) / cfg.samples_per_line;
      // Bisection along y for cam_to_slm(x, y) = s.
      double lo = d.y0, hi = d.y1;
      double flo = cam_to_slm(x, lo) - s, fhi = cam_to_slm(x, hi) - s;
      if (flo * fhi > 0.0) continue;
      for (int it = 0; it < 200 && hi - lo > 1e-13 * (d.y1 - d.y0); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = cam_to_slm(x, mid) - s;
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      obs.camera.push_back({x, 0.5 * (lo + hi)});
      obs.target.push_back(s);
      obs.true_inlier.push_back(1);
    }
  }
  const std::size_t n = obs.camera.size();
  const auto outliers = static_cast<std::size_t>(std::llround(cfg.outlier_fraction * static_cast<double>(n)));
  // Outliers are a seeded random subset of exactly `outliers` correspondences.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::Stream pick(rng::derive(cfg.seed, 0x0a7ULL));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[pick.below(static_cast<std::uint32_t>(i))]);
  for (std::size_t i = 0; i < outliers; ++i) obs.true_inlier[order[i]] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream st(rng::derive(cfg.seed, 0x9015eULL, i));
    if (obs.true_inlier[i]) {
      obs.camera[i].x += cfg.noise_px * st.normal();
      obs.camera[i].y += cfg.noise_px * st.normal();
    } else {
      obs.camera[i] = {st.uniform(d.x0, d.x1), st.uniform(d.y0, d.y1)};
    }
  }
  return obs;
}

RansacResult fit_polynomial_ransac(const ScanObservation& obs, const RansacConfig& cfg) {
  const std::size_t n = obs.camera.size();
  if (obs.target.size() != n) throw DataError("scan observation lists differ in length");
  if (cfg.sample_size < PolynomialMap2D::kTerms) throw DataError("RANSAC sample must hold at least 10 points");
  if (n < static_cast<std::size_t>(cfg.sample_size)) throw DataError("fewer correspondences than the RANSAC sample size");
  if (cfg.max_iters < 1 || !(cfg.threshold > 0.0)) throw DataError("invalid RANSAC settings");

  auto count_inliers = [&](const PolynomialMap2D& m, std::vector<std::uint8_t>* flags) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in = std::abs(m(obs.camera[i].x, obs.camera[i].y) - obs.target[i]) < cfg.threshold;
      c += in;
      if (flags) (*flags)[i] = in;
    }
    return c;
  };

  RansacResult res;
  res.candidate_inliers.assign(static_cast<std::size_t>(cfg.max_iters), 0);
#pragma omp parallel for schedule(dynamic)
  for (int it = 0; it < cfg.max_iters; ++it) {
    rng::Stream st(rng::derive(cfg.seed, static_cast<std::uint64_t>(it)));
    std::vector<std::size_t> sample;
    while (sample.size() < static_cast<std::size_t>(cfg.sample_size)) {
      const std::size_t j = st.below(static_cast<std::uint32_t>(n));
      if (std::find(sample.begin(), sample.end(), j) == sample.end()) sample.push_back(j);
    }
    PolynomialMap2D m;
    if (fit_into(obs.camera, obs.target, sample, obs.domain, m))
      res.candidate_inliers[static_cast<std::size_t>(it)] = count_inliers(m, nullptr);
  }
  std::size_t best = 0;
  for (std::size_t it = 1; it < res.candidate_inliers.size(); ++it)
    if (res.candidate_inliers[it] > res.candidate_inliers[best]) best = it;
  if (res.candidate_inliers[best] < static_cast<std::size_t>(cfg.sample_size))
    throw DataError("RANSAC consensus is smaller than the minimal sample");

  // Rebuild the winning hypothesis, then refit on its consensus set.
  rng::Stream st(rng::derive(cfg.seed, static_cast<std::uint64_t>(best)));
  std::vector<std::size_t> sample;
  while (sample.size() < static_cast<std::size_t>(cfg.sample_size)) {
    const std::size_t j = st.below(static_cast<std::uint32_t>(n));
    if (std::find(sample.begin(), sample.end(), j) == sample.end()) sample.push_back(j);
  }
  PolynomialMap2D hyp;
  fit_into(obs.camera, obs.target, sample, obs.domain, hyp);
  res.inlier.assign(n, 0);
  res.inliers = count_inliers(hyp, &res.inlier);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i)
    if (res.inlier[i]) idx.push_back(i);
  if (!fit_into(obs.camera, obs.target, idx, obs.domain, res.map)) throw DataError("RANSAC consensus set is degenerate");
  res.best_iteration = static_cast<int>(best);
  return res;
}

InverseMaps invert_mapping(const PolynomialMap2D& fwd_x, const PolynomialMap2D& fwd_y, const Domain& domain,
                           int samples, double max_error) {
  if (samples < 4) throw DataError("inversion needs at least a 4x4 sample grid");
  const auto S = static_cast<std::size_t>(samples);
  std::vector<Point> image(S * S);
  std::vector<double> px(S * S), py(S * S);
  for (std::size_t j = 0; j < S; ++j)
    for (std::size_t i = 0; i < S; ++i) {
      const double x = domain.x0 + (domain.x1 - domain.x0) * static_cast<double>(i) / (samples - 1);
      const double y = domain.y0 + (domain.y1 - domain.y0) * static_cast<double>(j) / (samples - 1);
      image[j * S + i] = {fwd_x(x, y), fwd_y(x, y)};
      px[j * S + i] = x;
      py[j * S + i] = y;
    }
  const Domain range = bounding_box(image);
  InverseMaps inv;
  inv.x = fit_polynomial(image, px, range);
  inv.y = fit_polynomial(image, py, range);

  double err = 0.0;
  for (std::size_t j = 0; j + 1 < S; ++j)
    for (std::size_t i = 0; i + 1 < S; ++i) {
      const double x = domain.x0 + (domain.x1 - domain.x0) * (static_cast<double>(i) + 0.5) / (samples - 1);
      const double y = domain.y0 + (domain.y1 - domain.y0) * (static_cast<double>(j) + 0.5) / (samples - 1);
      const double fx = fwd_x(x, y), fy = fwd_y(x, y);
      err = std::max(err, std::hypot(inv.x(fx, fy) - x, inv.y(fx, fy) - y));
    }
  inv.max_composition_error = err;
  if (!(err <= max_error))
    throw DataError("forward map is not invertible on the domain (composition error " + std::to_string(err) + " px)");
  return inv;
}

GridRefinement refine_with_grid(const PolynomialMap2D& current_x, const PolynomialMap2D& current_y,
                                std::span<const Point> slm, std::span<const Point> observed, double threshold) {
  if (slm.size() != observed.size()) throw DataError("one observation per grid intersection");
  if (slm.size() < 6) throw DataError("grid refinement needs at least 6 intersections");
  if (current_x.domain.x0 != current_y.domain.x0 || current_x.domain.x1 != current_y.domain.x1 ||
      current_x.domain.y0 != current_y.domain.y0 || current_x.domain.y1 != current_y.domain.y1)
    throw DataError("both maps must share a domain");
  const auto n = static_cast<Eigen::Index>(slm.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd bx(n), by(n);
  GridRefinement r;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double cx = current_x(slm[k].x, slm[k].y), cy = current_y(slm[k].x, slm[k].y);
    A(i, 0) = cx;
    A(i, 1) = cy;
    A(i, 2) = 1.0;
    bx[i] = observed[k].x;
    by[i] = observed[k].y;
    r.residual_before = std::max(r.residual_before, std::hypot(observed[k].x - cx, observed[k].y - cy));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3) throw DataError("grid intersections are collinear");
  const Eigen::Vector3d ax = qr.solve(bx), ay = qr.solve(by);
  r.affine = {ax[0], ax[1], ax[2], ay[0], ay[1], ay[2]};
  r.x.domain = r.y.domain = current_x.domain;
  for (std::size_t c = 0; c < PolynomialMap2D::kTerms; ++c) {
    r.x.coeff[c] = ax[0] * current_x.coeff[c] + ax[1] * current_y.coeff[c];
    r.y.coeff[c] = ay[0] * current_x.coeff[c] + ay[1] * current_y.coeff[c];
  }
  r.x.coeff[0] += ax[2];
  r.y.coeff[0] += ay[2];
  for (std::size_t k = 0; k < slm.size(); ++k)
    r.residual_after = std::max(r.residual_after, std::hypot(observed[k].x - r.x(slm[k].x, slm[k].y),
                                                             observed[k].y - r.y(slm[k].x, slm[k].y)));
  r.flagged = r.residual_after > threshold;
  return r;
}

Point Homography::apply(Point p) const {
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

namespace {

// Similarity moving the centroid to 0 and the mean distance to sqrt(2).
Eigen::Matrix3d hartley(std::span<const Point> pts) {
  double cx = 0.0, cy = 0.0;
  for (const Point& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double md = 0.0;
  for (const Point& p : pts) md += std::hypot(p.x - cx, p.y - cy);
  md /= static_cast<double>(pts.size());
  if (!(md > 0.0)) throw DataError("homography points are coincident");
  const double s = std::sqrt(2.0) / md;
  Eigen::Matrix3d T;
  T << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return T;
}

bool collinear(Point a, Point b, Point c, double scale) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return std::abs(cross) <= 1e-12 * scale * scale;
}

}  // namespace

HomographyFit fit_homography(std::span<const Point> src, std::span<const Point> dst) {
  if (src.size() != dst.size()) throw DataError("one destination per source point");
  if (src.size() < 4) throw DataError("a homography needs at least four correspondences");
  const Eigen::Matrix3d Ts = hartley(src), Td = hartley(dst);
  if (src.size() == 4) {
    for (auto pts : {src, dst}) {
      const double scale = std::hypot(pts[0].x - pts[2].x, pts[0].y - pts[2].y) + 1.0;
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
          for (int c = b + 1; c < 4; ++c)
            if (collinear(pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)],
                          pts[static_cast<std::size_t>(c)], scale))
              throw DataError("three of the four correspondences are collinear");
    }
  }
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd A(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Eigen::Vector3d s = Ts * Eigen::Vector3d(src[k].x, src[k].y, 1.0);
    const Eigen::Vector3d d = Td * Eigen::Vector3d(dst[k].x, dst[k].y, 1.0);
    A.row(2 * i) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
    A.row(2 * i + 1) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y(), -d.x();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  // A unique solution needs a one-dimensional null space.
  if (sv[7] <= 1e-10 * sv[0]) throw DataError("degenerate homography configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Eigen::Matrix3d H = Td.inverse() * Hn * Ts;
  if (std::abs(H(2, 2)) < 1e-12 * H.norm()) throw DataError("homography maps the origin to infinity");
  H /= H(2, 2);

  HomographyFit fit;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) fit.H.h[static_cast<std::size_t>(3 * r + c)] = H(r, c);
  const Eigen::Vector3d hs = Eigen::JacobiSVD<Eigen::Matrix3d>(H).singularValues();
  fit.H.condition = hs[2] > 0.0 ? hs[0] / hs[2] : std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < src.size(); ++k) {
    const Point p = fit.H.apply(src[k]);
    fit.residuals.push_back(std::hypot(p.x - dst[k].x, p.y - dst[k].y));
    fit.max_residual = std::max(fit.max_residual, fit.residuals.back());
  }
  return fit;
}

}  // namespace slmspec::geom
