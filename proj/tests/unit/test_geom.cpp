#include <doctest.h>

#include <cmath>

#include "slmspec/error.hpp"
#include "slmspec/geom_calibration.hpp"
#include "slmspec/rng.hpp"

using namespace slmspec;
using geom::Point;

namespace {

geom::PolynomialMap2D planted() {
  geom::PolynomialMap2D m;
  m.domain = {0, 0, 1280, 1024};
  m.coeff = {540, 6, 560, 1.5, -2, 3, 0.8, -0.5, 0.7, -1.2};
  return m;
}

// Mild smooth distortion of x and y over a 1280 x 1024 frame.
std::pair<geom::PolynomialMap2D, geom::PolynomialMap2D> mild(const geom::Domain& d) {
  auto fx = geom::PolynomialMap2D::identity_x(d), fy = geom::PolynomialMap2D::identity_y(d);
  fx.coeff[3] += 2.0;
  fx.coeff[6] += 1.5;
  fy.coeff[5] -= 1.0;
  fy.coeff[8] += 0.8;
  return {fx, fy};
}

std::vector<Point> grid_points(const geom::Domain& d, int n) {
  std::vector<Point> pts;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      pts.push_back({d.x0 + (d.x1 - d.x0) * (i + 0.5) / n, d.y0 + (d.y1 - d.y0) * (j + 0.5) / n});
  return pts;
}

}  // namespace

TEST_SUITE("geom") {
  TEST_CASE("scan line count and clean correspondences") {
    CHECK(geom::scanned_lines(1080, 33) == 33);
    CHECK(geom::scanned_lines(1089, 33) == 33);
    CHECK(geom::scanned_lines(1090, 33) == 34);
    const auto truth = planted();
    const auto obs = geom::simulate_scan(truth, {});
    REQUIRE(obs.camera.size() > 100);
    for (std::size_t i = 0; i < obs.camera.size(); ++i)
      CHECK(truth(obs.camera[i].x, obs.camera[i].y) == doctest::Approx(obs.target[i]).epsilon(1e-9).scale(1.0));
  }

  TEST_CASE("outlier fraction is honored exactly") {
    geom::ScanConfig cfg;
    cfg.outlier_fraction = 0.2;
    cfg.seed = 3;
    const auto obs = geom::simulate_scan(planted(), cfg);
    std::size_t out = 0;
    for (auto f : obs.true_inlier) out += f ? 0 : 1;
    CHECK(out == static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(obs.camera.size()))));
  }

  TEST_CASE("clean scan recovers the planted cubic") {
    const auto truth = planted();
    const auto fit = geom::fit_polynomial_ransac(geom::simulate_scan(truth, {}), {});
    double num = 0, den = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      num += std::pow(fit.map.coeff[i] - truth.coeff[i], 2);
      den += truth.coeff[i] * truth.coeff[i];
    }
    CHECK(std::sqrt(num / den) < 1e-9);
  }

  TEST_CASE("noisy scan with outliers stays within half a pixel on inliers") {
    const auto truth = planted();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      geom::ScanConfig cfg;
      cfg.noise_px = 0.2;
      cfg.outlier_fraction = 0.2;
      cfg.seed = seed;
      const auto obs = geom::simulate_scan(truth, cfg);
      geom::RansacConfig rc;
      rc.seed = seed;
      const auto fit = geom::fit_polynomial_ransac(obs, rc);
      double worst = 0.0;
      for (std::size_t i = 0; i < obs.camera.size(); ++i)
        if (obs.true_inlier[i])
          worst = std::max(worst, std::abs(fit.map(obs.camera[i].x, obs.camera[i].y) - truth(obs.camera[i].x, obs.camera[i].y)));
      CHECK(worst < 0.5);
    }
  }

  TEST_CASE("RANSAC is deterministic and keeps the largest consensus") {
    geom::ScanConfig cfg;
    cfg.noise_px = 0.3;
    cfg.outlier_fraction = 0.3;
    cfg.seed = 8;
    const auto obs = geom::simulate_scan(planted(), cfg);
    geom::RansacConfig rc;
    rc.seed = 5;
    rc.max_iters = 200;
    const auto a = geom::fit_polynomial_ransac(obs, rc), b = geom::fit_polynomial_ransac(obs, rc);
    CHECK(a.map.coeff == b.map.coeff);
    CHECK(a.inlier == b.inlier);
    for (auto c : a.candidate_inliers) CHECK(a.inliers >= c);
  }

  TEST_CASE("fewer correspondences than coefficients is an error") {
    std::vector<Point> pts;
    std::vector<double> vals;
    for (int i = 0; i < 9; ++i) {
      pts.push_back({double(i), double(i * i % 7)});
      vals.push_back(i);
    }
    CHECK_THROWS_AS(geom::fit_polynomial(pts, vals, {0, 0, 10, 10}), DataError);
  }

  TEST_CASE("identity maps invert to the identity") {
    const geom::Domain d{0, 0, 1920, 1080};
    const auto inv = geom::invert_mapping(geom::PolynomialMap2D::identity_x(d), geom::PolynomialMap2D::identity_y(d), d);
    for (const auto& p : grid_points(d, 7)) {
      CHECK(inv.x(p.x, p.y) == doctest::Approx(p.x).epsilon(1e-9));
      CHECK(inv.y(p.x, p.y) == doctest::Approx(p.y).epsilon(1e-9));
    }
  }

  TEST_CASE("mild distortion inverts to within a tenth of a pixel") {
    const geom::Domain d{0, 0, 1280, 1024};
    const auto [fx, fy] = mild(d);
    const auto inv = geom::invert_mapping(fx, fy, d);
    CHECK(inv.max_composition_error < 0.1);
    double worst = 0.0;
    for (const auto& p : grid_points(d, 23)) {
      const double u = fx(p.x, p.y), v = fy(p.x, p.y);
      worst = std::max(worst, std::hypot(inv.x(u, v) - p.x, inv.y(u, v) - p.y));
    }
    CHECK(worst < 0.1);
  }

  TEST_CASE("a folding map is reported") {
    const geom::Domain d{0, 0, 1280, 1024};
    auto fx = geom::PolynomialMap2D::identity_x(d);
    fx.coeff = {};
    fx.coeff[3] = 640.0;  // depends on u^2 only: x and -x collide
    CHECK_THROWS_AS(geom::invert_mapping(fx, geom::PolynomialMap2D::identity_y(d), d), DataError);
  }

  TEST_CASE("grid refinement: consistent grid, translation drift, cubic drift") {
    const geom::Domain d{0, 0, 1920, 1080};
    const auto [fx, fy] = mild(d);
    const auto slm = grid_points(d, 8);
    std::vector<Point> obs;
    for (const auto& p : slm) obs.push_back({fx(p.x, p.y), fy(p.x, p.y)});

    const auto same = geom::refine_with_grid(fx, fy, slm, obs);
    const std::array<double, 6> ident{1, 0, 0, 0, 1, 0};
    for (std::size_t i = 0; i < 6; ++i) CHECK(same.affine[i] == doctest::Approx(ident[i]).epsilon(1e-9).scale(1.0));
    CHECK(same.residual_after == doctest::Approx(same.residual_before).epsilon(1e-6).scale(1.0));
    CHECK_FALSE(same.flagged);

    std::vector<Point> shifted = obs;
    for (auto& p : shifted) p.x += 0.8;
    const auto tr = geom::refine_with_grid(fx, fy, slm, shifted);
    CHECK(std::abs(tr.affine[2] - 0.8) < 0.05);
    CHECK(std::abs(tr.affine[5]) < 0.05);
    CHECK(tr.residual_after < 0.05);

    std::vector<Point> bent = obs;
    for (std::size_t i = 0; i < bent.size(); ++i) {
      const auto q = d.normalize(slm[i]);
      bent[i].x += 4.0 * q.x * q.x * q.x;
      bent[i].y += 3.0 * q.x * q.y * q.y;
    }
    CHECK(geom::refine_with_grid(fx, fy, slm, bent).flagged);
  }

  TEST_CASE("homography: identity, translation, projective warp") {
    std::vector<Point> a;
    rng::Stream st(2);
    for (int i = 0; i < 100; ++i) a.push_back({st.uniform(0, 1920), st.uniform(0, 1080)});

    const auto id = geom::fit_homography(a, a);
    const std::array<double, 9> eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (std::size_t i = 0; i < 9; ++i) CHECK(id.H.h[i] == doctest::Approx(eye[i]).epsilon(1e-9).scale(1.0));

    std::vector<Point> t;
    for (const auto& p : a) t.push_back({p.x + 12.5, p.y - 3.0});
    const auto tr = geom::fit_homography(a, t);
    CHECK(tr.H.h[2] == doctest::Approx(12.5));
    CHECK(tr.H.h[5] == doctest::Approx(-3.0));
    CHECK(std::abs(tr.H.h[0] - 1.0) < 1e-9);
    CHECK(std::abs(tr.H.h[6]) < 1e-12);

    geom::Homography H;
    H.h = {0.9, 0.1, 30.0, -0.05, 1.1, -12.0, 1e-4, 5e-5, 1.0};
    std::vector<Point> w;
    for (const auto& p : a) w.push_back(H.apply(p));
    CHECK(geom::fit_homography(a, w).max_residual < 1e-8);
  }

  TEST_CASE("homography fit commutes with similarity transforms") {
    geom::Homography H;
    H.h = {1.05, -0.02, 4.0, 0.03, 0.97, 9.0, -2e-5, 3e-5, 1.0};
    std::vector<Point> a, b;
    rng::Stream st(4);
    for (int i = 0; i < 30; ++i) {
      a.push_back({st.uniform(0, 800), st.uniform(0, 600)});
      b.push_back(H.apply(a.back()));
    }
    // S: rotate by 0.3 rad, scale 2.5, shift (100, -50).
    const double c = 2.5 * std::cos(0.3), s = 2.5 * std::sin(0.3);
    auto S = [&](Point p) { return Point{c * p.x - s * p.y + 100.0, s * p.x + c * p.y - 50.0}; };
    std::vector<Point> sa, sb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sa.push_back(S(a[i]));
      sb.push_back(S(b[i]));
    }
    const auto f0 = geom::fit_homography(a, b), f1 = geom::fit_homography(sa, sb);
    for (const auto& p : a) {
      const Point lhs = f1.H.apply(S(p)), rhs = S(f0.H.apply(p));
      CHECK(lhs.x == doctest::Approx(rhs.x).epsilon(1e-9));
      CHECK(lhs.y == doctest::Approx(rhs.y).epsilon(1e-9));
    }
  }

  TEST_CASE("degenerate homography input is rejected") {
    const std::vector<Point> three{{0, 0}, {1, 0}, {0, 1}};
    CHECK_THROWS_AS(geom::fit_homography(three, three), DataError);
    const std::vector<Point> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
    CHECK_THROWS_AS(geom::fit_homography(line, line), DataError);
  }
}
