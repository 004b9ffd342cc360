#include "slmspec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "slmspec/error.hpp"
#include "slmspec/patterns.hpp"
#include "slmspec/rng.hpp"

namespace slmspec::analysis {

Psnr psnr(std::span<const float> reference, std::span<const float> estimate) {
  if (reference.size() != estimate.size()) throw DataError("PSNR inputs differ in size");
  if (reference.empty()) throw DataError("PSNR of an empty image");
  double peak = 0.0, se = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    peak = std::max(peak, std::abs(double(reference[i])));
    const double d = double(reference[i]) - double(estimate[i]);
    se += d * d;
  }
  if (peak == 0.0) throw DataError("PSNR reference is all zero");
  const double rmse = std::sqrt(se / static_cast<double>(reference.size()));
  if (rmse == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {20.0 * std::log10(peak / rmse), false};
}

Psnr psnr(const HyperspectralCube& reference, const HyperspectralCube& estimate) {
  if (reference.width() != estimate.width() || reference.height() != estimate.height() ||
      reference.bands() != estimate.bands())
    throw DataError("PSNR cubes differ in shape");
  return psnr(reference.data(), estimate.data());
}

double spectral_angle_deg(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DataError("spectra differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double c = std::min(1.0, std::abs(ab) / std::sqrt(aa * bb));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

SamMap sam_map(const HyperspectralCube& reference, const HyperspectralCube& estimate) {
  if (reference.width() != estimate.width() || reference.height() != estimate.height() ||
      reference.bands() != estimate.bands())
    throw DataError("SAM cubes differ in shape");
  const std::size_t P = reference.pixels();
  SamMap m;
  m.degrees.resize(P);
  m.valid.resize(P);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    m.degrees[p] = spectral_angle_deg(reference.spectrum(p), estimate.spectrum(p));
    m.valid[p] = std::isnan(m.degrees[p]) ? 0 : 1;
  }
  std::vector<double> ok;
  ok.reserve(P);
  for (std::size_t p = 0; p < P; ++p)
    if (m.valid[p]) ok.push_back(m.degrees[p]);
  m.flagged = P - ok.size();
  if (ok.empty()) {
    m.median_deg = m.mean_deg = m.max_deg = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  m.mean_deg = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
  m.max_deg = *std::max_element(ok.begin(), ok.end());
  std::sort(ok.begin(), ok.end());
  const std::size_t n = ok.size();
  m.median_deg = n % 2 ? ok[n / 2] : 0.5 * (ok[n / 2 - 1] + ok[n / 2]);
  return m;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Lsq: return "lsq";
    case Method::Tv: return "tv";
    case Method::Rank1: return "rank1";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "lsq") return Method::Lsq;
  if (s == "tv") return Method::Tv;
  if (s == "rank1") return Method::Rank1;
  throw UsageError("unknown reconstruction method '" + s + "' (expected lsq, tv or rank1)");
}

HyperspectralCube run_reconstruction(const sim::CaptureSet& captures, const GuideImage& guide, const ReconSpec& spec) {
  switch (spec.method) {
    case Method::Lsq: return recon::reconstruct_lsq(captures, spec.lsq_ridge);
    case Method::Tv: return recon::reconstruct_tv(captures, spec.tv).cube;
    case Method::Rank1: return recon::reconstruct_rank1(captures, guide, spec.guided).cube;
  }
  throw UsageError("unknown reconstruction method");
}

std::vector<PatternRow> pattern_benchmark(const Scenario& sc, std::span<const SlmPattern> patterns,
                                          const ReconSpec& spec) {
  const double scale = sim::exposure_scale(sc.cube, sc.bank, sc.sensor, sc.noise.max_electrons);
  const GuideImage guide = sim::simulate_guide(sc.cube, sc.rgb);
  std::vector<PatternRow> rows;
  rows.reserve(patterns.size());
  for (const auto& p : patterns) {
    const sim::CaptureSet set = sim::simulate_patterned(sc.cube, std::span(&p, 1), sc.bank, sc.sensor, sc.noise, scale);
    const HyperspectralCube est = run_reconstruction(set, guide, spec);
    const Psnr q = psnr(sc.cube, est);
    rows.push_back({p.id, to_string(p.spec.family), q.db, q.infinite, sam_map(sc.cube, est).median_deg});
  }
  return rows;
}

std::vector<std::uint8_t> baseline_indices(std::uint64_t seed, std::size_t count, int draw) {
  if (count < 1 || count > 256) throw DataError("baseline draw size must lie in [1, 256]");
  std::array<std::uint8_t, 256> perm;
  std::iota(perm.begin(), perm.end(), std::uint8_t{0});
  rng::Stream st(rng::derive(seed, count, static_cast<std::uint64_t>(draw)));
  for (std::uint32_t i = 255; i > 0; --i) std::swap(perm[i], perm[st.below(i + 1)]);
  return {perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(count)};
}

std::vector<SweepRow> multiframe_sweep(const Scenario& sc, std::span<const SlmPattern> selected,
                                       const ReconSpec& spec, const SweepConfig& cfg) {
  if (cfg.baseline_draws < 1) throw DataError("baseline needs at least one draw");
  const double scale = sim::exposure_scale(sc.cube, sc.bank, sc.sensor, sc.noise.max_electrons);
  const GuideImage guide = sim::simulate_guide(sc.cube, sc.rgb);
  const std::string method = to_string(spec.method);
  std::vector<SweepRow> rows;
  for (std::size_t count : cfg.counts) {
    if (count < 1 || count > selected.size()) throw DataError("sweep count exceeds the selected pattern list");
    const sim::CaptureSet set = sim::simulate_patterned(sc.cube, selected.first(count), sc.bank, sc.sensor, sc.noise, scale);
    const HyperspectralCube est = run_reconstruction(set, guide, spec);
    rows.push_back({count, "patterned", method, psnr(sc.cube, est).db, sam_map(sc.cube, est).median_deg});
    if (!cfg.include_baseline || count > 256) continue;
    double ps = 0.0, sa = 0.0;
    for (int d = 0; d < cfg.baseline_draws; ++d) {
      const auto idx = baseline_indices(cfg.seed, count, d);
      const sim::CaptureSet lc = sim::lc_cell_mode(sc.cube, sc.bank, idx, sc.sensor, sc.noise, scale);
      const HyperspectralCube b = run_reconstruction(lc, guide, spec);
      ps += psnr(sc.cube, b).db;
      sa += sam_map(sc.cube, b).median_deg;
    }
    rows.push_back({count, "lc_cell", method, ps / cfg.baseline_draws, sa / cfg.baseline_draws});
  }
  return rows;
}

std::vector<FwhmResult> fwhm_probe(const lc::FilterBank& bank, std::span<const double> lines_nm, double ridge_rel) {
  bank.validate();
  const std::size_t N = bank.bands();
  const auto n = static_cast<Eigen::Index>(N);
  Eigen::MatrixXd A(256, n);
  for (std::size_t r = 0; r < 256; ++r)
    for (std::size_t l = 0; l < N; ++l) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(l)) = bank.row(r)[l];
  Eigen::MatrixXd G = A.transpose() * A;
  G.diagonal().array() += ridge_rel * G.trace() / static_cast<double>(N);
  const Eigen::LDLT<Eigen::MatrixXd> solver(G);
  const auto& wl = bank.grid.wavelengths();

  std::vector<FwhmResult> out;
  for (double line : lines_nm) {
    if (!(line >= wl.front() && line <= wl.back())) throw DataError("probe line lies outside the bank grid");
    // Unit line split between the two bracketing bands.
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
    const auto hi = static_cast<std::size_t>(std::upper_bound(wl.begin(), wl.end(), line) - wl.begin());
    if (hi >= N) {
      delta[n - 1] = 1.0;
    } else {
      const std::size_t lo = hi - 1;
      const double t = (line - wl[lo]) / (wl[hi] - wl[lo]);
      delta[static_cast<Eigen::Index>(lo)] = 1.0 - t;
      delta[static_cast<Eigen::Index>(hi)] = t;
    }
    const Eigen::VectorXd y = A * delta;
    const Eigen::VectorXd s = solver.solve(A.transpose() * y);

    // Peak: the largest value among bands within the local maximum containing the line.
    std::size_t pk = std::min(hi, N - 1);
    if (pk > 0 && s[static_cast<Eigen::Index>(pk - 1)] > s[static_cast<Eigen::Index>(pk)]) --pk;
    while (pk + 1 < N && s[static_cast<Eigen::Index>(pk + 1)] > s[static_cast<Eigen::Index>(pk)]) ++pk;
    while (pk > 0 && s[static_cast<Eigen::Index>(pk - 1)] > s[static_cast<Eigen::Index>(pk)]) --pk;
    const double peak = s[static_cast<Eigen::Index>(pk)];
    if (!(peak > 0.0)) throw NumericError("line reconstruction has no positive peak");
    const double half = 0.5 * peak;

    std::size_t l = pk;
    while (l > 0 && s[static_cast<Eigen::Index>(l)] >= half) --l;
    std::size_t r = pk;
    while (r + 1 < N && s[static_cast<Eigen::Index>(r)] >= half) ++r;
    if (s[static_cast<Eigen::Index>(l)] >= half || s[static_cast<Eigen::Index>(r)] >= half)
      throw NumericError("line reconstruction at " + std::to_string(line) + " nm has no half-maximum crossing");
    auto cross = [&](std::size_t a, std::size_t b) {
      const double sa = s[static_cast<Eigen::Index>(a)], sb = s[static_cast<Eigen::Index>(b)];
      return wl[a] + (half - sa) / (sb - sa) * (wl[b] - wl[a]);
    };
    out.push_back({line, cross(r - 1, r) - cross(l, l + 1), wl[pk]});
  }
  return out;
}

}  // namespace slmspec::analysis
