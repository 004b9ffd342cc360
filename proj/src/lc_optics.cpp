#include "slmspec/lc_optics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "slmspec/error.hpp"
#include "slmspec/io.hpp"

namespace slmspec::lc {

namespace {

void check_inputs(double retardance_nm, double lambda_nm) {
  if (!std::isfinite(retardance_nm) || !std::isfinite(lambda_nm))
    throw DataError("transmittance inputs must be finite");
  if (lambda_nm <= 0.0) throw DataError("wavelength must be positive");
  if (retardance_nm < 0.0) throw DataError("retardance must be nonnegative");
}

}  // namespace

double lc_transmittance(double retardance_nm, double lambda_nm) {
  check_inputs(retardance_nm, lambda_nm);
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * retardance_nm / lambda_nm));
}

double jones_transmittance(double retardance_nm, double lambda_nm) {
  check_inputs(retardance_nm, lambda_nm);
  using cd = std::complex<double>;
  const double phase = 2.0 * std::numbers::pi * retardance_nm / lambda_nm;
  const double h = 1.0 / std::numbers::sqrt2;

  // Light leaving the +45 deg polarizer, unit intensity.
  const cd ex = h, ey = h;
  // Retarder: the slow axis picks up exp(j*phase) relative to the fast axis.
  const cd rx = ex;
  const cd ry = ey * std::polar(1.0, phase);
  // Analyzer at -45 deg: projector onto (1, -1)/sqrt(2).
  const cd amp = (rx - ry) * h;
  const cd ox = amp * h;
  const cd oy = -amp * h;
  return std::norm(ox) + std::norm(oy);
}

void RetardanceCurve::validate() const {
  if (control.size() < 2 || control.size() != retardance_nm.size())
    throw DataError("retardance curve needs at least two matching samples");
  for (std::size_t i = 0; i < control.size(); ++i) {
    if (!std::isfinite(control[i]) || !std::isfinite(retardance_nm[i]) || retardance_nm[i] <= 0.0)
      throw DataError("retardance curve values must be finite and positive");
    if (i > 0 && control[i] <= control[i - 1]) throw DataError("retardance curve control values must increase");
  }
}

double RetardanceCurve::at(double control_value) const {
  return interp_linear(control, retardance_nm, control_value);
}

void FilterBank::validate() const {
  if (transmittance.size() != 256 * bands()) throw DataError("filter bank must have 256 rows");
  for (double v : transmittance)
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("filter bank entries must lie in [0, 1]");
}

std::vector<double> retardance_loss(const SpectralGrid& grid, std::span<const double> measured,
                                    const RetardanceSearch& search) {
  if (measured.size() != grid.size()) throw DataError("spectrum length does not match its grid");
  if (!(search.step_nm > 0.0) || !(search.max_nm >= search.min_nm) || search.min_nm < 0.0)
    throw DataError("empty retardance search grid");
  double ysum = 0.0;
  bool any = false;
  for (double v : measured) {
    if (!std::isfinite(v) || v < 0.0) throw DataError("measured spectrum must be finite and nonnegative");
    any = any || v > 0.0;
    ysum += v;
  }
  if (!any) throw DataError("measured spectrum is all zero");

  const std::size_t n = measured.size();
  const double ymean = ysum / static_cast<double>(n);
  double syy = 0.0;
  for (double v : measured) syy += (v - ymean) * (v - ymean);

  const auto count = static_cast<std::size_t>(std::floor((search.max_nm - search.min_nm) / search.step_nm + 1e-9)) + 1;
  std::vector<double> loss(count);
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = 2.0 * std::numbers::pi / grid[j];

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(count); ++ci) {
    const double r = search.min_nm + search.step_nm * static_cast<double>(ci);
    double msum = 0.0;
    std::vector<double> m(n);
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = 0.5 * (1.0 - std::cos(sigma[j] * r));
      msum += m[j];
    }
    const double mmean = msum / static_cast<double>(n);
    double smm = 0.0, smy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dm = m[j] - mmean;
      smm += dm * dm;
      smy += dm * (measured[j] - ymean);
    }
    // Best affine fit with a nonnegative scale.
    double ssr = syy;
    if (smm > 0.0 && smy > 0.0) ssr = syy - smy * smy / smm;
    loss[static_cast<std::size_t>(ci)] = std::max(ssr, 0.0);
  }
  return loss;
}

double fit_retardance_from_spectrum(const SpectralGrid& grid, std::span<const double> measured,
                                    const RetardanceSearch& search) {
  const std::vector<double> loss = retardance_loss(grid, measured, search);
  std::size_t best = 0;
  for (std::size_t i = 1; i < loss.size(); ++i)
    if (loss[i] < loss[best]) best = i;
  return search.min_nm + search.step_nm * static_cast<double>(best);
}

namespace {

// Symmetric moving average whose window shrinks at the ends so affine data passes unchanged.
std::vector<double> smooth5(const std::vector<double>& v) {
  const auto n = static_cast<std::ptrdiff_t>(v.size());
  std::vector<double> out(v.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t half = std::min<std::ptrdiff_t>({2, i, n - 1 - i});
    double s = 0.0;
    for (std::ptrdiff_t j = i - half; j <= i + half; ++j) s += v[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(2 * half + 1);
  }
  return out;
}

// Samples of the curve restricted to [v_min, v_max], endpoints included.
void restrict_curve(const std::vector<double>& control, const std::vector<double>& ret, double v_min,
                    double v_max, std::vector<double>& cv, std::vector<double>& rv) {
  cv.clear();
  rv.clear();
  cv.push_back(v_min);
  rv.push_back(interp_linear(control, ret, v_min));
  for (std::size_t i = 0; i < control.size(); ++i)
    if (control[i] > v_min && control[i] < v_max) {
      cv.push_back(control[i]);
      rv.push_back(ret[i]);
    }
  cv.push_back(v_max);
  rv.push_back(interp_linear(control, ret, v_max));
}

bool strictly_monotone(const std::vector<double>& r) {
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < r.size(); ++i) {
    inc = inc && r[i] > r[i - 1];
    dec = dec && r[i] < r[i - 1];
  }
  return inc || dec;
}

}  // namespace

GammaCurve linear_gamma(double v_min, double v_max) {
  GammaCurve g;
  g.v_min = v_min;
  g.v_max = v_max;
  for (int p = 0; p < 256; ++p) g.mapping[p] = v_min + (v_max - v_min) * p / 255.0;
  g.mapping[255] = v_max;
  return g;
}

GammaCurve design_gamma_curve(const RetardanceCurve& curve, double v_min, double v_max) {
  curve.validate();
  if (!(v_max > v_min)) throw DataError("gamma design needs v_max > v_min");
  if (v_min < curve.control.front() || v_max > curve.control.back())
    throw DataError("retardance curve does not cover the requested voltage range");

  std::vector<double> cv, rv;
  restrict_curve(curve.control, curve.retardance_nm, v_min, v_max, cv, rv);
  if (!strictly_monotone(rv)) {
    restrict_curve(curve.control, smooth5(curve.retardance_nm), v_min, v_max, cv, rv);
    if (!strictly_monotone(rv))
      throw DataError("retardance is not monotone over the requested voltage range after smoothing");
  }

  GammaCurve g;
  g.v_min = v_min;
  g.v_max = v_max;
  const double r0 = rv.front();
  const double r1 = rv.back();
  g.c0_nm_per_index = (r1 - r0) / 255.0;
  const bool decreasing = r1 < r0;
  std::size_t seg = 0;
  for (int p = 0; p < 256; ++p) {
    const double target = r0 + (r1 - r0) * p / 255.0;
    // Targets advance monotonically, so the bracketing segment only moves forward.
    while (seg + 2 < rv.size() && (decreasing ? rv[seg + 1] > target : rv[seg + 1] < target)) ++seg;
    const double t = (target - rv[seg]) / (rv[seg + 1] - rv[seg]);
    g.mapping[p] = cv[seg] + std::clamp(t, 0.0, 1.0) * (cv[seg + 1] - cv[seg]);
  }
  g.mapping[0] = v_min;
  g.mapping[255] = v_max;
  return g;
}

FilterBank build_filter_bank(const GammaCurve& gamma, const RetardanceCurve& curve, const SpectralGrid& grid,
                             double extra_retardance_nm) {
  curve.validate();
  if (grid.empty()) throw DataError("filter bank needs a spectral grid");
  if (!std::isfinite(extra_retardance_nm) || extra_retardance_nm < 0.0)
    throw DataError("extra retardance must be finite and nonnegative");
  FilterBank bank;
  bank.grid = grid;
  bank.extra_retardance_nm = extra_retardance_nm;
  bank.retardance_nm.resize(256);
  bank.transmittance.resize(256 * grid.size());
  for (std::size_t r = 0; r < 256; ++r) bank.retardance_nm[r] = curve.at(gamma.mapping[r]) + extra_retardance_nm;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < 256; ++r)
    for (std::size_t l = 0; l < grid.size(); ++l)
      bank.transmittance[static_cast<std::size_t>(r) * grid.size() + l] =
          lc_transmittance(bank.retardance_nm[static_cast<std::size_t>(r)], grid[l]);
  return bank;
}

RetardanceCurve quadratic_retardance_curve(double r_at_vmin, double r_at_vmax, double v_max, std::size_t samples) {
  if (samples < 2) throw DataError("curve needs at least two samples");
  RetardanceCurve c;
  c.kind = ControlKind::Volts;
  for (std::size_t i = 0; i < samples; ++i) {
    const double v = v_max * static_cast<double>(i) / static_cast<double>(samples - 1);
    const double t = v / v_max;
    c.control.push_back(v);
    c.retardance_nm.push_back(r_at_vmin + (r_at_vmax - r_at_vmin) * t * t);
  }
  c.control.back() = v_max;
  return c;
}

FilterBank reference_filter_bank(const SpectralGrid& grid, double extra_retardance_nm) {
  const RetardanceCurve curve = quadratic_retardance_curve();
  const GammaCurve gamma = design_gamma_curve(curve, 0.0, 4.2);
  return build_filter_bank(gamma, curve, grid, extra_retardance_nm);
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p) {
  std::filesystem::path s = p;
  s += ".json";
  return s;
}

}  // namespace

void save_filter_bank(const FilterBank& bank, const std::filesystem::path& csv_path) {
  bank.validate();
  io::CsvTable t;
  t.header.push_back("index");
  for (std::size_t l = 0; l < bank.bands(); ++l) t.header.push_back("band" + std::to_string(l));
  for (std::size_t r = 0; r < 256; ++r) {
    std::vector<double> row{static_cast<double>(r)};
    auto f = bank.row(r);
    row.insert(row.end(), f.begin(), f.end());
    t.rows.push_back(std::move(row));
  }
  io::write_csv(t, csv_path);
  nlohmann::json j;
  j["wavelengths_nm"] = bank.grid.wavelengths();
  j["sampling_mode"] = to_string(bank.grid.mode());
  j["extra_retardance_nm"] = bank.extra_retardance_nm;
  j["retardance_nm"] = bank.retardance_nm;
  io::write_file(sidecar(csv_path), j.dump(2) + "\n");
}

FilterBank load_filter_bank(const std::filesystem::path& csv_path) {
  io::CsvTable t = io::read_csv(csv_path);
  FilterBank bank;
  try {
    const auto bytes = io::read_file(sidecar(csv_path));
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    bank.grid = SpectralGrid(j.at("wavelengths_nm").get<std::vector<double>>(),
                             sampling_mode_from_string(j.value("sampling_mode", std::string("uniform-in-lambda"))));
    bank.extra_retardance_nm = j.value("extra_retardance_nm", 0.0);
    if (j.contains("retardance_nm")) bank.retardance_nm = j["retardance_nm"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed filter bank sidecar for '" + csv_path.string() + "': " + e.what());
  }
  if (t.rows.size() != 256 || t.header.size() != bank.bands() + 1)
    throw DataError("filter bank CSV must have 256 rows and one column per band");
  bank.transmittance.resize(256 * bank.bands());
  for (std::size_t r = 0; r < 256; ++r) {
    if (t.rows[r][0] != static_cast<double>(r)) throw DataError("filter bank rows must be indexed 0..255 in order");
    std::copy(t.rows[r].begin() + 1, t.rows[r].end(), bank.transmittance.begin() + static_cast<std::ptrdiff_t>(r * bank.bands()));
  }
  bank.validate();
  return bank;
}

void save_retardance_curve(const RetardanceCurve& curve, const std::filesystem::path& path) {
  curve.validate();
  io::CsvTable t;
  t.header = {curve.kind == ControlKind::Volts ? "volts" : "index", "retardance_nm"};
  for (std::size_t i = 0; i < curve.control.size(); ++i) t.rows.push_back({curve.control[i], curve.retardance_nm[i]});
  io::write_csv(t, path);
}

RetardanceCurve load_retardance_curve(const std::filesystem::path& path) {
  io::CsvTable t = io::read_csv(path);
  if (t.header.size() != 2 || t.header[1] != "retardance_nm" || (t.header[0] != "volts" && t.header[0] != "index"))
    throw DataError("retardance curve CSV must have columns volts|index,retardance_nm");
  RetardanceCurve c;
  c.kind = t.header[0] == "volts" ? ControlKind::Volts : ControlKind::Index;
  for (const auto& row : t.rows) {
    c.control.push_back(row[0]);
    c.retardance_nm.push_back(row[1]);
  }
  c.validate();
  return c;
}

void save_gamma_curve(const GammaCurve& gamma, const std::filesystem::path& path) {
  io::CsvTable t;
  t.header = {"index", "volts"};
  for (int p = 0; p < 256; ++p) t.rows.push_back({static_cast<double>(p), gamma.mapping[p]});
  io::write_csv(t, path);
  nlohmann::json j;
  j["v_min"] = gamma.v_min;
  j["v_max"] = gamma.v_max;
  j["c0_nm_per_index"] = gamma.c0_nm_per_index;
  io::write_file(sidecar(path), j.dump(2) + "\n");
}

GammaCurve load_gamma_curve(const std::filesystem::path& path) {
  io::CsvTable t = io::read_csv(path);
  if (t.rows.size() != 256 || t.header.size() != 2) throw DataError("gamma CSV must have 256 index,volts rows");
  GammaCurve g;
  for (std::size_t p = 0; p < 256; ++p) g.mapping[p] = t.rows[p][1];
  g.v_min = g.mapping[0];
  g.v_max = g.mapping[255];
  if (std::filesystem::exists(sidecar(path))) {
    const auto bytes = io::read_file(sidecar(path));
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (!j.is_discarded()) g.c0_nm_per_index = j.value("c0_nm_per_index", 0.0);
  }
  return g;
}

}  // namespace slmspec::lc
