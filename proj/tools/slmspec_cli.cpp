// slmspec: batch front end for simulation, reconstruction, calibration and benchmarks.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "slmspec/analysis.hpp"
#include "slmspec/error.hpp"
#include "slmspec/forward_sim.hpp"
#include "slmspec/geom_calibration.hpp"
#include "slmspec/io.hpp"
#include "slmspec/lc_optics.hpp"
#include "slmspec/material_id.hpp"
#include "slmspec/parallel.hpp"
#include "slmspec/patterns.hpp"
#include "slmspec/reconstruct.hpp"
#include "slmspec/scenes.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace slmspec;

namespace {

constexpr int kConfigVersion = 1;

std::string dashed(std::string s) {
  for (char& c : s)
    if (c == '_') c = '-';
  return s;
}

// Parameters of one subcommand. Resolution order: defaults, config file, flags.
class Params {
 public:
  explicit Params(CLI::App* app) : app_(app) {}

  void add(const std::string& key, json def, const std::string& help) {
    defaults_[key] = std::move(def);
    app_->add_option("--" + dashed(key), raw_[key], help);
  }

  json resolve(const json& file) const {
    json e = defaults_;
    for (auto it = file.begin(); it != file.end(); ++it) {
      if (!defaults_.contains(it.key())) throw UsageError("unknown config key '" + it.key() + "'");
      e[it.key()] = it.value();
    }
    for (const auto& [key, text] : raw_)
      if (app_->count("--" + dashed(key)) > 0) e[key] = convert(text, defaults_.at(key));
    return e;
  }

 private:
  static json scalar(const std::string& t) {
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used == t.size()) return v;
    } catch (const std::exception&) {
    }
    return t;
  }

  static json convert(const std::string& t, const json& def) {
    try {
      if (def.is_boolean()) {
        if (t == "true" || t == "1" || t == "on") return true;
        if (t == "false" || t == "0" || t == "off") return false;
        throw UsageError("expected a boolean, got '" + t + "'");
      }
      if (def.is_number_unsigned()) return std::stoull(t);
      if (def.is_number_integer()) return std::stoll(t);
      if (def.is_number_float()) return std::stod(t);
      if (def.is_array()) {
        json a = json::array();
        std::stringstream ss(t);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty()) a.push_back(scalar(item));
        return a;
      }
      if (def.is_null()) return scalar(t);
      return t;
    } catch (const std::invalid_argument&) {
      throw UsageError("cannot parse value '" + t + "'");
    } catch (const std::out_of_range&) {
      throw UsageError("value out of range: '" + t + "'");
    }
  }

  CLI::App* app_;
  json defaults_ = json::object();
  std::map<std::string, std::string> raw_;
};

struct Command {
  CLI::App* app;
  std::unique_ptr<Params> params;
};

template <class T>
T get(const json& c, const std::string& key) {
  try {
    return c.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

template <class T>
std::optional<T> get_opt(const json& c, const std::string& key) {
  if (!c.contains(key) || c.at(key).is_null()) return std::nullopt;
  return get<T>(c, key);
}

fs::path out_dir(const json& c) {
  const auto out = get<std::string>(c, "out");
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return out;
}

// Timings and thread counts go to run.log so data outputs stay byte-identical.
class RunLog {
 public:
  RunLog(const fs::path& dir, const std::string& command)
      : file_(dir / "run.log", std::ios::app), start_(std::chrono::steady_clock::now()) {
    const std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
    file_ << buf << " " << command << " threads=" << parallel::threads() << "\n";
  }
  void note(const std::string& what) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    file_ << "  " << what << " t=" << s << "s\n";
  }

 private:
  std::ofstream file_;
  std::chrono::steady_clock::time_point start_;
};

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

void write_effective(const fs::path& dir, const std::string& command, const json& c) {
  json e = c;
  e.erase("out");  // the location itself is not part of the run's content
  e["version"] = kConfigVersion;
  e["command"] = command;
  write_json(dir / "effective_config.json", e);
}

// ---------------------------------------------------------------------------
// Shared parameter groups

void add_grid(Params& p) {
  p.add("lambda_min", 420.0, "shortest band center (nm)");
  p.add("lambda_max", 940.0, "longest band center (nm)");
  p.add("bands", 31, "number of bands");
  p.add("sampling", "uniform-in-lambda", "uniform-in-lambda or uniform-in-wavenumber");
}

SpectralGrid grid_from(const json& c) {
  const auto mode = sampling_mode_from_string(get<std::string>(c, "sampling"));
  const double lo = get<double>(c, "lambda_min"), hi = get<double>(c, "lambda_max");
  const auto n = get<std::size_t>(c, "bands");
  return mode == SamplingMode::UniformLambda ? SpectralGrid::uniform_lambda(lo, hi, n)
                                             : SpectralGrid::uniform_wavenumber(lo, hi, n);
}

void add_scene(Params& p) {
  add_grid(p);
  p.add("cube", "", "ground-truth cube (HSI container); synthesized when empty");
  p.add("scene", "region", "synthetic scene kind: region or block");
  p.add("regions", 8, "synthetic regions (or blocks per side)");
  p.add("width", 64, "synthetic width");
  p.add("height", 64, "synthetic height");
  p.add("scene_seed", 1ULL, "synthetic scene seed");
}

HyperspectralCube scene_from(const json& c) {
  const auto path = get<std::string>(c, "cube");
  if (!path.empty()) return io::load_cube(path);
  const SpectralGrid grid = grid_from(c);
  const int w = get<int>(c, "width"), h = get<int>(c, "height"), r = get<int>(c, "regions");
  const auto seed = get<std::uint64_t>(c, "scene_seed");
  const auto kind = get<std::string>(c, "scene");
  if (kind == "region") return scenes::region_scene(w, h, grid, r, seed);
  if (kind == "block") return scenes::block_scene(w, h, grid, r, seed);
  throw UsageError("unknown scene kind '" + kind + "'");
}

void add_device(Params& p) {
  p.add("bank", "", "filter bank CSV; the reference device when empty");
  p.add("extra_retardance", 0.0, "added retardance (nm) for the reference device");
  p.add("sensor", "", "sensor response CSV; flat when empty");
}

lc::FilterBank bank_from(const json& c, const SpectralGrid& grid) {
  const auto path = get<std::string>(c, "bank");
  if (path.empty()) return lc::reference_filter_bank(grid, get<double>(c, "extra_retardance"));
  lc::FilterBank b = lc::load_filter_bank(path);
  if (b.grid.wavelengths() != grid.wavelengths()) throw DataError("filter bank grid does not match the cube");
  return b;
}

SensorResponse sensor_from(const json& c, const SpectralGrid& grid) {
  const auto path = get<std::string>(c, "sensor");
  if (path.empty()) return SensorResponse::flat(grid);
  SensorResponse s = io::read_response_csv(path);
  if (s.grid.wavelengths() != grid.wavelengths()) throw DataError("sensor response grid does not match the cube");
  s.grid = grid;
  return s;
}

void add_noise(Params& p, bool enabled) {
  p.add("noise", enabled, "enable shot and read noise");
  p.add("max_electrons", 1000.0, "electrons at the brightest reading");
  p.add("read_noise", 2.0, "read noise (electrons)");
  p.add("seed", 0ULL, "master seed");
}

sim::NoiseConfig noise_from(const json& c) {
  sim::NoiseConfig n;
  n.enabled = get<bool>(c, "noise");
  n.max_electrons = get<double>(c, "max_electrons");
  n.read_noise_electrons = get<double>(c, "read_noise");
  n.seed = get<std::uint64_t>(c, "seed");
  n.validate();
  return n;
}

void add_recon(Params& p) {
  p.add("method", "rank1", "lsq, tv or rank1");
  p.add("iterations", 200, "TV Adam iterations");
  p.add("learning_rate", 1e-2, "TV Adam learning rate");
  p.add("eta_tv", nullptr, "TV weight (default 100/sqrt(max electrons))");
  p.add("eta_spectral", 0.5, "spectral smoothness weight");
  p.add("data_term", "auto", "TV data term: auto, direct or gram");
  p.add("q", nullptr, "fixed superpixel count");
  p.add("q_base", nullptr, "superpixels at one capture (default pixels/256)");
  p.add("q_schedule", "sqrt", "superpixel growth with captures: sqrt or linear");
  p.add("ridge_eta", nullptr, "rank-1 ridge (default schedule)");
  p.add("compactness", 10.0, "SLIC compactness");
  p.add("postfilter", false, "guided-filter the rank-1 result");
  p.add("gf_radius", 8, "guided filter radius");
  p.add("gf_eps", 1e-4, "guided filter eps");
  p.add("lsq_ridge", 1e-8, "relative ridge for least squares");
}

analysis::ReconSpec recon_from(const json& c) {
  analysis::ReconSpec s;
  s.method = analysis::method_from_string(get<std::string>(c, "method"));
  s.tv.iterations = get<int>(c, "iterations");
  s.tv.learning_rate = get<double>(c, "learning_rate");
  s.tv.eta_tv = get_opt<double>(c, "eta_tv");
  s.tv.eta_spectral = get<double>(c, "eta_spectral");
  const auto dt = get<std::string>(c, "data_term");
  if (dt == "auto") s.tv.data_term = recon::TvConfig::DataTerm::Auto;
  else if (dt == "direct") s.tv.data_term = recon::TvConfig::DataTerm::Direct;
  else if (dt == "gram") s.tv.data_term = recon::TvConfig::DataTerm::Gram;
  else throw UsageError("unknown data term '" + dt + "'");
  s.tv.validate();
  if (auto q = get_opt<double>(c, "q")) s.guided.q_superpixels = static_cast<int>(*q);
  s.guided.q_base = get_opt<double>(c, "q_base");
  const auto qs = get<std::string>(c, "q_schedule");
  if (qs != "sqrt" && qs != "linear") throw UsageError("q_schedule must be sqrt or linear");
  s.guided.q_schedule = qs == "sqrt" ? recon::QSchedule::Sqrt : recon::QSchedule::Linear;
  s.guided.ridge_eta = get_opt<double>(c, "ridge_eta");
  s.guided.compactness = get<double>(c, "compactness");
  s.guided.postfilter = get<bool>(c, "postfilter");
  s.guided.guided_filter_radius = get<int>(c, "gf_radius");
  s.guided.guided_filter_eps = get<double>(c, "gf_eps");
  s.guided.validate();
  s.lsq_ridge = get<double>(c, "lsq_ridge");
  return s;
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

std::string num(double v) { return io::format_number(v); }

// ---------------------------------------------------------------------------
// simulate

void setup_simulate(Params& p) {
  add_scene(p);
  add_device(p);
  add_noise(p, true);
  p.add("patterns", "fullscan", "fullscan, suite92, selected or lc-cell");
  p.add("indices", json::array(), "LC-cell indices (comma separated)");
  p.add("count", 16, "number of greedily selected patterns");
  p.add("first", "twod_h_periodic_00", "opening pattern for greedy selection");
  p.add("pattern_seed", 7ULL, "seed for the random pattern family");
  p.add("guide", true, "also render the RGB guide");
  p.add("out", "", "output directory");
}

int run_simulate(const json& c) {
  const fs::path dir = out_dir(c);
  RunLog log(dir, "simulate");
  const HyperspectralCube cube = scene_from(c);
  const lc::FilterBank bank = bank_from(c, cube.grid());
  const SensorResponse sensor = sensor_from(c, cube.grid());
  const sim::NoiseConfig noise = noise_from(c);
  const double scale = sim::exposure_scale(cube, bank, sensor, noise.max_electrons);

  const auto which = get<std::string>(c, "patterns");
  sim::CaptureSet set;
  if (which == "fullscan") {
    set = sim::simulate_full_scan(cube, bank, sensor, noise, scale);
  } else if (which == "lc-cell") {
    std::vector<std::uint8_t> idx;
    for (const auto& v : c.at("indices")) {
      const double d = v.get<double>();
      if (!(d >= 0 && d <= 255) || d != std::floor(d)) throw UsageError("LC-cell indices must be integers in [0, 255]");
      idx.push_back(static_cast<std::uint8_t>(d));
    }
    set = sim::lc_cell_mode(cube, bank, idx, sensor, noise, scale);
  } else if (which == "suite92" || which == "selected") {
    auto suite = patterns::enumerate_92(cube.width(), cube.height(), get<std::uint64_t>(c, "pattern_seed"));
    if (which == "selected") {
      const auto sel = patterns::greedy_select(suite, get<std::size_t>(c, "count"), get<std::string>(c, "first"));
      std::vector<SlmPattern> chosen;
      for (std::size_t k : sel.positions) chosen.push_back(suite[k]);
      suite = std::move(chosen);
    }
    set = sim::simulate_patterned(cube, suite, bank, sensor, noise, scale);
  } else {
    throw UsageError("unknown pattern set '" + which + "'");
  }
  if (get<bool>(c, "guide")) set.guide = sim::simulate_guide(cube, SensorResponse::rgb_gaussian(cube.grid()));
  log.note("simulated " + std::to_string(set.size()) + " frames");
  sim::save_capture_set(set, dir);
  io::save_cube(cube, dir / "truth.hsi");
  write_effective(dir, "simulate", c);
  log.note("written");
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

void setup_reconstruct(Params& p) {
  p.add("captures", "", "capture set directory");
  add_recon(p);
  p.add("reference", "", "reference cube for metrics");
  p.add("metrics", false, "require PSNR/SAM metrics against the reference");
  p.add("out", "", "output directory");
}

int run_reconstruct(const json& c) {
  const auto captures = get<std::string>(c, "captures");
  if (captures.empty()) throw UsageError("--captures is required");
  const auto reference = get<std::string>(c, "reference");
  if (get<bool>(c, "metrics") && reference.empty()) throw UsageError("metrics requested without --reference");
  const analysis::ReconSpec spec = recon_from(c);
  const fs::path dir = out_dir(c);
  RunLog log(dir, "reconstruct");
  const sim::CaptureSet set = sim::load_capture_set(captures);
  log.note("loaded " + std::to_string(set.size()) + " frames");

  json m;
  m["method"] = analysis::to_string(spec.method);
  m["frames"] = set.size();
  HyperspectralCube cube;
  switch (spec.method) {
    case analysis::Method::Lsq:
      cube = recon::reconstruct_lsq(set, spec.lsq_ridge);
      break;
    case analysis::Method::Tv: {
      auto r = recon::reconstruct_tv(set, spec.tv);
      m["objective_trace"] = r.objective_trace;
      cube = std::move(r.cube);
      break;
    }
    case analysis::Method::Rank1: {
      if (!set.guide) throw DataError("rank-1 reconstruction needs a guide image in the capture set");
      auto r = recon::reconstruct_rank1(set, *set.guide, spec.guided);
      m["superpixels"] = r.superpixels.count;
      m["ridge_eta"] = r.eta;
      cube = std::move(r.cube);
      break;
    }
  }
  log.note("reconstructed");
  if (!reference.empty()) {
    const HyperspectralCube ref = io::load_cube(reference);
    const auto q = analysis::psnr(ref, cube);
    const auto s = analysis::sam_map(ref, cube);
    m["psnr_db"] = q.infinite ? json("inf") : json(q.db);
    m["sam_median_deg"] = s.median_deg;
    m["sam_mean_deg"] = s.mean_deg;
    m["sam_flagged_pixels"] = s.flagged;
  }
  io::save_cube(cube, dir / "cube.hsi");
  write_json(dir / "metrics.json", m);
  write_effective(dir, "reconstruct", c);
  log.note("written");
  return 0;
}

// ---------------------------------------------------------------------------
// select-patterns

void setup_select(Params& p) {
  p.add("width", 64, "frame width");
  p.add("height", 64, "frame height");
  p.add("pattern_seed", 7ULL, "seed for the random pattern family");
  p.add("count", 16, "patterns to select");
  p.add("first", "twod_h_periodic_00", "opening pattern id (empty: largest coverage)");
  p.add("save_patterns", false, "also write the selected patterns as PGM");
  p.add("out", "", "output directory");
}

json selection_json(const patterns::Selection& s) {
  return {{"ids", s.ids}, {"positions", s.positions}, {"new_pairs", s.gain}};
}

int run_select(const json& c) {
  const fs::path dir = out_dir(c);
  RunLog log(dir, "select-patterns");
  const auto suite = patterns::enumerate_92(get<int>(c, "width"), get<int>(c, "height"), get<std::uint64_t>(c, "pattern_seed"));
  const auto first = get<std::string>(c, "first");
  const auto sel = patterns::greedy_select(suite, get<std::size_t>(c, "count"),
                                           first.empty() ? std::nullopt : std::optional<std::string>(first));
  write_json(dir / "selection.json", selection_json(sel));
  if (get<bool>(c, "save_patterns"))
    for (std::size_t k : sel.positions) io::save_pattern(suite[k], dir / "patterns" / (suite[k].id + ".pgm"));
  write_effective(dir, "select-patterns", c);
  log.note("selected " + std::to_string(sel.ids.size()));
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate-gamma

void setup_gamma(Params& p) {
  add_grid(p);
  p.add("curve", "", "retardance curve CSV (volts,retardance_nm); quadratic reference when empty");
  p.add("v_min", 0.0, "lowest drive voltage");
  p.add("v_max", 4.2, "highest drive voltage");
  p.add("extra_retardance", 0.0, "added retardance (nm) in the bank");
  p.add("out", "", "output directory");
}

int run_gamma(const json& c) {
  const fs::path dir = out_dir(c);
  RunLog log(dir, "calibrate-gamma");
  const auto path = get<std::string>(c, "curve");
  const lc::RetardanceCurve curve = path.empty() ? lc::quadratic_retardance_curve() : lc::load_retardance_curve(path);
  const lc::GammaCurve g = lc::design_gamma_curve(curve, get<double>(c, "v_min"), get<double>(c, "v_max"));
  const lc::FilterBank bank = lc::build_filter_bank(g, curve, grid_from(c), get<double>(c, "extra_retardance"));
  double dev = 0.0;
  const double r0 = curve.at(g.mapping[0]);
  for (int p = 0; p < 256; ++p) dev = std::max(dev, std::abs(curve.at(g.mapping[p]) - (r0 + g.c0_nm_per_index * p)));
  lc::save_retardance_curve(curve, dir / "curve.csv");
  lc::save_gamma_curve(g, dir / "gamma.csv");
  lc::save_filter_bank(bank, dir / "bank.csv");
  write_json(dir / "gamma_report.json", {{"c0_nm_per_index", g.c0_nm_per_index},
                                         {"v_min", g.v_min},
                                         {"v_max", g.v_max},
                                         {"max_affine_deviation_nm", dev}});
  write_effective(dir, "calibrate-gamma", c);
  log.note("done");
  return 0;
}

// ---------------------------------------------------------------------------
// fit-retardance

void setup_fit(Params& p) {
  p.add("spectrum", "", "measured spectrum CSV (wavelength_nm,value)");
  p.add("search_min", 300.0, "smallest candidate (nm)");
  p.add("search_max", 3000.0, "largest candidate (nm)");
  p.add("step", 1.0, "candidate spacing (nm)");
  p.add("out", "", "output directory");
}

int run_fit(const json& c) {
  const auto path = get<std::string>(c, "spectrum");
  if (path.empty()) throw UsageError("--spectrum is required");
  const fs::path dir = out_dir(c);
  RunLog log(dir, "fit-retardance");
  std::vector<double> wl, v;
  io::read_spectrum_csv(path, wl, v);
  const SpectralGrid grid(wl);
  const lc::RetardanceSearch search{get<double>(c, "search_min"), get<double>(c, "search_max"), get<double>(c, "step")};
  const auto loss = lc::retardance_loss(grid, v, search);
  const double r = lc::fit_retardance_from_spectrum(grid, v, search);
  const auto best = static_cast<std::size_t>(std::llround((r - search.min_nm) / search.step_nm));
  write_json(dir / "retardance.json", {{"retardance_nm", r}, {"residual", loss[best]}});
  write_effective(dir, "fit-retardance", c);
  log.note("done");
  return 0;
}

// ---------------------------------------------------------------------------
// classify

void setup_classify(Params& p) {
  add_grid(p);
  p.add("library", "", "material library CSV; a synthetic three-material scene when empty");
  p.add("measurement", "", "mosaic capture (HSI container)");
  p.add("indices", json::array(), "mosaic indices; selected from the library when empty");
  p.add("k", 3, "filters to select");
  p.add("width", 64, "synthetic width");
  p.add("height", 64, "synthetic height");
  p.add("scene_seed", 1ULL, "synthetic scene seed");
  p.add("out", "", "output directory");
}

struct MaterialScene {
  HyperspectralCube cube;
  std::vector<int> truth;
  std::vector<std::vector<double>> spectra;
};

MaterialScene material_scene(int w, int h, const SpectralGrid& grid, std::uint64_t seed) {
  rng::Stream st(rng::derive(seed, 0x3a7ULL));
  MaterialScene s;
  for (int m = 0; m < 3; ++m) s.spectra.push_back(scenes::smooth_spectrum(grid, st));
  s.cube = HyperspectralCube(w, h, grid);
  s.truth.resize(static_cast<std::size_t>(w) * h);
  const std::size_t N = grid.size();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const int m = x < w / 3 ? 0 : (y < h / 2 ? 1 : 2);
      const double bright = 0.6 + 0.4 * (x + y) / double(w + h);
      s.truth[p] = m;
      for (std::size_t l = 0; l < N; ++l) s.cube.data()[p * N + l] = static_cast<float>(bright * s.spectra[static_cast<std::size_t>(m)][l]);
    }
  return s;
}

int run_classify(const json& c) {
  const fs::path dir = out_dir(c);
  RunLog log(dir, "classify");
  const auto lib_path = get<std::string>(c, "library");
  std::vector<std::uint8_t> indices;
  for (const auto& v : c.at("indices")) indices.push_back(static_cast<std::uint8_t>(v.get<double>()));
  json report;
  if (lib_path.empty()) {
    const SpectralGrid grid = grid_from(c);
    const lc::FilterBank bank = lc::reference_filter_bank(grid);
    const SensorResponse sensor = SensorResponse::flat(grid);
    const MaterialScene sc = material_scene(get<int>(c, "width"), get<int>(c, "height"), grid, get<std::uint64_t>(c, "scene_seed"));
    const auto lib = material::library_from_spectra({"a", "b", "c"}, sc.spectra, bank, sensor);
    if (indices.empty()) indices = material::select_discriminative_filters(lib, get<int>(c, "k"));
    const MeasurementImage m = material::tile_and_capture(sc.cube, bank, indices, sensor, sim::NoiseConfig::noiseless());
    const auto cls = material::demosaic_classify(m, indices, lib);
    std::size_t ok = 0;
    for (std::size_t p = 0; p < cls.labels.size(); ++p) ok += cls.labels[p] == sc.truth[p];
    report["accuracy"] = double(ok) / double(cls.labels.size());
    material::save_library(lib, dir / "library.csv");
    io::save_measurement(m, dir / "mosaic.hsi");
    material::save_label_map(cls, m.width, m.height, lib, dir / "labels.pgm");
  } else {
    const auto lib = material::load_library(lib_path);
    if (indices.empty()) indices = material::select_discriminative_filters(lib, get<int>(c, "k"));
    const auto mpath = get<std::string>(c, "measurement");
    if (!mpath.empty()) {
      const MeasurementImage m = io::load_measurement(mpath);
      const auto cls = material::demosaic_classify(m, indices, lib);
      material::save_label_map(cls, m.width, m.height, lib, dir / "labels.pgm");
    }
  }
  std::vector<int> idx(indices.begin(), indices.end());
  report["indices"] = idx;
  write_json(dir / "classify.json", report);
  write_effective(dir, "classify", c);
  log.note("done");
  return 0;
}

// ---------------------------------------------------------------------------
// geom-fit

void setup_geom(Params& p) {
  p.add("correspondences", "", "CSV x_c,y_c,target for the polynomial fit");
  p.add("homography", "", "CSV x,y,u,v point pairs for a homography fit");
  p.add("threshold", 0.5, "RANSAC inlier threshold (px)");
  p.add("iterations", 500, "RANSAC iterations");
  p.add("sample", 12, "RANSAC sample size");
  p.add("seed", 0ULL, "RANSAC seed");
  p.add("noise_px", 0.2, "synthetic scan noise (px)");
  p.add("outliers", 0.2, "synthetic outlier fraction");
  p.add("out", "", "output directory");
}

json map_json(const geom::PolynomialMap2D& m) {
  return {{"domain", {m.domain.x0, m.domain.y0, m.domain.x1, m.domain.y1}}, {"coefficients", m.coeff}};
}

int run_geom(const json& c) {
  const fs::path dir = out_dir(c);
  RunLog log(dir, "geom-fit");
  json report;
  const auto hpath = get<std::string>(c, "homography");
  if (!hpath.empty()) {
    const io::CsvTable t = io::read_csv(hpath);
    std::vector<geom::Point> a, b;
    for (const auto& r : t.rows) {
      if (r.size() < 4) throw DataError("homography CSV needs x,y,u,v columns");
      a.push_back({r[0], r[1]});
      b.push_back({r[2], r[3]});
    }
    const auto fit = geom::fit_homography(a, b);
    report["homography"] = fit.H.h;
    report["condition"] = fit.H.condition;
    report["max_reprojection_px"] = fit.max_residual;
  }
  geom::ScanObservation obs;
  const auto cpath = get<std::string>(c, "correspondences");
  if (!cpath.empty()) {
    const io::CsvTable t = io::read_csv(cpath);
    for (const auto& r : t.rows) {
      if (r.size() < 3) throw DataError("correspondence CSV needs x_c,y_c,target columns");
      obs.camera.push_back({r[0], r[1]});
      obs.target.push_back(r[2]);
    }
    if (obs.camera.empty()) throw DataError("no correspondences");
    geom::Domain d{obs.camera[0].x, obs.camera[0].y, obs.camera[0].x, obs.camera[0].y};
    for (const auto& p : obs.camera) {
      d.x0 = std::min(d.x0, p.x);
      d.y0 = std::min(d.y0, p.y);
      d.x1 = std::max(d.x1, p.x);
      d.y1 = std::max(d.y1, p.y);
    }
    obs.domain = d;
  } else if (hpath.empty()) {
    // Planted camera-to-SLM row map with a mild cubic distortion.
    geom::PolynomialMap2D truth;
    truth.domain = {0, 0, 1280, 1024};
    truth.coeff = {540, 6, 560, 1.5, -2, 3, 0.8, -0.5, 0.7, -1.2};
    geom::ScanConfig sc;
    sc.noise_px = get<double>(c, "noise_px");
    sc.outlier_fraction = get<double>(c, "outliers");
    sc.seed = get<std::uint64_t>(c, "seed");
    obs = geom::simulate_scan(truth, sc);
    report["planted"] = map_json(truth);
  }
  if (!obs.camera.empty()) {
    geom::RansacConfig rc;
    rc.threshold = get<double>(c, "threshold");
    rc.max_iters = get<int>(c, "iterations");
    rc.sample_size = get<int>(c, "sample");
    rc.seed = get<std::uint64_t>(c, "seed");
    const auto fit = geom::fit_polynomial_ransac(obs, rc);
    report["map"] = map_json(fit.map);
    report["inliers"] = fit.inliers;
    report["correspondences"] = obs.camera.size();
    std::string csv = "x_c,y_c,target,inlier\n";
    for (std::size_t i = 0; i < obs.camera.size(); ++i)
      csv += csv_line({num(obs.camera[i].x), num(obs.camera[i].y), num(obs.target[i]), fit.inlier[i] ? "1" : "0"});
    io::write_file(dir / "inliers.csv", csv);
  }
  write_json(dir / "geom.json", report);
  write_effective(dir, "geom-fit", c);
  log.note("done");
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

void setup_benchmark(Params& p) {
  p.add("kind", "patterns", "patterns, sweep, fwhm, select or material");
  add_scene(p);
  add_device(p);
  add_noise(p, false);
  add_recon(p);
  p.add("pattern_seed", 7ULL, "seed for the random pattern family");
  p.add("counts", json::array({1, 2, 4, 8, 16}), "capture counts for the sweep");
  p.add("baseline_draws", 10, "LC-cell baseline draws per count");
  p.add("first", "twod_h_periodic_00", "opening pattern for greedy selection");
  p.add("lines", json::array({532, 635, 850}), "probe lines (nm)");
  p.add("fine_step", 1.0, "probe grid spacing (nm)");
  p.add("out", "", "output directory");
}

int run_benchmark(const json& c) {
  const fs::path dir = out_dir(c);
  RunLog log(dir, "benchmark");
  const auto kind = get<std::string>(c, "kind");
  json report;
  if (kind == "fwhm") {
    const double step = get<double>(c, "fine_step");
    const double lo = get<double>(c, "lambda_min"), hi = get<double>(c, "lambda_max");
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    const lc::FilterBank bank = lc::reference_filter_bank(SpectralGrid::uniform_lambda(lo, hi, n), get<double>(c, "extra_retardance"));
    std::vector<double> lines;
    for (const auto& v : c.at("lines")) lines.push_back(v.get<double>());
    const auto res = analysis::fwhm_probe(bank, lines);
    std::string csv = "line_nm,fwhm_nm,peak_nm\n";
    json rows = json::array();
    for (const auto& r : res) {
      csv += csv_line({num(r.line_nm), num(r.fwhm_nm), num(r.peak_nm)});
      rows.push_back({{"line_nm", r.line_nm}, {"fwhm_nm", r.fwhm_nm}});
    }
    io::write_file(dir / "fwhm.csv", csv);
    report["fwhm"] = rows;
  } else if (kind == "select" || kind == "patterns" || kind == "sweep") {
    analysis::Scenario sc;
    sc.cube = scene_from(c);
    sc.bank = bank_from(c, sc.cube.grid());
    sc.sensor = sensor_from(c, sc.cube.grid());
    sc.rgb = SensorResponse::rgb_gaussian(sc.cube.grid());
    sc.noise = noise_from(c);
    const auto suite = patterns::enumerate_92(sc.cube.width(), sc.cube.height(), get<std::uint64_t>(c, "pattern_seed"));
    const analysis::ReconSpec spec = recon_from(c);
    if (kind == "select") {
      const auto sel = patterns::greedy_select(suite, 16, get<std::string>(c, "first"));
      report["selection"] = selection_json(sel);
    } else if (kind == "patterns") {
      const auto rows = analysis::pattern_benchmark(sc, suite, spec);
      std::string csv = "pattern_id,family,psnr_db,sam_median_deg\n";
      for (const auto& r : rows)
        csv += csv_line({r.pattern_id, r.family, r.psnr_infinite ? "inf" : num(r.psnr_db), num(r.sam_median_deg)});
      io::write_file(dir / "patterns.csv", csv);
      report["rows"] = rows.size();
    } else {
      analysis::SweepConfig cfg;
      cfg.counts.clear();
      for (const auto& v : c.at("counts")) cfg.counts.push_back(static_cast<std::size_t>(v.get<double>()));
      cfg.baseline_draws = get<int>(c, "baseline_draws");
      cfg.seed = get<std::uint64_t>(c, "seed");
      std::size_t need = 0;
      for (auto k : cfg.counts) need = std::max(need, k);
      const auto sel = patterns::greedy_select(suite, need, get<std::string>(c, "first"));
      std::vector<SlmPattern> chosen;
      for (std::size_t k : sel.positions) chosen.push_back(suite[k]);
      const auto rows = analysis::multiframe_sweep(sc, chosen, spec, cfg);
      std::string csv = "count,strategy,method,psnr_db,sam_median_deg\n";
      for (const auto& r : rows)
        csv += csv_line({std::to_string(r.count), r.strategy, r.method, num(r.psnr_db), num(r.sam_median_deg)});
      io::write_file(dir / "sweep.csv", csv);
      report["rows"] = rows.size();
    }
  } else if (kind == "material") {
    json cls = {{"lambda_min", c["lambda_min"]}, {"lambda_max", c["lambda_max"]}, {"bands", c["bands"]},
                {"sampling", c["sampling"]}, {"library", ""}, {"measurement", ""}, {"indices", json::array()},
                {"k", 3}, {"width", c["width"]}, {"height", c["height"]}, {"scene_seed", c["scene_seed"]},
                {"out", c["out"]}};
    run_classify(cls);
  } else {
    throw UsageError("unknown benchmark kind '" + kind + "'");
  }
  report["kind"] = kind;
  write_json(dir / "benchmark.json", report);
  write_effective(dir, "benchmark", c);
  log.note("done");
  return 0;
}

json load_config(const std::string& path, const std::string& command) {
  if (path.empty()) return json::object();
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("version")) throw UsageError("config must be an object with a 'version' field");
  if (j["version"] != kConfigVersion) throw UsageError("unsupported config version");
  // Either a section per command or flat keys for a single command.
  if (j.contains(command)) return j[command];
  j.erase("version");
  j.erase("command");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially varying LC spectral filter simulator and reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file (flags override its values)");
  app.add_option("--threads", threads, "worker threads (also SLMSPEC_THREADS)");

  using Setup = void (*)(Params&);
  using Run = int (*)(const json&);
  struct Entry {
    const char* name;
    const char* help;
    Setup setup;
    Run run;
  };
  const Entry entries[] = {
      {"simulate", "simulate a capture set", setup_simulate, run_simulate},
      {"reconstruct", "reconstruct a cube from a capture set", setup_reconstruct, run_reconstruct},
      {"benchmark", "pattern, sweep, resolution, selection and material reports", setup_benchmark, run_benchmark},
      {"calibrate-gamma", "design a linearizing gamma curve and its filter bank", setup_gamma, run_gamma},
      {"fit-retardance", "estimate retardance from a measured spectrum", setup_fit, run_fit},
      {"select-patterns", "greedy multi-shot pattern selection", setup_select, run_select},
      {"classify", "single-shot material classification", setup_classify, run_classify},
      {"geom-fit", "polynomial RANSAC and homography fitting", setup_geom, run_geom},
  };
  std::vector<Command> commands;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    commands.push_back({sub, std::make_unique<Params>(sub)});
    e.setup(*commands.back().params);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    parallel::configure_from_env();
    if (threads > 0) parallel::set_threads(threads);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!commands[i].app->parsed()) continue;
      const json file = load_config(config_path, entries[i].name);
      const json cfg = commands[i].params->resolve(file);
      return entries[i].run(cfg);
    }
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
