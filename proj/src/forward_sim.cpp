#include "slmspec/forward_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "slmspec/error.hpp"
#include "slmspec/io.hpp"
#include "slmspec/patterns.hpp"
#include "slmspec/rng.hpp"

namespace slmspec::sim {

using nlohmann::json;

void NoiseConfig::validate() const {
  if (!(max_electrons > 0.0) || !std::isfinite(max_electrons)) throw DataError("max_electrons must be positive");
  if (!(read_noise_electrons >= 0.0) || !std::isfinite(read_noise_electrons))
    throw DataError("read noise must be nonnegative");
}

void CaptureSet::validate() const {
  if (measurements.size() != patterns.size()) throw DataError("capture set has mismatched frame and pattern lists");
  if (measurements.empty()) throw DataError("capture set is empty");
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    const auto& m = measurements[k];
    const auto& p = patterns[k];
    if (m.width != width() || m.height != height() || p.width != width() || p.height != height())
      throw DataError("capture set frames differ in size");
    if (m.data.size() != static_cast<std::size_t>(m.width) * m.height) throw DataError("frame payload size mismatch");
  }
  bank.validate();
  if (sensor.grid != bank.grid) throw DataError("sensor response and filter bank use different grids");
  if (guide && (guide->width != width() || guide->height != height()))
    throw DataError("guide image is not registered to the capture frames");
}

std::vector<double> effective_bank(const lc::FilterBank& bank, const SensorResponse& sensor) {
  bank.validate();
  sensor.validate();
  if (sensor.grid != bank.grid) throw DataError("sensor response grid does not match the filter bank");
  if (sensor.channels != 1) throw DataError("the measurement sensor must have one channel");
  std::vector<double> out(bank.transmittance.size());
  const std::size_t n = bank.bands();
  for (std::size_t r = 0; r < 256; ++r)
    for (std::size_t l = 0; l < n; ++l) out[r * n + l] = bank.transmittance[r * n + l] * sensor.at(l);
  return out;
}

MeasurementOperator make_operator(std::span<const SlmPattern> patterns, const lc::FilterBank& bank,
                                  const SensorResponse& sensor) {
  if (patterns.empty()) throw DataError("operator needs at least one pattern");
  MeasurementOperator op;
  op.width = patterns.front().width;
  op.height = patterns.front().height;
  op.bands = bank.bands();
  op.frames = patterns.size();
  op.bank = effective_bank(bank, sensor);
  op.indices.reserve(op.frames * op.pixels());
  for (const auto& p : patterns) {
    if (p.width != op.width || p.height != op.height) throw DataError("patterns differ in size");
    op.indices.insert(op.indices.end(), p.values.begin(), p.values.end());
  }
  op.validate();
  return op;
}

std::vector<double> cube_values(const HyperspectralCube& cube) {
  auto d = cube.data();
  return {d.begin(), d.end()};
}

namespace {

void check_cube(const HyperspectralCube& cube, const lc::FilterBank& bank) {
  if (cube.grid() != bank.grid) throw DataError("cube and filter bank use different spectral grids");
  if (cube.pixels() == 0) throw DataError("cube is empty");
}

std::uint64_t id_key(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

// Noiseless projection, then scale and noise, for a batch of frames.
std::vector<MeasurementImage> render(const HyperspectralCube& cube, std::span<const SlmPattern> patterns,
                                     const lc::FilterBank& bank, const SensorResponse& sensor,
                                     const NoiseConfig& noise, double scale) {
  noise.validate();
  const MeasurementOperator op = make_operator(patterns, bank, sensor);
  if (op.width != cube.width() || op.height != cube.height()) throw DataError("pattern and cube sizes differ");
  const std::vector<double> x = cube_values(cube);
  std::vector<double> y(op.frames * op.pixels());
  kernels::forward(op, x, y);

  const std::size_t P = op.pixels();
  std::vector<MeasurementImage> out(op.frames);
  for (std::size_t k = 0; k < op.frames; ++k) {
    auto& m = out[k];
    m.width = op.width;
    m.height = op.height;
    m.pattern_id = patterns[k].id;
    m.electrons_per_unit = scale;
    m.data.resize(P);
    const std::uint64_t frame_key = rng::derive(noise.seed, id_key(patterns[k].id));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
      const auto p = static_cast<std::size_t>(pi);
      double v = scale * y[k * P + p];
      if (noise.enabled) {
        rng::Stream st(rng::derive(frame_key, p));
        const double u = st.uniform();
        const double z = st.normal();
        const double r = st.normal();
        v = sample_poisson(std::max(v, 0.0), u, z) + noise.read_noise_electrons * r;
      }
      m.data[p] = static_cast<float>(std::max(v, 0.0));
    }
  }
  return out;
}

}  // namespace

double sample_poisson(double mean, double u, double z) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw NumericError("Poisson mean must be finite and nonnegative");
  if (mean == 0.0) return 0.0;
  if (mean >= 30.0) return std::max(0.0, std::round(mean + std::sqrt(mean) * z));
  double prob = std::exp(-mean);
  double cdf = prob;
  int k = 0;
  while (u > cdf && k < 200) {
    ++k;
    prob *= mean / k;
    cdf += prob;
  }
  return k;
}

double exposure_scale(const HyperspectralCube& cube, const lc::FilterBank& bank, const SensorResponse& sensor,
                      double max_electrons) {
  check_cube(cube, bank);
  if (!(max_electrons > 0.0)) throw DataError("max_electrons must be positive");
  const std::vector<double> eff = effective_bank(bank, sensor);
  const std::size_t N = bank.bands();
  const std::size_t P = cube.pixels();
  std::vector<double> best(P, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto h = cube.spectrum(static_cast<std::size_t>(pi));
    double m = 0.0;
    for (std::size_t r = 0; r < 256; ++r) {
      double s = 0.0;
      for (std::size_t l = 0; l < N; ++l) s += double(h[l]) * eff[r * N + l];
      m = std::max(m, s);
    }
    best[static_cast<std::size_t>(pi)] = m;
  }
  const double peak = *std::max_element(best.begin(), best.end());
  return peak > 0.0 ? max_electrons / peak : 1.0;
}

MeasurementImage simulate_measurement(const HyperspectralCube& cube, const SlmPattern& pattern,
                                      const lc::FilterBank& bank, const SensorResponse& sensor,
                                      const NoiseConfig& noise, std::optional<double> electrons_per_unit) {
  check_cube(cube, bank);
  const double scale = electrons_per_unit ? *electrons_per_unit : exposure_scale(cube, bank, sensor, noise.max_electrons);
  return render(cube, std::span(&pattern, 1), bank, sensor, noise, scale).front();
}

CaptureSet simulate_patterned(const HyperspectralCube& cube, std::span<const SlmPattern> patterns,
                              const lc::FilterBank& bank, const SensorResponse& sensor, const NoiseConfig& noise,
                              std::optional<double> electrons_per_unit) {
  check_cube(cube, bank);
  CaptureSet set;
  set.bank = bank;
  set.sensor = sensor;
  set.noise = noise;
  set.electrons_per_unit = electrons_per_unit ? *electrons_per_unit : exposure_scale(cube, bank, sensor, noise.max_electrons);
  set.patterns.assign(patterns.begin(), patterns.end());
  set.measurements = render(cube, patterns, bank, sensor, noise, set.electrons_per_unit);
  return set;
}

CaptureSet simulate_full_scan(const HyperspectralCube& cube, const lc::FilterBank& bank,
                              const SensorResponse& sensor, const NoiseConfig& noise,
                              std::optional<double> electrons_per_unit) {
  const auto constants = patterns::constant_set(cube.width(), cube.height());
  return simulate_patterned(cube, constants, bank, sensor, noise, electrons_per_unit);
}

MeasurementImage simulate_patterned_from_fullscan(const CaptureSet& full, const SlmPattern& pattern) {
  if (full.size() != 256) throw DataError("full scan must hold 256 frames");
  for (std::size_t r = 0; r < 256; ++r) {
    const auto& p = full.patterns[r];
    if (std::any_of(p.values.begin(), p.values.end(), [r](std::uint8_t v) { return v != r; }))
      throw DataError("full scan frame " + std::to_string(r) + " is not the constant pattern " + std::to_string(r));
  }
  if (pattern.width != full.width() || pattern.height != full.height())
    throw DataError("pattern size does not match the full scan");
  MeasurementImage m;
  m.width = pattern.width;
  m.height = pattern.height;
  m.pattern_id = pattern.id;
  m.electrons_per_unit = full.electrons_per_unit;
  m.data.resize(pattern.values.size());
  for (std::size_t p = 0; p < m.data.size(); ++p) m.data[p] = full.measurements[pattern.values[p]].data[p];
  return m;
}

GuideImage simulate_guide(const HyperspectralCube& cube, const SensorResponse& rgb_response) {
  rgb_response.validate();
  if (rgb_response.grid != cube.grid()) throw DataError("guide response grid does not match the cube");
  if (rgb_response.channels != 3) throw DataError("guide response must have three channels");
  GuideImage g;
  g.width = cube.width();
  g.height = cube.height();
  g.channels = 3;
  g.data.resize(cube.pixels() * 3);
  const std::size_t N = cube.bands();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(cube.pixels()); ++pi) {
    const auto h = cube.spectrum(static_cast<std::size_t>(pi));
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t l = 0; l < N; ++l) s += double(h[l]) * rgb_response.at(l, c);
      g.data[static_cast<std::size_t>(pi) * 3 + c] = static_cast<float>(s);
    }
  }
  return g;
}

CaptureSet lc_cell_mode(const HyperspectralCube& cube, const lc::FilterBank& bank,
                        std::span<const std::uint8_t> indices, const SensorResponse& sensor,
                        const NoiseConfig& noise, std::optional<double> electrons_per_unit) {
  if (indices.empty()) throw DataError("LC-cell mode needs at least one index");
  std::vector<SlmPattern> pats;
  pats.reserve(indices.size());
  for (std::uint8_t r : indices) {
    PatternSpec s;
    s.level = r;
    pats.push_back(patterns::generate(s, cube.width(), cube.height()));
  }
  return simulate_patterned(cube, pats, bank, sensor, noise, electrons_per_unit);
}

// ---------------------------------------------------------------------------
// Directory persistence

namespace {

json spec_to_json(const PatternSpec& s) {
  json j;
  j["family"] = to_string(s.family);
  j["level"] = s.level;
  j["shift"] = {s.shift_x, s.shift_y};
  j["seed"] = s.seed;
  j["stripe_height"] = s.stripe_height;
  j["layout"] = s.layout == TileLayout::Raster256 ? "raster256" : "max240";
  return j;
}

PatternSpec spec_from_json(const json& j) {
  PatternSpec s;
  s.family = pattern_family_from_string(j.at("family").get<std::string>());
  s.level = j.value("level", 0);
  if (j.contains("shift")) {
    s.shift_x = j["shift"].at(0).get<int>();
    s.shift_y = j["shift"].at(1).get<int>();
  }
  s.seed = j.value("seed", std::uint64_t{0});
  s.stripe_height = j.value("stripe_height", 3);
  const std::string layout = j.value("layout", std::string("raster256"));
  if (layout != "raster256" && layout != "max240") throw DataError("unknown tile layout '" + layout + "'");
  s.layout = layout == "max240" ? TileLayout::Max240 : TileLayout::Raster256;
  return s;
}

std::string frame_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03zu.hsi", k);
  return buf;
}

}  // namespace

void save_capture_set(const CaptureSet& set, const std::filesystem::path& dir) {
  set.validate();
  std::filesystem::create_directories(dir / "patterns");
  json frames = json::array();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto& p = set.patterns[k];
    const std::string pgm = "patterns/" + p.id + ".pgm";
    io::save_measurement(set.measurements[k], dir / frame_name(k));
    io::save_pattern(p, dir / pgm);
    frames.push_back({{"file", frame_name(k)}, {"pattern_id", p.id}, {"pattern_file", pgm}, {"spec", spec_to_json(p.spec)}});
  }
  lc::save_filter_bank(set.bank, dir / "bank.csv");
  io::write_response_csv(set.sensor, dir / "sensor.csv");
  json j;
  j["version"] = 1;
  j["width"] = set.width();
  j["height"] = set.height();
  j["electrons_per_unit"] = set.electrons_per_unit;
  j["noise"] = {{"max_electrons", set.noise.max_electrons},
                {"read_noise_electrons", set.noise.read_noise_electrons},
                {"seed", set.noise.seed},
                {"enabled", set.noise.enabled}};
  j["bank"] = "bank.csv";
  j["sensor"] = "sensor.csv";
  j["frames"] = frames;
  if (set.guide) {
    io::save_guide(*set.guide, dir / "guide.hsi");
    j["guide"] = "guide.hsi";
  }
  io::write_file(dir / "manifest.json", j.dump(2) + "\n");
}

CaptureSet load_capture_set(const std::filesystem::path& dir) {
  const auto bytes = io::read_file(dir / "manifest.json");
  CaptureSet set;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    set.electrons_per_unit = j.at("electrons_per_unit").get<double>();
    const auto& n = j.at("noise");
    set.noise.max_electrons = n.at("max_electrons").get<double>();
    set.noise.read_noise_electrons = n.at("read_noise_electrons").get<double>();
    set.noise.seed = n.at("seed").get<std::uint64_t>();
    set.noise.enabled = n.at("enabled").get<bool>();
    set.bank = lc::load_filter_bank(dir / j.at("bank").get<std::string>());
    set.sensor = io::read_response_csv(dir / j.at("sensor").get<std::string>());
    if (set.sensor.grid.wavelengths() == set.bank.grid.wavelengths()) set.sensor.grid = set.bank.grid;
    for (const auto& f : j.at("frames")) {
      set.measurements.push_back(io::load_measurement(dir / f.at("file").get<std::string>()));
      SlmPattern p = io::load_pattern(dir / f.at("pattern_file").get<std::string>());
      p.id = f.at("pattern_id").get<std::string>();
      p.spec = spec_from_json(f.at("spec"));
      set.patterns.push_back(std::move(p));
    }
    if (j.contains("guide")) set.guide = io::load_guide(dir / j["guide"].get<std::string>());
  } catch (const json::exception& e) {
    throw DataError("malformed capture manifest in '" + dir.string() + "': " + e.what());
  }
  set.validate();
  return set;
}

}  // namespace slmspec::sim
