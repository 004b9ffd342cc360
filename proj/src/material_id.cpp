#include "slmspec/material_id.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "slmspec/error.hpp"
#include "slmspec/io.hpp"
#include "slmspec/patterns.hpp"

namespace slmspec::material {

void MaterialLibrary::validate() const {
  if (names.size() < 2 || names.size() != traces.size()) throw DataError("material library needs at least two named traces");
  for (const auto& t : traces)
    for (double v : t)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("material traces must be finite and nonnegative");
}

MaterialLibrary library_from_spectra(const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& spectra, const lc::FilterBank& bank,
                                     const SensorResponse& sensor) {
  if (names.size() != spectra.size()) throw DataError("one name per material spectrum");
  const std::vector<double> eff = sim::effective_bank(bank, sensor);
  const std::size_t N = bank.bands();
  MaterialLibrary lib;
  lib.names = names;
  for (const auto& s : spectra) {
    if (s.size() != N) throw DataError("material spectrum does not match the bank grid");
    std::array<double, 256> t{};
    for (std::size_t r = 0; r < 256; ++r)
      for (std::size_t l = 0; l < N; ++l) t[r] += s[l] * eff[r * N + l];
    lib.traces.push_back(t);
  }
  lib.validate();
  return lib;
}

std::vector<double> simplex_project(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("simplex projection needs finite nonnegative values");
    sum += v;
  }
  if (sum == 0.0) throw DataError("cannot project an all-zero vector onto the simplex");
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v /= sum;
  return out;
}

namespace {

// Projected k-vector of material m; k = 1 uses the whole-trace normalization.
void projected(const MaterialLibrary& lib, std::size_t m, std::span<const std::uint8_t> idx, double* out) {
  const auto& t = lib.traces[m];
  double sum = 0.0;
  if (idx.size() == 1) {
    sum = std::accumulate(t.begin(), t.end(), 0.0);
  } else {
    for (auto i : idx) sum += t[i];
  }
  for (std::size_t j = 0; j < idx.size(); ++j) out[j] = sum > 0.0 ? t[idx[j]] / sum : 0.0;
}

}  // namespace

double separation(const MaterialLibrary& lib, std::span<const std::uint8_t> indices) {
  const std::size_t M = lib.size(), k = indices.size();
  std::vector<double> v(M * k);
  for (std::size_t m = 0; m < M; ++m) projected(lib, m, indices, v.data() + m * k);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < M; ++a)
    for (std::size_t b = a + 1; b < M; ++b) {
      double d = 0.0;
      for (std::size_t j = 0; j < k; ++j) d += (v[a * k + j] - v[b * k + j]) * (v[a * k + j] - v[b * k + j]);
      best = std::min(best, std::sqrt(d));
    }
  return best;
}

std::vector<std::uint8_t> select_discriminative_filters(const MaterialLibrary& lib, int k,
                                                        std::optional<std::vector<std::uint8_t>> candidates) {
  lib.validate();
  std::vector<std::uint8_t> cand;
  if (candidates) {
    cand = *candidates;
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  } else {
    cand.resize(256);
    std::iota(cand.begin(), cand.end(), std::uint8_t{0});
  }
  if (k < 1 || static_cast<std::size_t>(k) > cand.size()) throw DataError("k must lie in [1, number of candidates]");
  const std::size_t n = cand.size();

  // Odometer over ascending tuples whose first element is fixed; one task per first element.
  std::vector<double> best_sep(n, -1.0);
  std::vector<std::vector<std::uint8_t>> best_tuple(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(n); ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    if (f + static_cast<std::size_t>(k) > n) continue;
    std::vector<std::size_t> pos(static_cast<std::size_t>(k));
    std::iota(pos.begin(), pos.end(), f);
    std::vector<std::uint8_t> tuple(static_cast<std::size_t>(k));
    while (true) {
      for (int j = 0; j < k; ++j) tuple[static_cast<std::size_t>(j)] = cand[pos[static_cast<std::size_t>(j)]];
      const double s = separation(lib, tuple);
      if (s > best_sep[f]) {
        best_sep[f] = s;
        best_tuple[f] = tuple;
      }
      int j = k - 1;
      while (j >= 1 && pos[static_cast<std::size_t>(j)] == n - static_cast<std::size_t>(k - j)) --j;
      if (j < 1) break;
      ++pos[static_cast<std::size_t>(j)];
      for (int t = j + 1; t < k; ++t) pos[static_cast<std::size_t>(t)] = pos[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
  std::size_t win = 0;
  for (std::size_t f = 1; f < n; ++f)
    if (best_sep[f] > best_sep[win]) win = f;
  if (!(best_sep[win] > 0.0)) throw DataError("material library is degenerate: no filter subset separates the materials");
  return best_tuple[win];
}

int mosaic_phase(int k, int x, int y) {
  const int cell = (y & 1) * 2 + (x & 1);
  switch (k) {
    case 2: return cell == 0 || cell == 3 ? 0 : 1;
    case 3: return cell == 3 ? 0 : cell;
    case 4: return cell;
    default: throw DataError("mosaics support k = 2, 3 or 4");
  }
}

SlmPattern mosaic_pattern(std::span<const std::uint8_t> indices, int width, int height) {
  const int k = static_cast<int>(indices.size());
  if (k < 2 || k > 4) throw DataError("mosaics support k = 2, 3 or 4");
  if (width < 2 || height < 2) throw DataError("mosaic frame must be at least 2x2");
  SlmPattern p;
  p.width = width;
  p.height = height;
  p.id = "mosaic";
  for (auto i : indices) p.id += "_" + std::to_string(i);
  p.values.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      p.values[static_cast<std::size_t>(y) * width + x] = indices[static_cast<std::size_t>(mosaic_phase(k, x, y))];
  return p;
}

MeasurementImage tile_and_capture(const HyperspectralCube& cube, const lc::FilterBank& bank,
                                  std::span<const std::uint8_t> indices, const SensorResponse& sensor,
                                  const sim::NoiseConfig& noise) {
  const SlmPattern p = mosaic_pattern(indices, cube.width(), cube.height());
  return sim::simulate_measurement(cube, p, bank, sensor, noise);
}

std::vector<double> demosaic(const MeasurementImage& m, int k) {
  const int W = m.width, H = m.height;
  if (m.data.size() != static_cast<std::size_t>(W) * H) throw DataError("measurement payload size mismatch");
  std::vector<double> out(static_cast<std::size_t>(W) * H * static_cast<std::size_t>(k));
  static constexpr int weight[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const int own = mosaic_phase(k, x, y);
      std::vector<double> sum(static_cast<std::size_t>(k), 0.0), wsum(static_cast<std::size_t>(k), 0.0);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int u = x + dx, v = y + dy;
          if (u < 0 || v < 0 || u >= W || v >= H) continue;
          const auto ph = static_cast<std::size_t>(mosaic_phase(k, u, v));
          const int w = weight[dy + 1][dx + 1];
          sum[ph] += w * double(m.data[static_cast<std::size_t>(v) * W + u]);
          wsum[ph] += w;
        }
      for (int j = 0; j < k; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        out[p * static_cast<std::size_t>(k) + jj] = j == own ? double(m.data[p]) : (wsum[jj] > 0.0 ? sum[jj] / wsum[jj] : 0.0);
      }
    }
  return out;
}

Classification demosaic_classify(const MeasurementImage& m, std::span<const std::uint8_t> indices,
                                 const MaterialLibrary& lib) {
  lib.validate();
  const int k = static_cast<int>(indices.size());
  const std::vector<double> v = demosaic(m, k);
  const std::size_t M = lib.size(), P = static_cast<std::size_t>(m.width) * m.height, K = indices.size();
  std::vector<double> ref(M * K);
  for (std::size_t j = 0; j < M; ++j) projected(lib, j, indices, ref.data() + j * K);

  Classification c;
  c.labels.assign(P, -1);
  c.distance.assign(P, std::numeric_limits<double>::quiet_NaN());
  c.metric.assign(P, std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const double* x = v.data() + p * K;
    double sum = 0.0;
    for (std::size_t j = 0; j < K; ++j) sum += x[j];
    if (!(sum > 0.0)) continue;
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t j = 0; j < M; ++j) {
      double d = 0.0;
      for (std::size_t i = 0; i < K; ++i) d += (x[i] / sum - ref[j * K + i]) * (x[i] / sum - ref[j * K + i]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    c.labels[p] = arg;
    c.distance[p] = std::sqrt(best);
    c.metric[p] = x[0] / sum;
  }
  return c;
}

void save_library(const MaterialLibrary& lib, const std::filesystem::path& path) {
  lib.validate();
  io::CsvTable t;
  t.header.push_back("index");
  t.header.insert(t.header.end(), lib.names.begin(), lib.names.end());
  for (std::size_t r = 0; r < 256; ++r) {
    std::vector<double> row{static_cast<double>(r)};
    for (const auto& tr : lib.traces) row.push_back(tr[r]);
    t.rows.push_back(std::move(row));
  }
  io::write_csv(t, path);
}

MaterialLibrary load_library(const std::filesystem::path& path) {
  const io::CsvTable t = io::read_csv(path);
  if (t.header.empty() || t.header[0] != "index" || t.rows.size() != 256)
    throw DataError("material library CSV must have an index column and 256 rows");
  MaterialLibrary lib;
  lib.names.assign(t.header.begin() + 1, t.header.end());
  lib.traces.assign(lib.names.size(), {});
  for (std::size_t r = 0; r < 256; ++r) {
    if (t.rows[r][0] != static_cast<double>(r)) throw DataError("library rows must be indexed 0..255 in order");
    for (std::size_t m = 0; m < lib.names.size(); ++m) lib.traces[m][r] = t.rows[r][m + 1];
  }
  lib.validate();
  return lib;
}

void save_label_map(const Classification& c, int width, int height, const MaterialLibrary& lib,
                    const std::filesystem::path& path) {
  if (lib.size() > 255) throw DataError("label maps hold at most 255 materials");
  std::vector<std::uint8_t> v(c.labels.size());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = c.labels[p] < 0 ? 255 : static_cast<std::uint8_t>(c.labels[p]);
  io::save_pgm(width, height, v, path);
  nlohmann::json j;
  j["unknown"] = 255;
  j["labels"] = nlohmann::json::object();
  for (std::size_t m = 0; m < lib.size(); ++m) j["labels"][std::to_string(m)] = lib.names[m];
  std::filesystem::path legend = path;
  legend += ".json";
  io::write_file(legend, j.dump(2) + "\n");
}

}  // namespace slmspec::material
