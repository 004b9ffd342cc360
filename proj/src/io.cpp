#include "slmspec/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "slmspec/error.hpp"

namespace slmspec::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

namespace {

void put_f32le(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_f32le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

// sample(p, b) yields pixel p of band b; bytes go out band-sequential.
void write_container(const fs::path& path, json header, std::size_t pixels, std::size_t bands,
                     const auto& sample) {
  header["dtype"] = "f32";
  header["layout"] = "band-sequential";
  header["endianness"] = "little";
  std::string bytes = header.dump();
  const std::size_t padded = (bytes.size() / 16 + 1) * 16;
  bytes.resize(padded, '\0');
  bytes.reserve(padded + pixels * bands * 4);
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t p = 0; p < pixels; ++p) put_f32le(bytes, sample(p, b));
  write_file(path, bytes);
}

struct Container {
  json header;
  std::vector<char> bytes;
  std::size_t offset = 0;
  std::size_t width = 0, height = 0, bands = 0;

  float sample(std::size_t p, std::size_t b) const {
    return get_f32le(bytes.data() + offset + (b * width * height + p) * 4);
  }
};

Container read_container(const fs::path& path) {
  Container c;
  c.bytes = read_file(path);
  const auto nul = std::find(c.bytes.begin(), c.bytes.end(), '\0');
  if (nul == c.bytes.end()) throw DataError("malformed HSI header in '" + path.string() + "': no terminator");
  const auto header_len = static_cast<std::size_t>(nul - c.bytes.begin());
  try {
    c.header = json::parse(std::string(c.bytes.data(), header_len));
    c.width = c.header.at("width").get<std::size_t>();
    c.height = c.header.at("height").get<std::size_t>();
    c.bands = c.header.at("bands").get<std::size_t>();
    if (c.header.at("dtype").get<std::string>() != "f32" ||
        c.header.at("layout").get<std::string>() != "band-sequential" ||
        c.header.at("endianness").get<std::string>() != "little")
      throw DataError("unsupported HSI encoding in '" + path.string() + "'");
  } catch (const json::exception& e) {
    throw DataError("malformed HSI header in '" + path.string() + "': " + e.what());
  }
  if (c.width == 0 || c.height == 0 || c.bands == 0)
    throw DataError("malformed HSI header in '" + path.string() + "': zero dimension");
  c.offset = (header_len / 16 + 1) * 16;
  for (std::size_t i = header_len; i < c.offset && i < c.bytes.size(); ++i)
    if (c.bytes[i] != '\0') throw DataError("malformed HSI padding in '" + path.string() + "'");
  const std::size_t expected = c.width * c.height * c.bands * 4;
  if (c.bytes.size() < c.offset || c.bytes.size() - c.offset != expected)
    throw DataError("HSI payload size mismatch in '" + path.string() + "': header declares " +
                    std::to_string(c.bands) + " bands");
  return c;
}

}  // namespace

void save_cube(const HyperspectralCube& cube, const fs::path& path) {
  json h;
  h["kind"] = "cube";
  h["width"] = cube.width();
  h["height"] = cube.height();
  h["bands"] = cube.bands();
  h["wavelengths_nm"] = cube.grid().wavelengths();
  h["sampling_mode"] = to_string(cube.grid().mode());
  const std::size_t nb = cube.bands();
  auto data = cube.data();
  write_container(path, h, cube.pixels(), nb, [&](std::size_t p, std::size_t b) { return data[p * nb + b]; });
}

HyperspectralCube load_cube(const fs::path& path) {
  Container c = read_container(path);
  std::vector<double> wl;
  SamplingMode mode = SamplingMode::UniformLambda;
  try {
    wl = c.header.at("wavelengths_nm").get<std::vector<double>>();
    if (c.header.contains("sampling_mode"))
      mode = sampling_mode_from_string(c.header["sampling_mode"].get<std::string>());
  } catch (const json::exception& e) {
    throw DataError("malformed HSI header in '" + path.string() + "': " + e.what());
  }
  if (wl.size() != c.bands)
    throw DataError("HSI header in '" + path.string() + "' lists " + std::to_string(wl.size()) +
                    " wavelengths for " + std::to_string(c.bands) + " bands");
  SpectralGrid grid(std::move(wl), mode);  // rejects non-monotone lists
  const std::size_t pixels = c.width * c.height;
  std::vector<float> data(pixels * c.bands);
  for (std::size_t b = 0; b < c.bands; ++b)
    for (std::size_t p = 0; p < pixels; ++p) data[p * c.bands + b] = c.sample(p, b);
  return HyperspectralCube(static_cast<int>(c.width), static_cast<int>(c.height), std::move(grid),
                           std::move(data));
}

void save_measurement(const MeasurementImage& m, const fs::path& path) {
  json h;
  h["kind"] = "measurement";
  h["width"] = m.width;
  h["height"] = m.height;
  h["bands"] = 1;
  h["wavelengths_nm"] = json::array();
  h["pattern_id"] = m.pattern_id;
  h["electrons_per_unit"] = m.electrons_per_unit;
  write_container(path, h, m.data.size(), 1, [&](std::size_t p, std::size_t) { return m.data[p]; });
}

MeasurementImage load_measurement(const fs::path& path) {
  Container c = read_container(path);
  if (c.bands != 1) throw DataError("measurement '" + path.string() + "' must have exactly one band");
  MeasurementImage m;
  m.width = static_cast<int>(c.width);
  m.height = static_cast<int>(c.height);
  m.pattern_id = c.header.value("pattern_id", std::string{});
  m.electrons_per_unit = c.header.value("electrons_per_unit", 1.0);
  m.data.resize(c.width * c.height);
  for (std::size_t p = 0; p < m.data.size(); ++p) m.data[p] = c.sample(p, 0);
  return m;
}

void save_guide(const GuideImage& g, const fs::path& path) {
  json h;
  h["kind"] = "guide";
  h["width"] = g.width;
  h["height"] = g.height;
  h["bands"] = g.channels;
  h["wavelengths_nm"] = json::array();
  const auto ch = static_cast<std::size_t>(g.channels);
  write_container(path, h, static_cast<std::size_t>(g.width) * g.height, ch,
                  [&](std::size_t p, std::size_t b) { return g.data[p * ch + b]; });
}

GuideImage load_guide(const fs::path& path) {
  Container c = read_container(path);
  GuideImage g;
  g.width = static_cast<int>(c.width);
  g.height = static_cast<int>(c.height);
  g.channels = static_cast<int>(c.bands);
  const std::size_t pixels = c.width * c.height;
  g.data.resize(pixels * c.bands);
  for (std::size_t b = 0; b < c.bands; ++b)
    for (std::size_t p = 0; p < pixels; ++p) g.data[p * c.bands + b] = c.sample(p, b);
  return g;
}

void save_pgm(int width, int height, std::span<const std::uint8_t> values, const fs::path& path) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw DataError("PGM payload does not match its dimensions");
  std::string bytes = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  bytes.append(reinterpret_cast<const char*>(values.data()), values.size());
  write_file(path, bytes);
}

std::vector<std::uint8_t> load_pgm(const fs::path& path, int& width, int& height) {
  const std::vector<char> bytes = read_file(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) throw DataError("malformed PGM header in '" + path.string() + "'");
    return std::stol(std::string(bytes.data() + start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw DataError("'" + path.string() + "' is not a binary PGM (P5)");
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w <= 0 || h <= 0) throw DataError("PGM dimensions must be positive");
  if (maxval != 255) throw DataError("PGM maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError("malformed PGM header in '" + path.string() + "'");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos < n) throw DataError("truncated PGM payload in '" + path.string() + "'");
  width = static_cast<int>(w);
  height = static_cast<int>(h);
  std::vector<std::uint8_t> values(n);
  std::memcpy(values.data(), bytes.data() + pos, n);
  return values;
}

void save_pattern(const SlmPattern& pattern, const fs::path& path) {
  save_pgm(pattern.width, pattern.height, pattern.values, path);
}

SlmPattern load_pattern(const fs::path& path) {
  SlmPattern p;
  p.values = load_pgm(path, p.width, p.height);
  p.id = path.stem().string();
  return p;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("CSV column '" + name + "' not found");
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw DataError("number formatting failed");
  return std::string(buf, end);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
    cells.push_back(cell.substr(b));
  }
  return cells;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError("CSV row " + std::to_string(lineno) + " in '" + path.string() + "' has " +
                      std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[i]);
      if (ec != std::errc{} || ptr != c.data() + c.size())
        throw DataError("non-numeric CSV cell '" + c + "' at row " + std::to_string(lineno));
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw DataError("CSV '" + path.string() + "' has no header");
  return t;
}

void write_csv(const CsvTable& table, const fs::path& path) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) out += (i ? "," : "") + table.header[i];
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  write_file(path, out);
}

SensorResponse read_response_csv(const fs::path& path) {
  CsvTable t = read_csv(path);
  if (t.header.size() < 2 || t.header[0] != "wavelength_nm")
    throw DataError("response CSV must start with a wavelength_nm column");
  SensorResponse r;
  r.channels = static_cast<int>(t.header.size() - 1);
  std::vector<double> wl;
  for (const auto& row : t.rows) {
    wl.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) r.response.push_back(row[c]);
  }
  r.grid = SpectralGrid(std::move(wl));
  r.validate();
  return r;
}

void write_response_csv(const SensorResponse& r, const fs::path& path) {
  CsvTable t;
  t.header.push_back("wavelength_nm");
  if (r.channels == 1) {
    t.header.push_back("value");
  } else if (r.channels == 3) {
    t.header.insert(t.header.end(), {"r", "g", "b"});
  } else {
    for (int c = 0; c < r.channels; ++c) t.header.push_back("c" + std::to_string(c));
  }
  for (std::size_t l = 0; l < r.grid.size(); ++l) {
    std::vector<double> row{r.grid[l]};
    for (int c = 0; c < r.channels; ++c) row.push_back(r.at(l, c));
    t.rows.push_back(std::move(row));
  }
  write_csv(t, path);
}

void read_spectrum_csv(const fs::path& path, std::vector<double>& wavelengths, std::vector<double>& values) {
  CsvTable t = read_csv(path);
  const std::size_t wc = t.column("wavelength_nm");
  const std::size_t vc = t.column("value");
  wavelengths.clear();
  values.clear();
  for (const auto& row : t.rows) {
    wavelengths.push_back(row[wc]);
    values.push_back(row[vc]);
  }
}

void write_spectrum_csv(std::span<const double> wavelengths, std::span<const double> values,
                        const fs::path& path) {
  if (wavelengths.size() != values.size()) throw DataError("spectrum columns differ in length");
  CsvTable t;
  t.header = {"wavelength_nm", "value"};
  for (std::size_t i = 0; i < wavelengths.size(); ++i) t.rows.push_back({wavelengths[i], values[i]});
  write_csv(t, path);
}

}  // namespace slmspec::io
