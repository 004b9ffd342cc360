#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "slmspec/data_model.hpp"

namespace slmspec::io {

// HSI container
// -------------
// A UTF-8 JSON header object, then NUL padding up to the next multiple of
// 16 bytes (at least one NUL), then little-endian f32 samples in
// band-sequential order (all of band 0 row-major, then band 1, ...).
// Required header keys: width, height, bands, wavelengths_nm, dtype ("f32"),
// layout ("band-sequential"), endianness ("little"). Measurements and guide
// frames use the same container with an empty wavelength list and a "kind".

void save_cube(const HyperspectralCube& cube, const std::filesystem::path& path);
HyperspectralCube load_cube(const std::filesystem::path& path);

void save_measurement(const MeasurementImage& m, const std::filesystem::path& path);
MeasurementImage load_measurement(const std::filesystem::path& path);

void save_guide(const GuideImage& g, const std::filesystem::path& path);
GuideImage load_guide(const std::filesystem::path& path);

// Binary PGM (P5), maxval 255.
void save_pgm(int width, int height, std::span<const std::uint8_t> values,
              const std::filesystem::path& path);
std::vector<std::uint8_t> load_pgm(const std::filesystem::path& path, int& width, int& height);

void save_pattern(const SlmPattern& pattern, const std::filesystem::path& path);
/// The returned pattern carries only pixels; id is the file stem and spec is default.
SlmPattern load_pattern(const std::filesystem::path& path);

// CSV tables: one header row, then numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

/// Shortest decimal that round-trips the double.
std::string format_number(double v);

/// `wavelength_nm,value` (or `wavelength_nm,c0,c1,...` for several channels).
SensorResponse read_response_csv(const std::filesystem::path& path);
void write_response_csv(const SensorResponse& r, const std::filesystem::path& path);

/// Single spectrum: returns the grid and values of the `value` column.
void read_spectrum_csv(const std::filesystem::path& path, std::vector<double>& wavelengths,
                       std::vector<double>& values);
void write_spectrum_csv(std::span<const double> wavelengths, std::span<const double> values,
                        const std::filesystem::path& path);

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace slmspec::io
