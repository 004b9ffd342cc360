#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slmspec/data_model.hpp"
#include "slmspec/forward_sim.hpp"
#include "slmspec/lc_optics.hpp"

namespace slmspec::material {

/// Expected measurement of each material under every one of the 256 filters.
struct MaterialLibrary {
  std::vector<std::string> names;
  std::vector<std::array<double, 256>> traces;

  std::size_t size() const noexcept { return names.size(); }
  void validate() const;
};

/// Traces from reflectance-like spectra: trace[r] = sum_l s(l) sensor(l) bank[r][l].
MaterialLibrary library_from_spectra(const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& spectra, const lc::FilterBank& bank,
                                     const SensorResponse& sensor);

/// values / sum(values).
std::vector<double> simplex_project(std::span<const double> values);

/// Minimum pairwise Euclidean distance between materials' projected k-vectors.
/// For k = 1 each trace is first divided by its sum over all 256 indices, since a
/// single projected value is always 1.
double separation(const MaterialLibrary& lib, std::span<const std::uint8_t> indices);

/// Exhaustive search over k-subsets (ascending index tuples) of `candidates`
/// (default 0..255) for the largest separation; the first tuple in lexicographic
/// order wins ties.
std::vector<std::uint8_t> select_discriminative_filters(const MaterialLibrary& lib, int k,
                                                        std::optional<std::vector<std::uint8_t>> candidates = {});

/// Mosaic pattern for k in {2, 3, 4}: 2x2 cells (a b / b a), (a b / c a) or (a b / c d).
SlmPattern mosaic_pattern(std::span<const std::uint8_t> indices, int width, int height);

/// Which entry of `indices` the mosaic places at (x, y).
int mosaic_phase(int k, int x, int y);

MeasurementImage tile_and_capture(const HyperspectralCube& cube, const lc::FilterBank& bank,
                                  std::span<const std::uint8_t> indices, const SensorResponse& sensor,
                                  const sim::NoiseConfig& noise);

/// Per-pixel k-vector: the pixel's own sample for its phase, otherwise the
/// 1-2-1 weighted mean of same-phase samples in the 3x3 neighborhood.
std::vector<double> demosaic(const MeasurementImage& m, int k);

struct Classification {
  std::vector<int> labels;       // library position, -1 = unknown
  std::vector<double> distance;  // to the nearest material on the simplex
  std::vector<double> metric;    // first simplex coordinate, a 1-D debug view
};

Classification demosaic_classify(const MeasurementImage& m, std::span<const std::uint8_t> indices,
                                 const MaterialLibrary& lib);

// Library CSV: `index,<name>,...`, 256 rows.
void save_library(const MaterialLibrary& lib, const std::filesystem::path& path);
MaterialLibrary load_library(const std::filesystem::path& path);

/// Label map as PGM (unknown = 255) plus `<path>.json` legend.
void save_label_map(const Classification& c, int width, int height, const MaterialLibrary& lib,
                    const std::filesystem::path& path);

}  // namespace slmspec::material
