#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slmspec/data_model.hpp"

namespace slmspec::patterns {

/// Smallest frame edge a family can be rendered into.
int tile_size(const PatternSpec& spec);

/// Renders a pattern. Families:
///   constant         level everywhere
///   oned_h[_scaleS]  (S*(x+dx) + h*floor(y/h)) mod 255, h = stripe_height
///   oned_v           the same with x and y exchanged
///   twod_*           16x16 tiles; *_h puts the fast axis along x, *_v along y;
///                    mirror variants reflect every other tile in both axes
///   random3x3        one uniform index per 3x3 block, keyed by (seed, block)
SlmPattern generate(const PatternSpec& spec, int width, int height);

/// Canonical id such as "oned_h_03" or "const_128".
std::string pattern_id(const PatternSpec& spec, int ordinal);

/// The constant pattern at every index 0..255 (the full scan).
std::vector<SlmPattern> constant_set(int width, int height);

/// Fixed 92-pattern suite: 16 oned_h, 16 oned_v, 8 scale-2, 4 scale-4, 8 of each
/// 2D variant and 16 random tilings whose seeds derive from master_seed.
std::vector<SlmPattern> enumerate_92(int width, int height, std::uint64_t master_seed);

/// Rows (oned_h) or columns (oned_v) whose forward difference crosses a stagger
/// boundary, as a per-pixel 0/1 mask. Empty mask for other families.
std::vector<std::uint8_t> stripe_boundary_mask(const SlmPattern& pattern);

struct PhaseGradientMap {
  int width = 0;
  int height = 0;
  double lambda_ref_nm = 0.0;
  double c0_nm_per_index = 0.0;
  std::vector<double> grad_x;  // index units per pixel
  std::vector<double> grad_y;

  /// 2 pi c0 / lambda, radians per index step.
  double radians_per_index() const;
  double phase_x(std::size_t i) const { return radians_per_index() * grad_x[i]; }
  double phase_y(std::size_t i) const { return radians_per_index() * grad_y[i]; }
};

/// Forward differences of p, one-sided backward on the last row/column.
PhaseGradientMap phase_gradient(const SlmPattern& pattern, double c0_nm_per_index, double lambda_ref_nm);

struct Selection {
  std::vector<std::string> ids;
  std::vector<std::size_t> positions;  // into the candidate list
  std::vector<std::uint64_t> gain;     // new (pixel, index) pairs per step
};

/// Number of distinct (pixel, index) pairs a pattern covers on its own (= pixel count).
std::uint64_t standalone_coverage(const SlmPattern& pattern);

/// Greedy coverage maximization over (pixel, filter index) pairs; ties go to the
/// earliest candidate. `first` pins the opening pattern by id.
Selection greedy_select(std::span<const SlmPattern> candidates, std::size_t count,
                        const std::optional<std::string>& first = std::nullopt);

}  // namespace slmspec::patterns
