#pragma once

#include <cstdint>
#include <vector>

#include "slmspec/data_model.hpp"
#include "slmspec/rng.hpp"

namespace slmspec::scenes {

/// Baseline plus one to three Gaussian bumps with standard deviations of
/// 80-250 nm, peak-normalized to 1. Smooth enough to be recoverable from the
/// LC filter bank, whose small singular directions carry no usable signal.
std::vector<double> smooth_spectrum(const SpectralGrid& grid, rng::Stream& stream);

/// Regions (nearest of `regions` random sites) each with its own smooth
/// spectrum, modulated by a smooth positive shading field in [0.5, 1].
HyperspectralCube region_scene(int width, int height, const SpectralGrid& grid, int regions, std::uint64_t seed);

/// Piecewise-constant scene over a `blocks x blocks` grid of rectangles.
HyperspectralCube block_scene(int width, int height, const SpectralGrid& grid, int blocks, std::uint64_t seed);

/// The regression scene set used by sweeps and acceptance checks.
std::vector<HyperspectralCube> committed_scenes(int width, int height, const SpectralGrid& grid, std::uint64_t seed);

/// A scene that is exactly rank one per label: H(p) = g(p) s_label(p), with
/// g in [0.25, 1]. The guide carries g in all three channels.
struct Rank1Scene {
  HyperspectralCube cube;
  GuideImage guide;
  std::vector<double> spectra;  // labels x bands
};
Rank1Scene rank1_scene(int width, int height, const SpectralGrid& grid, const std::vector<int>& labels, int count,
                       std::uint64_t seed);

}  // namespace slmspec::scenes
