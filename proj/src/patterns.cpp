#include "slmspec/patterns.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "slmspec/error.hpp"
#include "slmspec/rng.hpp"

namespace slmspec::patterns {

namespace {

int mod(int a, int m) { return ((a % m) + m) % m; }

int oned_scale(PatternFamily f) {
  switch (f) {
    case PatternFamily::OnedHScale2: return 2;
    case PatternFamily::OnedHScale4: return 4;
    default: return 1;
  }
}

bool is_oned(PatternFamily f) {
  return f == PatternFamily::OnedH || f == PatternFamily::OnedV || f == PatternFamily::OnedHScale2 ||
         f == PatternFamily::OnedHScale4;
}

bool is_twod(PatternFamily f) {
  return f == PatternFamily::TwodHPeriodic || f == PatternFamily::TwodHMirror || f == PatternFamily::TwodVPeriodic ||
         f == PatternFamily::TwodVMirror;
}

// Tile coordinate along one axis; mirror tiles run 0..15 then 15..0.
int tile_coord(int t, bool mirror) {
  if (!mirror) return mod(t, 16);
  const int m = mod(t, 32);
  return m < 16 ? m : 31 - m;
}

std::uint8_t tile_value(int fast, int slow, TileLayout layout) {
  if (layout == TileLayout::Max240) return static_cast<std::uint8_t>(15 * slow + fast);
  return static_cast<std::uint8_t>(16 * slow + fast);
}

}  // namespace

int tile_size(const PatternSpec& spec) {
  if (is_twod(spec.family)) return 16;
  if (spec.family == PatternFamily::Random3x3) return 3;
  if (is_oned(spec.family)) return spec.stripe_height;
  return 1;
}

SlmPattern generate(const PatternSpec& spec, int width, int height) {
  if (width < 1 || height < 1) throw DataError("pattern frame must be nonempty");
  if (spec.stripe_height < 1) throw DataError("stripe height must be positive");
  const int t = tile_size(spec);
  if (width < t || height < t) throw DataError("frame is smaller than one pattern tile");
  if (spec.family == PatternFamily::Constant && (spec.level < 0 || spec.level > 255))
    throw DataError("constant level must lie in [0, 255]");

  SlmPattern p;
  p.width = width;
  p.height = height;
  p.spec = spec;
  p.id = pattern_id(spec, 0);
  p.values.resize(static_cast<std::size_t>(width) * height);

  const int h = spec.stripe_height;
  const int s = oned_scale(spec.family);
  const bool mirror = spec.family == PatternFamily::TwodHMirror || spec.family == PatternFamily::TwodVMirror;
  const bool fast_x = spec.family == PatternFamily::TwodHPeriodic || spec.family == PatternFamily::TwodHMirror;

#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint8_t v = 0;
      switch (spec.family) {
        case PatternFamily::Constant: v = static_cast<std::uint8_t>(spec.level); break;
        case PatternFamily::OnedH:
        case PatternFamily::OnedHScale2:
        case PatternFamily::OnedHScale4: {
          const long long a = static_cast<long long>(s) * (x + spec.shift_x) + static_cast<long long>(h) * (y / h);
          v = static_cast<std::uint8_t>(((a % 255) + 255) % 255);
          break;
        }
        case PatternFamily::OnedV: {
          const long long a = static_cast<long long>(y + spec.shift_y) + static_cast<long long>(h) * (x / h);
          v = static_cast<std::uint8_t>(((a % 255) + 255) % 255);
          break;
        }
        case PatternFamily::TwodHPeriodic:
        case PatternFamily::TwodHMirror:
        case PatternFamily::TwodVPeriodic:
        case PatternFamily::TwodVMirror: {
          const int u = tile_coord(x + spec.shift_x, mirror);
          const int w = tile_coord(y + spec.shift_y, mirror);
          v = fast_x ? tile_value(u, w, spec.layout) : tile_value(w, u, spec.layout);
          break;
        }
        case PatternFamily::Random3x3: {
          const auto bx = static_cast<std::uint64_t>(mod(x + spec.shift_x, 1 << 30) / 3);
          const auto by = static_cast<std::uint64_t>(mod(y + spec.shift_y, 1 << 30) / 3);
          rng::Stream st(rng::derive(spec.seed, by, bx));
          v = static_cast<std::uint8_t>(st.below(256));
          break;
        }
      }
      p.values[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return p;
}

std::string pattern_id(const PatternSpec& spec, int ordinal) {
  char buf[64];
  if (spec.family == PatternFamily::Constant) {
    std::snprintf(buf, sizeof buf, "const_%03d", spec.level);
  } else {
    std::snprintf(buf, sizeof buf, "%s_%02d", to_string(spec.family).c_str(), ordinal);
  }
  return buf;
}

std::vector<SlmPattern> constant_set(int width, int height) {
  std::vector<SlmPattern> out;
  out.reserve(256);
  for (int r = 0; r < 256; ++r) {
    PatternSpec s;
    s.level = r;
    out.push_back(generate(s, width, height));
  }
  return out;
}

std::vector<SlmPattern> enumerate_92(int width, int height, std::uint64_t master_seed) {
  std::vector<std::pair<PatternSpec, int>> specs;
  auto add = [&](PatternFamily f, int n, auto&& fill) {
    for (int i = 0; i < n; ++i) {
      PatternSpec s;
      s.family = f;
      fill(s, i);
      specs.emplace_back(s, i);
    }
  };
  add(PatternFamily::OnedH, 16, [](PatternSpec& s, int i) { s.shift_x = 16 * i; });
  add(PatternFamily::OnedV, 16, [](PatternSpec& s, int i) { s.shift_y = 16 * i; });
  add(PatternFamily::OnedHScale2, 8, [](PatternSpec& s, int i) { s.shift_x = 16 * i; });
  add(PatternFamily::OnedHScale4, 4, [](PatternSpec& s, int i) { s.shift_x = 16 * i; });
  for (PatternFamily f : {PatternFamily::TwodVPeriodic, PatternFamily::TwodVMirror, PatternFamily::TwodHPeriodic,
                          PatternFamily::TwodHMirror})
    add(f, 8, [](PatternSpec& s, int i) { s.shift_x = s.shift_y = 2 * i; });
  add(PatternFamily::Random3x3, 16,
      [master_seed](PatternSpec& s, int i) { s.seed = rng::derive(master_seed, 0x7261'6e64ULL, static_cast<std::uint64_t>(i)); });

  std::vector<SlmPattern> out(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out[i] = generate(specs[i].first, width, height);
    out[i].id = pattern_id(specs[i].first, specs[i].second);
  }
  return out;
}

std::vector<std::uint8_t> stripe_boundary_mask(const SlmPattern& pattern) {
  const PatternFamily f = pattern.spec.family;
  if (!is_oned(f)) return {};
  const int h = pattern.spec.stripe_height;
  std::vector<std::uint8_t> mask(pattern.values.size(), 0);
  for (int y = 0; y < pattern.height; ++y)
    for (int x = 0; x < pattern.width; ++x) {
      const int c = f == PatternFamily::OnedV ? x : y;
      const int n = f == PatternFamily::OnedV ? pattern.width : pattern.height;
      // The forward difference leaves the stripe at its last row, except at the frame edge.
      if ((c + 1) % h == 0 && c + 1 < n) mask[static_cast<std::size_t>(y) * pattern.width + x] = 1;
    }
  return mask;
}

double PhaseGradientMap::radians_per_index() const {
  return 2.0 * std::numbers::pi * c0_nm_per_index / lambda_ref_nm;
}

PhaseGradientMap phase_gradient(const SlmPattern& pattern, double c0_nm_per_index, double lambda_ref_nm) {
  if (!(lambda_ref_nm > 0.0) || !std::isfinite(c0_nm_per_index))
    throw DataError("phase gradient needs a positive wavelength and finite c0");
  if (pattern.width < 2 || pattern.height < 2) throw DataError("phase gradient needs at least a 2x2 pattern");
  PhaseGradientMap g;
  g.width = pattern.width;
  g.height = pattern.height;
  g.lambda_ref_nm = lambda_ref_nm;
  g.c0_nm_per_index = c0_nm_per_index;
  g.grad_x.resize(pattern.values.size());
  g.grad_y.resize(pattern.values.size());
  const int w = pattern.width, h = pattern.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int x0 = x + 1 < w ? x : x - 1;
      const int y0 = y + 1 < h ? y : y - 1;
      g.grad_x[i] = double(pattern.at(x0 + 1, y)) - double(pattern.at(x0, y));
      g.grad_y[i] = double(pattern.at(x, y0 + 1)) - double(pattern.at(x, y0));
    }
  return g;
}

std::uint64_t standalone_coverage(const SlmPattern& pattern) { return pattern.values.size(); }

Selection greedy_select(std::span<const SlmPattern> candidates, std::size_t count,
                        const std::optional<std::string>& first) {
  if (candidates.empty()) throw DataError("greedy selection needs at least one candidate");
  if (count > candidates.size()) throw DataError("cannot select more patterns than candidates");
  const std::size_t pixels = candidates.front().values.size();
  for (const auto& c : candidates)
    if (c.values.size() != pixels || c.width != candidates.front().width)
      throw DataError("all candidate patterns must share one frame size");

  using Bits = std::array<std::uint64_t, 4>;
  std::vector<Bits> seen(pixels, Bits{});
  std::vector<char> used(candidates.size(), 0);
  Selection sel;

  auto gain_of = [&](const SlmPattern& c) {
    std::uint64_t g = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
      const unsigned v = c.values[p];
      g += (seen[p][v >> 6] >> (v & 63) & 1ULL) ? 0 : 1;
    }
    return g;
  };
  auto take = [&](std::size_t k, std::uint64_t g) {
    used[k] = 1;
    for (std::size_t p = 0; p < pixels; ++p) {
      const unsigned v = candidates[k].values[p];
      seen[p][v >> 6] |= 1ULL << (v & 63);
    }
    sel.ids.push_back(candidates[k].id);
    sel.positions.push_back(k);
    sel.gain.push_back(g);
  };

  std::vector<std::uint64_t> gains(candidates.size());
  for (std::size_t step = 0; step < count; ++step) {
    if (step == 0 && first) {
      auto it = std::find_if(candidates.begin(), candidates.end(), [&](const SlmPattern& c) { return c.id == *first; });
      if (it == candidates.end()) throw DataError("first pattern '" + *first + "' is not among the candidates");
      const auto k = static_cast<std::size_t>(it - candidates.begin());
      take(k, gain_of(candidates[k]));
      continue;
    }
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(candidates.size()); ++k)
      gains[static_cast<std::size_t>(k)] = used[static_cast<std::size_t>(k)] ? 0 : gain_of(candidates[static_cast<std::size_t>(k)]);
    std::size_t best = candidates.size();
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (!used[k] && (best == candidates.size() || gains[k] > gains[best])) best = k;
    take(best, gains[best]);
  }
  return sel;
}

}  // namespace slmspec::patterns
