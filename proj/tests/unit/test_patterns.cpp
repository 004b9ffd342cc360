#include <doctest.h>

#include <map>
#include <set>

#include "slmspec/error.hpp"
#include "slmspec/patterns.hpp"

using namespace slmspec;

namespace {

PatternSpec spec_of(PatternFamily f, int sx = 0, int sy = 0) {
  PatternSpec s;
  s.family = f;
  s.shift_x = sx;
  s.shift_y = sy;
  return s;
}

// Coverage of a set of patterns counted with an explicit set of (pixel, index) pairs.
std::size_t covered(const std::vector<const SlmPattern*>& chosen) {
  std::set<std::pair<std::size_t, int>> pairs;
  for (const auto* p : chosen)
    for (std::size_t i = 0; i < p->values.size(); ++i) pairs.emplace(i, p->values[i]);
  return pairs.size();
}

}  // namespace

TEST_SUITE("patterns") {
  TEST_CASE("oned_h runs x mod 255 with unit steps inside a stripe") {
    const auto p = patterns::generate(spec_of(PatternFamily::OnedH), 600, 3);
    for (int x = 0; x < 600; ++x) CHECK(p.at(x, 0) == x % 255);
    int worst = 0;
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x + 1 < 600; ++x) {
        const int d = std::abs(int(p.at(x + 1, y)) - int(p.at(x, y)));
        if (d != 254) worst = std::max(worst, d);  // 254 is the mod wrap
      }
    CHECK(worst == 1);
  }

  TEST_CASE("each 2D periodic tile holds all 256 indices") {
    for (auto f : {PatternFamily::TwodHPeriodic, PatternFamily::TwodVPeriodic, PatternFamily::TwodHMirror}) {
      const auto p = patterns::generate(spec_of(f), 64, 48);
      for (int ty = 0; ty < 3; ++ty)
        for (int tx = 0; tx < 4; ++tx) {
          std::set<int> seen;
          for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) seen.insert(p.at(16 * tx + x, 16 * ty + y));
          CHECK(seen.size() == 256);
        }
    }
  }

  TEST_CASE("mirror tiles reflect across every tile boundary") {
    const auto p = patterns::generate(spec_of(PatternFamily::TwodHMirror), 96, 96);
    for (int T = 16; T < 96; T += 16)
      for (int k = 0; k < 16 && T + k < 96; ++k)
        for (int y = 0; y < 96; y += 7) {
          CHECK(p.at(T + k, y) == p.at(T - 1 - k, y));
          CHECK(p.at(y, T + k) == p.at(y, T - 1 - k));
        }
  }

  TEST_CASE("periodic tiles repeat after 16 pixels up to the shift") {
    const auto a = patterns::generate(spec_of(PatternFamily::TwodHPeriodic, 6, 6), 80, 40);
    const auto b = patterns::generate(spec_of(PatternFamily::TwodHPeriodic), 80, 40);
    for (int y = 0; y < 34; ++y)
      for (int x = 0; x < 64; ++x) {
        CHECK(a.at(x + 16, y) == a.at(x, y));
        CHECK(a.at(x, y) == b.at(x + 6, y + 6));
      }
  }

  TEST_CASE("values stay in range for every family") {
    for (const auto& p : patterns::enumerate_92(48, 48, 5)) {
      CHECK(p.values.size() == 48u * 48u);
      for (auto v : p.values) CHECK(v <= 255);
    }
  }

  TEST_CASE("the 92-pattern suite has the expected family counts") {
    const auto set = patterns::enumerate_92(64, 64, 7);
    REQUIRE(set.size() == 92);
    std::map<PatternFamily, int> n;
    for (const auto& p : set) ++n[p.spec.family];
    CHECK(n[PatternFamily::OnedH] == 16);
    CHECK(n[PatternFamily::OnedV] == 16);
    CHECK(n[PatternFamily::OnedHScale2] == 8);
    CHECK(n[PatternFamily::OnedHScale4] == 4);
    CHECK(n[PatternFamily::TwodHPeriodic] == 8);
    CHECK(n[PatternFamily::TwodHMirror] == 8);
    CHECK(n[PatternFamily::TwodVPeriodic] == 8);
    CHECK(n[PatternFamily::TwodVMirror] == 8);
    CHECK(n[PatternFamily::Random3x3] == 16);
    std::set<std::string> ids;
    for (const auto& p : set) ids.insert(p.id);
    CHECK(ids.size() == 92);
  }

  TEST_CASE("suite generation is deterministic and seed dependent") {
    const auto a = patterns::enumerate_92(40, 40, 11), b = patterns::enumerate_92(40, 40, 11);
    const auto c = patterns::enumerate_92(40, 40, 12);
    CHECK(a == b);
    CHECK(a.back().values != c.back().values);
  }

  TEST_CASE("the 16 oned_h shifts are pairwise distinct") {
    const auto set = patterns::enumerate_92(300, 30, 0);
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = i + 1; j < 16; ++j) CHECK(set[i].values != set[j].values);
  }

  TEST_CASE("gradients: zero for constants, 1 and 2 for 1D, near 15 for 2D") {
    auto interior_max = [](const patterns::PhaseGradientMap& g, const SlmPattern& p, const std::vector<std::uint8_t>& mask) {
      double mx = 0.0;
      for (int y = 0; y + 1 < p.height; ++y)
        for (int x = 0; x + 1 < p.width; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * p.width + x;
          if (!mask.empty() && mask[i]) continue;
          const double gx = std::abs(g.grad_x[i]), gy = std::abs(g.grad_y[i]);
          // Skip wraps of the 1D ramps and tile seams.
          if (gx > 100 || gy > 100) continue;
          mx = std::max({mx, gx, gy});
        }
      return mx;
    };
    PatternSpec c;
    c.level = 77;
    const auto pc = patterns::generate(c, 20, 20);
    const auto gc = patterns::phase_gradient(pc, -8.63, 532.0);
    CHECK(interior_max(gc, pc, {}) == 0.0);

    const auto p1 = patterns::generate(spec_of(PatternFamily::OnedH), 200, 30);
    CHECK(interior_max(patterns::phase_gradient(p1, -8.63, 532.0), p1, patterns::stripe_boundary_mask(p1)) == 1.0);
    const auto p2 = patterns::generate(spec_of(PatternFamily::OnedHScale2), 200, 30);
    CHECK(interior_max(patterns::phase_gradient(p2, -8.63, 532.0), p2, patterns::stripe_boundary_mask(p2)) == 2.0);

    PatternSpec t = spec_of(PatternFamily::TwodHPeriodic);
    t.layout = TileLayout::Max240;
    const auto p3 = patterns::generate(t, 64, 64);
    CHECK(interior_max(patterns::phase_gradient(p3, -8.63, 532.0), p3, {}) == 15.0);
    const auto p4 = patterns::generate(spec_of(PatternFamily::TwodVMirror), 64, 64);
    CHECK(interior_max(patterns::phase_gradient(p4, -8.63, 532.0), p4, {}) == doctest::Approx(15.0).epsilon(1.0 / 15));
  }

  TEST_CASE("phase gradient is linear in c0 and in 1/lambda") {
    const auto p = patterns::generate(spec_of(PatternFamily::TwodHMirror, 2, 2), 32, 32);
    const auto g1 = patterns::phase_gradient(p, -8.63, 500.0);
    const auto g2 = patterns::phase_gradient(p, -17.26, 500.0);
    const auto g3 = patterns::phase_gradient(p, -8.63, 1000.0);
    for (std::size_t i = 0; i < p.values.size(); i += 13) {
      CHECK(g2.phase_x(i) == doctest::Approx(2.0 * g1.phase_x(i)));
      CHECK(g3.phase_y(i) == doctest::Approx(0.5 * g1.phase_y(i)));
    }
  }

  TEST_CASE("greedy selection of every candidate is a permutation") {
    const auto set = patterns::enumerate_92(32, 32, 3);
    const auto sel = patterns::greedy_select(set, set.size());
    std::set<std::size_t> pos(sel.positions.begin(), sel.positions.end());
    CHECK(pos.size() == set.size());
  }

  TEST_CASE("a duplicate candidate adds nothing and comes last") {
    std::vector<SlmPattern> c = {patterns::generate(spec_of(PatternFamily::TwodHPeriodic), 32, 32),
                                 patterns::generate(spec_of(PatternFamily::OnedH), 32, 32)};
    c.push_back(c[0]);
    c[0].id = "a";
    c[1].id = "b";
    c[2].id = "a_copy";
    const auto sel = patterns::greedy_select(c, 3);
    CHECK(sel.ids.back() == "a_copy");
    CHECK(sel.gain.back() == 0);
  }

  TEST_CASE("greedy selection matches a per-step exhaustive oracle") {
    const auto set = patterns::enumerate_92(64, 64, 7);
    const auto sel = patterns::greedy_select(set, 16);
    std::vector<const SlmPattern*> chosen;
    std::vector<bool> used(set.size(), false);
    std::size_t prev = 0;
    for (std::size_t step = 0; step < 16; ++step) {
      std::size_t best = set.size(), best_cov = 0;
      for (std::size_t k = 0; k < set.size(); ++k) {
        if (used[k]) continue;
        chosen.push_back(&set[k]);
        const std::size_t cov = covered(chosen);
        chosen.pop_back();
        if (best == set.size() || cov > best_cov) {
          best = k;
          best_cov = cov;
        }
      }
      CHECK(sel.positions[step] == best);
      CHECK(sel.gain[step] == best_cov - prev);
      CHECK(best_cov >= prev);
      used[best] = true;
      chosen.push_back(&set[best]);
      prev = best_cov;
    }
  }

  TEST_CASE("pinned first pattern and error cases") {
    const auto set = patterns::enumerate_92(32, 32, 1);
    const auto sel = patterns::greedy_select(set, 4, std::string("twod_h_periodic_00"));
    CHECK(sel.ids.front() == "twod_h_periodic_00");
    CHECK_THROWS_AS(patterns::greedy_select(set, 4, std::string("nope")), DataError);
    CHECK_THROWS_AS(patterns::greedy_select(set, 93), DataError);
    CHECK_THROWS_AS(patterns::generate(spec_of(PatternFamily::TwodHPeriodic), 8, 8), DataError);
  }

  TEST_CASE("cumulative coverage rises until saturation") {
    const auto set = patterns::enumerate_92(48, 48, 2);
    const auto sel = patterns::greedy_select(set, 92);
    bool saturated = false;
    for (auto g : sel.gain) {
      if (g == 0) saturated = true;
      else CHECK_FALSE(saturated);
    }
  }
}
