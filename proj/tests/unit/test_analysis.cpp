#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "slmspec/analysis.hpp"
#include "slmspec/error.hpp"
#include "slmspec/patterns.hpp"
#include "slmspec/scenes.hpp"
#include "support.hpp"

using namespace slmspec;

namespace {

analysis::Scenario scenario(const HyperspectralCube& cube) {
  const auto& grid = cube.grid();
  return {cube, lc::reference_filter_bank(grid), SensorResponse::flat(grid), SensorResponse::rgb_gaussian(grid),
          sim::NoiseConfig::noiseless()};
}

bool is_twod(PatternFamily f) {
  return f == PatternFamily::TwodHPeriodic || f == PatternFamily::TwodHMirror || f == PatternFamily::TwodVPeriodic ||
         f == PatternFamily::TwodVMirror;
}

bool is_oned(PatternFamily f) {
  return f == PatternFamily::OnedH || f == PatternFamily::OnedV || f == PatternFamily::OnedHScale2 ||
         f == PatternFamily::OnedHScale4;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("psnr reference values") {
    std::vector<float> ref(100, 0.5f);
    ref[0] = 1.0f;
    CHECK(analysis::psnr(ref, ref).infinite);

    std::vector<float> est = ref;
    for (std::size_t i = 0; i < est.size(); ++i) est[i] += (i % 2 ? 0.1f : -0.1f);
    CHECK(analysis::psnr(ref, est).db == doctest::Approx(20.0).epsilon(1e-5));
    for (std::size_t i = 0; i < est.size(); ++i) est[i] = ref[i] + (i % 2 ? 0.01f : -0.01f);
    CHECK(analysis::psnr(ref, est).db == doctest::Approx(40.0).epsilon(1e-4));
  }

  TEST_CASE("psnr falls as noise grows") {
    rng::Stream st(5);
    std::vector<float> ref(256);
    for (float& v : ref) v = static_cast<float>(st.uniform());
    double last = std::numeric_limits<double>::infinity();
    for (double sigma : {0.01, 0.02, 0.05, 0.1, 0.2}) {
      double mean = 0.0;
      for (int t = 0; t < 100; ++t) {
        std::vector<float> est = ref;
        for (float& v : est) v += static_cast<float>(sigma * st.normal());
        mean += analysis::psnr(ref, est).db / 100.0;
      }
      CHECK(mean < last);
      last = mean;
    }
  }

  TEST_CASE("spectral angle reference values") {
    const std::vector<float> a{1, 0}, b{0, 1}, c{1, 1}, d{2, 2}, z{0, 0};
    CHECK(analysis::spectral_angle_deg(c, c) == doctest::Approx(0.0));
    CHECK(analysis::spectral_angle_deg(a, b) == doctest::Approx(90.0));
    CHECK(analysis::spectral_angle_deg(c, d) == doctest::Approx(0.0));
    CHECK(std::isnan(analysis::spectral_angle_deg(a, z)));
  }

  TEST_CASE("spectral angle ignores positive per-pixel scaling") {
    const auto grid = SpectralGrid::uniform_lambda(420, 940, 9);
    const auto ref = testing::random_cube(6, 6, grid, 1), est = testing::random_cube(6, 6, grid, 2);
    HyperspectralCube scaled = est;
    rng::Stream st(3);
    for (std::size_t p = 0; p < scaled.pixels(); ++p) {
      const float k = static_cast<float>(st.uniform(0.1, 10.0));
      for (float& v : scaled.spectrum(p)) v *= k;
    }
    const auto m1 = analysis::sam_map(ref, est), m2 = analysis::sam_map(ref, scaled);
    for (std::size_t p = 0; p < m1.degrees.size(); ++p) CHECK(m2.degrees[p] == doctest::Approx(m1.degrees[p]).epsilon(1e-4));
  }

  TEST_CASE("sam map flags zero pixels") {
    const auto grid = SpectralGrid::uniform_lambda(420, 940, 4);
    auto ref = testing::random_cube(3, 1, grid, 1);
    for (float& v : ref.spectrum(1)) v = 0.0f;
    const auto m = analysis::sam_map(ref, ref);
    CHECK(m.flagged == 1);
    CHECK_FALSE(m.valid[1]);
    CHECK(m.max_deg == doctest::Approx(0.0));
  }

  TEST_CASE("pattern benchmark: 92 rows, pure, 2D beats 1D") {
    const auto grid = SpectralGrid::uniform_lambda(420, 940, 16);
    const auto scenes = scenes::committed_scenes(64, 64, grid, 2024);
    const auto suite = patterns::enumerate_92(64, 64, 7);
    analysis::ReconSpec spec;
    double twod = 0.0, oned = 0.0;
    int n2 = 0, n1 = 0;
    for (const auto& cube : scenes) {
      const auto rows = analysis::pattern_benchmark(scenario(cube), suite, spec);
      REQUIRE(rows.size() == 92);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].pattern_id == suite[i].id);
        if (is_twod(suite[i].spec.family)) twod += rows[i].psnr_db, ++n2;
        if (is_oned(suite[i].spec.family)) oned += rows[i].psnr_db, ++n1;
      }
    }
    CHECK(twod / n2 > oned / n1);

    const auto sc = scenario(scenes.front());
    const auto a = analysis::pattern_benchmark(sc, std::span(suite).first(5), spec);
    const auto b = analysis::pattern_benchmark(sc, std::span(suite).first(5), spec);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].psnr_db == b[i].psnr_db);
  }

  TEST_CASE("constant patterns give identical rows under any shift") {
    const auto grid = SpectralGrid::uniform_lambda(420, 940, 8);
    const auto sc = scenario(scenes::region_scene(32, 32, grid, 3, 1));
    std::vector<SlmPattern> pats;
    for (int s : {0, 3, 17}) {
      PatternSpec spec;
      spec.level = 90;
      spec.shift_x = s;
      spec.shift_y = 2 * s;
      pats.push_back(patterns::generate(spec, 32, 32));
    }
    const auto rows = analysis::pattern_benchmark(sc, pats, analysis::ReconSpec{});
    CHECK(rows[1].psnr_db == rows[0].psnr_db);
    CHECK(rows[2].psnr_db == rows[0].psnr_db);
    CHECK(rows[2].sam_median_deg == rows[0].sam_median_deg);
  }

  TEST_CASE("256 constants: patterned and LC-cell coincide") {
    const auto grid = SpectralGrid::uniform_lambda(420, 940, 8);
    const auto sc = scenario(scenes::region_scene(16, 16, grid, 3, 2));
    const auto all = patterns::constant_set(16, 16);
    analysis::ReconSpec spec;
    spec.method = analysis::Method::Lsq;
    analysis::SweepConfig cfg;
    cfg.counts = {256};
    cfg.baseline_draws = 2;
    const auto rows = analysis::multiframe_sweep(sc, all, spec, cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].psnr_db == doctest::Approx(rows[1].psnr_db).epsilon(1e-6));
  }

  TEST_CASE("baseline draws are distinct and reproducible") {
    for (int d = 0; d < 10; ++d) {
      const auto idx = analysis::baseline_indices(7, 16, d);
      CHECK(idx.size() == 16);
      CHECK(std::set<std::uint8_t>(idx.begin(), idx.end()).size() == 16);
      CHECK(idx == analysis::baseline_indices(7, 16, d));
    }
    CHECK(analysis::baseline_indices(7, 16, 0) != analysis::baseline_indices(7, 16, 1));
  }

  TEST_CASE("few-shot sweep: patterned beats LC-cell and does not fall with count") {
    const auto grid = SpectralGrid::uniform_lambda(420, 940, 31);
    const auto suite = patterns::enumerate_92(64, 64, 7);
    const auto sel = patterns::greedy_select(suite, 4, std::string("twod_h_periodic_00"));
    std::vector<SlmPattern> chosen;
    for (auto k : sel.positions) chosen.push_back(suite[k]);
    analysis::ReconSpec spec;
    spec.guided.q_superpixels = 32;
    analysis::SweepConfig cfg;
    cfg.counts = {1, 2, 4};
    cfg.seed = 99;
    std::vector<double> pat(3, 0.0), base(3, 0.0);
    const auto scenes = scenes::committed_scenes(64, 64, grid, 2024);
    for (const auto& cube : scenes) {
      const auto rows = analysis::multiframe_sweep(scenario(cube), chosen, spec, cfg);
      for (std::size_t i = 0; i < 3; ++i) {
        pat[i] += rows[2 * i].psnr_db / static_cast<double>(scenes.size());
        base[i] += rows[2 * i + 1].psnr_db / static_cast<double>(scenes.size());
      }
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(pat[i] > base[i]);
    CHECK(pat[1] >= pat[0]);
    CHECK(pat[2] >= pat[1]);
  }

  TEST_CASE("identity-like bank resolves a line to one band spacing") {
    lc::FilterBank b;
    b.grid = SpectralGrid::uniform_lambda(500, 755, 256);
    b.transmittance.assign(256 * 256, 0.0);
    b.retardance_nm.assign(256, 1000.0);
    for (std::size_t r = 0; r < 256; ++r) b.transmittance[r * 256 + r] = 1.0;
    const std::vector<double> lines{532.0, 635.0};
    for (const auto& r : analysis::fwhm_probe(b, lines)) CHECK(r.fwhm_nm == doctest::Approx(1.0));
  }

  TEST_CASE("simulated bank broadens toward the red") {
    const auto bank = lc::reference_filter_bank(SpectralGrid::uniform_lambda(420, 940, 521));
    const std::vector<double> lines{532.0, 635.0, 850.0};
    const auto r = analysis::fwhm_probe(bank, lines);
    CHECK(r[0].fwhm_nm < r[1].fwhm_nm);
    CHECK(r[1].fwhm_nm < r[2].fwhm_nm);
    CHECK(r[2].fwhm_nm / r[0].fwhm_nm > 1.0);
    CHECK_THROWS_AS(analysis::fwhm_probe(bank, std::vector<double>{1000.0}), DataError);
  }

  TEST_CASE("method names round-trip") {
    for (auto m : {analysis::Method::Lsq, analysis::Method::Tv, analysis::Method::Rank1})
      CHECK(analysis::method_from_string(analysis::to_string(m)) == m);
    CHECK_THROWS(analysis::method_from_string("magic"));
  }
}
