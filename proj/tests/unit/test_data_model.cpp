#include <doctest.h>

#include <array>
#include <fstream>

#include "json.hpp"
#include "slmspec/data_model.hpp"
#include "slmspec/error.hpp"
#include "slmspec/io.hpp"
#include "slmspec/patterns.hpp"
#include "support.hpp"

using namespace slmspec;
using testing::TempDir;

namespace {

// Plain linear interpolation written independently of the library.
double oracle_interp(const std::vector<double>& xs, std::span<const float> ys, double x) {
  std::size_t i = 0;
  while (i + 2 < xs.size() && xs[i + 1] <= x) ++i;
  const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return (1.0 - t) * ys[i] + t * ys[i + 1];
}

void write_raw_container(const std::filesystem::path& path, int bands_declared, int bands_written) {
  nlohmann::json h{{"width", 2},           {"height", 2},       {"bands", bands_declared},
                   {"wavelengths_nm", std::vector<double>(static_cast<std::size_t>(bands_declared))},
                   {"dtype", "f32"},       {"layout", "band-sequential"},
                   {"endianness", "little"}};
  for (int b = 0; b < bands_declared; ++b) h["wavelengths_nm"][static_cast<std::size_t>(b)] = 500.0 + 10.0 * b;
  std::string bytes = h.dump();
  bytes.resize((bytes.size() / 16 + 1) * 16, '\0');
  bytes.append(static_cast<std::size_t>(4 * 4 * bands_written), '\0');
  io::write_file(path, bytes);
}

}  // namespace

TEST_SUITE("data_model") {
  TEST_CASE("grids reject bad wavelengths") {
    CHECK_THROWS_AS(SpectralGrid({500.0}), DataError);
    CHECK_THROWS_AS(SpectralGrid({500.0, 500.0}), DataError);
    CHECK_THROWS_AS(SpectralGrid({-1.0, 500.0}), DataError);
    const auto g = SpectralGrid::uniform_wavenumber(420, 940, 53);
    CHECK(g.front() == doctest::Approx(420.0));
    CHECK(g.back() == doctest::Approx(940.0));
    const double d0 = 1.0 / g[0] - 1.0 / g[1];
    for (std::size_t i = 1; i + 1 < g.size(); ++i) CHECK(1.0 / g[i] - 1.0 / g[i + 1] == doctest::Approx(d0));
  }

  TEST_CASE("cube validate rejects negatives and non-finite values") {
    HyperspectralCube c(2, 1, SpectralGrid::uniform_lambda(400, 700, 3));
    CHECK_NOTHROW(c.validate());
    c.at(1, 0, 2) = -1.0f;
    CHECK_THROWS_AS(c.validate(), DataError);
    c.at(1, 0, 2) = std::nanf("");
    CHECK_THROWS_AS(c.validate(), DataError);
  }

  TEST_CASE("resample onto the same grid is the identity") {
    const auto g = SpectralGrid::uniform_lambda(400, 1000, 31);
    const auto c = testing::random_cube(5, 4, g, 1);
    CHECK(spectral_resample(c, g) == c);
  }

  TEST_CASE("resample keeps constant spectra constant") {
    const auto src = SpectralGrid::uniform_lambda(400, 1100, 71);
    HyperspectralCube c(3, 3, src);
    for (std::size_t p = 0; p < c.pixels(); ++p)
      for (float& v : c.spectrum(p)) v = 0.25f * static_cast<float>(p + 1);
    for (const auto& t : {SpectralGrid::uniform_lambda(420, 940, 11), SpectralGrid::uniform_wavenumber(401, 1099, 37)}) {
      const auto r = spectral_resample(c, t);
      for (std::size_t p = 0; p < r.pixels(); ++p)
        for (float v : r.spectrum(p)) CHECK(v == doctest::Approx(0.25 * (p + 1)).epsilon(1e-6));
    }
  }

  TEST_CASE("519 bands to 53 uniform in wavenumber matches a scalar oracle") {
    const auto src = SpectralGrid::uniform_lambda(400, 1100, 519);
    const auto dst = SpectralGrid::uniform_wavenumber(420, 940, 53);
    const auto c = testing::random_cube(8, 6, src, 7);
    const auto r = spectral_resample(c, dst);
    REQUIRE(r.bands() == 53);
    double worst = 0.0;
    for (std::size_t p = 0; p < c.pixels(); ++p)
      for (std::size_t j = 0; j < dst.size(); ++j)
        worst = std::max(worst, std::abs(r.spectrum(p)[j] - oracle_interp(src.wavelengths(), c.spectrum(p), dst[j])));
    CHECK(worst < 1e-6);

    TempDir tmp;
    io::save_cube(r, tmp / "r.hsi");
    CHECK(io::load_cube(tmp / "r.hsi").bands() == 53);
  }

  TEST_CASE("resample is linear in the cube") {
    const auto src = SpectralGrid::uniform_lambda(400, 1000, 61);
    const auto dst = SpectralGrid::uniform_wavenumber(420, 940, 17);
    const auto a = testing::random_cube(4, 3, src, 11), b = testing::random_cube(4, 3, src, 12);
    HyperspectralCube mix(4, 3, src);
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = 2.0f * a.data()[i] + 0.5f * b.data()[i];
    const auto ra = spectral_resample(a, dst), rb = spectral_resample(b, dst), rm = spectral_resample(mix, dst);
    for (std::size_t i = 0; i < rm.data().size(); ++i)
      CHECK(rm.data()[i] == doctest::Approx(2.0 * ra.data()[i] + 0.5 * rb.data()[i]).epsilon(1e-5));
  }

  TEST_CASE("affine spectra resample exactly") {
    const auto src = SpectralGrid::uniform_lambda(400, 1000, 25);
    HyperspectralCube c(2, 2, src);
    for (std::size_t p = 0; p < c.pixels(); ++p)
      for (std::size_t l = 0; l < src.size(); ++l) c.spectrum(p)[l] = static_cast<float>(0.1 + 0.001 * src[l] * (p + 1));
    const auto dst = SpectralGrid::uniform_wavenumber(433, 977, 29);
    const auto r = spectral_resample(c, dst);
    for (std::size_t p = 0; p < r.pixels(); ++p)
      for (std::size_t j = 0; j < dst.size(); ++j)
        CHECK(r.spectrum(p)[j] == doctest::Approx(0.1 + 0.001 * dst[j] * (p + 1)).epsilon(1e-6));
  }

  TEST_CASE("resample outside the source range is an error") {
    const auto c = testing::random_cube(1, 1, SpectralGrid::uniform_lambda(450, 900, 10), 3);
    CHECK_THROWS_AS(spectral_resample(c, SpectralGrid::uniform_lambda(420, 940, 10)), DataError);
  }
}

TEST_SUITE("io") {
  TEST_CASE("2x2x3 cube round-trips byte for byte") {
    TempDir tmp;
    const auto c = testing::random_cube(2, 2, SpectralGrid({450.0, 550.0, 650.0}), 5);
    io::save_cube(c, tmp / "a.hsi");
    const auto back = io::load_cube(tmp / "a.hsi");
    CHECK(back == c);
    io::save_cube(back, tmp / "b.hsi");
    CHECK(io::read_file(tmp / "a.hsi") == io::read_file(tmp / "b.hsi"));
  }

  TEST_CASE("header declaring more bands than the payload is rejected") {
    TempDir tmp;
    write_raw_container(tmp / "ok.hsi", 3, 3);
    CHECK_NOTHROW(io::load_cube(tmp / "ok.hsi"));
    write_raw_container(tmp / "bad.hsi", 4, 3);
    CHECK_THROWS_AS(io::load_cube(tmp / "bad.hsi"), DataError);
  }

  TEST_CASE("measurement and guide round-trip") {
    TempDir tmp;
    MeasurementImage m{3, 2, "oned_h_04", 12.5, {0, 1, 2, 3, 4, 5.5f}};
    io::save_measurement(m, tmp / "m.hsi");
    CHECK(io::load_measurement(tmp / "m.hsi") == m);

    GuideImage g{2, 2, 3, std::vector<float>(12)};
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = 0.1f * static_cast<float>(i);
    io::save_guide(g, tmp / "g.hsi");
    const auto gb = io::load_guide(tmp / "g.hsi");
    CHECK(gb.width == 2);
    CHECK(gb.channels == 3);
    CHECK(gb.data == g.data);
  }

  TEST_CASE("all-zero 16x16 pattern round-trips") {
    TempDir tmp;
    SlmPattern p = patterns::generate(PatternSpec{}, 16, 16);
    p.id = "zeros";
    io::save_pattern(p, tmp / "zeros.pgm");
    const auto back = io::load_pattern(tmp / "zeros.pgm");
    CHECK(back.width == 16);
    CHECK(back.height == 16);
    CHECK(back.id == "zeros");
    CHECK(back.values == p.values);
  }

  TEST_CASE("16-bit PGM is rejected") {
    TempDir tmp;
    std::string bytes = "P5\n2 2\n65535\n";
    bytes.append(8, '\0');
    io::write_file(tmp / "wide.pgm", bytes);
    int w = 0, h = 0;
    CHECK_THROWS_AS(io::load_pgm(tmp / "wide.pgm", w, h), DataError);
  }

  TEST_CASE("staggered 1D pattern keeps its histogram") {
    TempDir tmp;
    PatternSpec s;
    s.family = PatternFamily::OnedH;
    s.shift_x = 48;
    const auto p = patterns::generate(s, 300, 90);
    io::save_pattern(p, tmp / "p.pgm");
    const auto back = io::load_pattern(tmp / "p.pgm");
    std::array<int, 256> h0{}, h1{};
    for (auto v : p.values) ++h0[v];
    for (auto v : back.values) ++h1[v];
    CHECK(h0 == h1);
  }

  TEST_CASE("csv round-trips numbers exactly") {
    TempDir tmp;
    io::CsvTable t{{"a", "b"}, {{0.1, 1e-300}, {-3.0, 123456789.123}}};
    io::write_csv(t, tmp / "t.csv");
    const auto back = io::read_csv(tmp / "t.csv");
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK_THROWS_AS(back.column("c"), DataError);
  }

  TEST_CASE("sensor response csv round-trips") {
    TempDir tmp;
    const auto r = SensorResponse::rgb_gaussian(SpectralGrid::uniform_lambda(420, 940, 27));
    io::write_response_csv(r, tmp / "r.csv");
    const auto back = io::read_response_csv(tmp / "r.csv");
    CHECK(back.channels == 3);
    CHECK(back.grid == r.grid);
    CHECK(back.response == r.response);
  }
}
