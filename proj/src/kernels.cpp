#include "slmspec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>

#include <omp.h>

#include "slmspec/error.hpp"
#include "slmspec/parallel.hpp"

namespace slmspec {

void MeasurementOperator::validate() const {
  if (width <= 0 || height <= 0 || bands == 0) throw DataError("measurement operator has empty dimensions");
  if (indices.size() != frames * pixels()) throw DataError("measurement operator index table has wrong size");
  if (bank.size() != 256 * bands) throw DataError("measurement operator bank must be 256 x bands");
}

namespace parallel {

namespace {
int g_threads = 0;
}

void set_threads(int n) {
  g_threads = n < 1 ? 0 : n;
  omp_set_num_threads(n < 1 ? omp_get_num_procs() : n);
}

int threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

int configure_from_env() {
  if (const char* env = std::getenv("SLMSPEC_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) throw UsageError("SLMSPEC_THREADS must be a positive integer");
    set_threads(static_cast<int>(n));
  }
  return threads();
}

}  // namespace parallel

namespace kernels {

namespace {

void check_sizes(const MeasurementOperator& op, std::size_t x, std::size_t y) {
  if (x != op.pixels() * op.bands || y != op.frames * op.pixels())
    throw DataError("kernel buffer sizes do not match the measurement operator");
}

}  // namespace

void forward(const MeasurementOperator& op, std::span<const double> x, std::span<double> out) {
  check_sizes(op, x.size(), out.size());
  const std::size_t P = op.pixels();
  const std::size_t N = op.bands;
  const auto total = static_cast<std::ptrdiff_t>(op.frames * P);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kp = 0; kp < total; ++kp) {
    const std::size_t k = static_cast<std::size_t>(kp) / P;
    const std::size_t p = static_cast<std::size_t>(kp) % P;
    const double* row = op.row(k, p);
    const double* xp = x.data() + p * N;
    double s = 0.0;
    for (std::size_t l = 0; l < N; ++l) s += xp[l] * row[l];
    out[static_cast<std::size_t>(kp)] = s;
  }
}

void adjoint_accumulate(const MeasurementOperator& op, std::span<const double> r, std::span<double> grad) {
  check_sizes(op, grad.size(), r.size());
  const std::size_t P = op.pixels();
  const std::size_t N = op.bands;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    double* g = grad.data() + p * N;
    for (std::size_t k = 0; k < op.frames; ++k) {
      const double rk = r[k * P + p];
      const double* row = op.row(k, p);
      for (std::size_t l = 0; l < N; ++l) g[l] += rk * row[l];
    }
  }
}

void pixel_normal_equations(const MeasurementOperator& op, std::span<const double> y,
                            std::span<const std::size_t> pixels, std::span<double> gram,
                            std::span<double> rhs) {
  const std::size_t P = op.pixels();
  const std::size_t N = op.bands;
  if (y.size() != op.frames * P || gram.size() != pixels.size() * N * N || rhs.size() != pixels.size() * N)
    throw DataError("normal-equation buffers have wrong size");
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(pixels.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t p = pixels[i];
    double* G = gram.data() + i * N * N;
    double* b = rhs.data() + i * N;
    std::fill(G, G + N * N, 0.0);
    std::fill(b, b + N, 0.0);
    for (std::size_t k = 0; k < op.frames; ++k) {
      const double* row = op.row(k, p);
      const double yk = y[k * P + p];
      for (std::size_t a = 0; a < N; ++a) {
        b[a] += yk * row[a];
        for (std::size_t c = a; c < N; ++c) G[a * N + c] += row[a] * row[c];
      }
    }
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t c = 0; c < a; ++c) G[a * N + c] = G[c * N + a];
  }
}

void box_mean(std::span<const double> img, int width, int height, int radius, std::span<double> out) {
  const auto W = static_cast<std::size_t>(width);
  const auto H = static_cast<std::size_t>(height);
  if (img.size() != W * H || out.size() != W * H) throw DataError("box filter buffers have wrong size");
  if (radius < 0) throw DataError("box filter radius must be nonnegative");
  // Horizontal window sums from a per-row prefix, then vertical sums from a per-column prefix.
  std::vector<double> horiz(W * H);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    std::vector<double> prefix(W + 1, 0.0);
    const double* row = img.data() + static_cast<std::size_t>(y) * W;
    for (std::size_t x = 0; x < W; ++x) prefix[x + 1] = prefix[x] + row[x];
    for (int x = 0; x < width; ++x) {
      const int lo = std::max(0, x - radius);
      const int hi = std::min(width - 1, x + radius);
      horiz[static_cast<std::size_t>(y) * W + x] = prefix[hi + 1] - prefix[lo];
    }
  }
#pragma omp parallel for schedule(static)
  for (int x = 0; x < width; ++x) {
    std::vector<double> prefix(H + 1, 0.0);
    for (std::size_t y = 0; y < H; ++y) prefix[y + 1] = prefix[y] + horiz[y * W + x];
    const int wx = std::min(width - 1, x + radius) - std::max(0, x - radius) + 1;
    for (int y = 0; y < height; ++y) {
      const int lo = std::max(0, y - radius);
      const int hi = std::min(height - 1, y + radius);
      const int count = wx * (hi - lo + 1);
      out[static_cast<std::size_t>(y) * W + x] = (prefix[hi + 1] - prefix[lo]) / count;
    }
  }
}

double tv_charbonnier(std::span<const double> x, int width, int height, std::size_t bands, double eps,
                      double weight, std::span<double> grad) {
  const auto W = static_cast<std::size_t>(width);
  const auto H = static_cast<std::size_t>(height);
  const std::size_t N = bands;
  if (x.size() != W * H * N || grad.size() != x.size()) throw DataError("TV buffers have wrong size");
  const double eps2 = eps * eps;
  // Pass 1: per-element differences and magnitudes.
  std::vector<double> dx(x.size()), dy(x.size()), mag(x.size());
  std::vector<double> row_sum(H, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    double s = 0.0;
    for (int xx = 0; xx < width; ++xx) {
      const std::size_t p = static_cast<std::size_t>(y) * W + xx;
      for (std::size_t l = 0; l < N; ++l) {
        const std::size_t i = p * N + l;
        const double ddx = xx + 1 < width ? x[i + N] - x[i] : 0.0;
        const double ddy = y + 1 < height ? x[i + W * N] - x[i] : 0.0;
        const double m = std::sqrt(ddx * ddx + ddy * ddy + eps2);
        dx[i] = ddx;
        dy[i] = ddy;
        mag[i] = m;
        s += m;
      }
    }
    row_sum[static_cast<std::size_t>(y)] = s;
  }
  // Pass 2: gather gradient contributions from the element and its left/up neighbors.
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) {
      const std::size_t p = static_cast<std::size_t>(y) * W + xx;
      for (std::size_t l = 0; l < N; ++l) {
        const std::size_t i = p * N + l;
        double g = -(dx[i] + dy[i]) / mag[i];
        if (xx > 0) g += dx[i - N] / mag[i - N];
        if (y > 0) g += dy[i - W * N] / mag[i - W * N];
        grad[i] += weight * g;
      }
    }
  }
  double total = 0.0;
  for (double s : row_sum) total += s;
  return weight * total;
}

double spectral_smoothness(std::span<const double> x, std::size_t pixels, std::size_t bands, double weight,
                           std::span<double> grad) {
  if (x.size() != pixels * bands || grad.size() != x.size()) throw DataError("smoothness buffers have wrong size");
  std::vector<double> per_pixel(pixels, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(pixels); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const double* xp = x.data() + p * bands;
    double* gp = grad.data() + p * bands;
    double s = 0.0;
    for (std::size_t l = 0; l + 1 < bands; ++l) {
      const double d = xp[l + 1] - xp[l];
      s += d * d;
      gp[l + 1] += weight * 2.0 * d;
      gp[l] -= weight * 2.0 * d;
    }
    per_pixel[p] = s;
  }
  double total = 0.0;
  for (double s : per_pixel) total += s;
  return weight * total;
}

namespace serial {

void forward(const MeasurementOperator& op, std::span<const double> x, std::span<double> out) {
  check_sizes(op, x.size(), out.size());
  const std::size_t P = op.pixels();
  for (std::size_t k = 0; k < op.frames; ++k)
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0.0;
      for (std::size_t l = 0; l < op.bands; ++l) s += x[p * op.bands + l] * op.row(k, p)[l];
      out[k * P + p] = s;
    }
}

void adjoint_accumulate(const MeasurementOperator& op, std::span<const double> r, std::span<double> grad) {
  check_sizes(op, grad.size(), r.size());
  const std::size_t P = op.pixels();
  for (std::size_t k = 0; k < op.frames; ++k)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t l = 0; l < op.bands; ++l) grad[p * op.bands + l] += r[k * P + p] * op.row(k, p)[l];
}

void box_mean(std::span<const double> img, int width, int height, int radius, std::span<double> out) {
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      int count = 0;
      for (int v = std::max(0, y - radius); v <= std::min(height - 1, y + radius); ++v)
        for (int u = std::max(0, x - radius); u <= std::min(width - 1, x + radius); ++u) {
          s += img[static_cast<std::size_t>(v) * width + u];
          ++count;
        }
      out[static_cast<std::size_t>(y) * width + x] = s / count;
    }
}

double tv_charbonnier(std::span<const double> x, int width, int height, std::size_t bands, double eps,
                      double weight, std::span<double> grad) {
  const std::size_t W = static_cast<std::size_t>(width);
  double total = 0.0;
  for (int y = 0; y < height; ++y)
    for (int xx = 0; xx < width; ++xx)
      for (std::size_t l = 0; l < bands; ++l) {
        const std::size_t i = (static_cast<std::size_t>(y) * W + xx) * bands + l;
        const double ddx = xx + 1 < width ? x[i + bands] - x[i] : 0.0;
        const double ddy = y + 1 < height ? x[i + W * bands] - x[i] : 0.0;
        const double m = std::sqrt(ddx * ddx + ddy * ddy + eps * eps);
        total += m;
        grad[i] -= weight * (ddx + ddy) / m;
        if (xx + 1 < width) grad[i + bands] += weight * ddx / m;
        if (y + 1 < height) grad[i + W * bands] += weight * ddy / m;
      }
  return weight * total;
}

double spectral_smoothness(std::span<const double> x, std::size_t pixels, std::size_t bands, double weight,
                           std::span<double> grad) {
  double total = 0.0;
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t l = 0; l + 1 < bands; ++l) {
      const double d = x[p * bands + l + 1] - x[p * bands + l];
      total += d * d;
      grad[p * bands + l + 1] += weight * 2.0 * d;
      grad[p * bands + l] -= weight * 2.0 * d;
    }
  return weight * total;
}

}  // namespace serial
}  // namespace kernels
}  // namespace slmspec
