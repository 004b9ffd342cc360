// SLIC superpixels, rank-1 guided reconstruction and the guided filter.
#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "slmspec/error.hpp"
#include "slmspec/reconstruct.hpp"

namespace slmspec::recon {

namespace {

struct Lab {
  double l, a, b;
};

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

// Linear RGB in [0, 1] (sRGB primaries, D65) to CIELAB.
Lab rgb_to_lab(double r, double g, double b) {
  const double X = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double Z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  const double fx = lab_f(X), fy = lab_f(Y), fz = lab_f(Z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::vector<Lab> guide_lab(const GuideImage& guide) {
  if (guide.channels != 1 && guide.channels != 3) throw DataError("guide must have one or three channels");
  const std::size_t P = static_cast<std::size_t>(guide.width) * guide.height;
  if (guide.data.size() != P * guide.channels) throw DataError("guide payload size mismatch");
  float peak = 0.0f;
  for (float v : guide.data) {
    if (!std::isfinite(v) || v < 0.0f) throw DataError("guide values must be finite and nonnegative");
    peak = std::max(peak, v);
  }
  const double inv = peak > 0.0f ? 1.0 / peak : 0.0;
  std::vector<Lab> lab(P);
  for (std::size_t p = 0; p < P; ++p) {
    const float* px = guide.data.data() + p * guide.channels;
    const double r = px[0] * inv;
    const double g = guide.channels == 3 ? px[1] * inv : r;
    const double b = guide.channels == 3 ? px[2] * inv : r;
    lab[p] = rgb_to_lab(r, g, b);
  }
  return lab;
}

struct Center {
  double l, a, b, x, y;
};

}  // namespace

SuperpixelMap relabel_connected(int width, int height, std::span<const int> labels) {
  const std::size_t P = static_cast<std::size_t>(width) * height;
  if (labels.size() != P) throw DataError("label map size mismatch");
  SuperpixelMap out;
  out.width = width;
  out.height = height;
  out.labels.assign(P, -1);
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t s = 0; s < P; ++s) {
    if (out.labels[s] >= 0) continue;
    out.labels[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int i = 0; i < 4; ++i) {
        if (nx[i] < 0 || ny[i] < 0 || nx[i] >= width || ny[i] >= height) continue;
        const std::size_t q = static_cast<std::size_t>(ny[i]) * width + nx[i];
        if (out.labels[q] < 0 && labels[q] == labels[s]) {
          out.labels[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  out.count = next;
  return out;
}

SuperpixelMap slic_superpixels(const GuideImage& guide, int q, double compactness, int iterations) {
  if (q < 1) throw DataError("superpixel count must be at least 1");
  if (!(compactness > 0.0)) throw DataError("compactness must be positive");
  const int W = guide.width, H = guide.height;
  const std::size_t P = static_cast<std::size_t>(W) * H;
  if (P == 0) throw DataError("guide is empty");
  if (static_cast<std::size_t>(q) > P) throw DataError("more superpixels requested than pixels");
  const std::vector<Lab> lab = guide_lab(guide);

  const double S = std::sqrt(static_cast<double>(P) / q);
  const int ny = std::max(1, static_cast<int>(std::lround(H / S)));
  const int nx = std::max(1, static_cast<int>(std::lround(static_cast<double>(q) / ny)));
  std::vector<Center> centers;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * W / nx, cy = (j + 0.5) * H / ny;
      const auto p = static_cast<std::size_t>(std::min(H - 1, int(cy))) * W + std::min(W - 1, int(cx));
      centers.push_back({lab[p].l, lab[p].a, lab[p].b, cx, cy});
    }
  const std::size_t K = centers.size();
  const double spatial = compactness * compactness / (S * S);
  std::vector<int> label(P, 0);

  // Centers bucketed on an S-sized grid so each pixel only scans nearby ones.
  const int bw = std::max(1, static_cast<int>(std::ceil(W / S))), bh = std::max(1, static_cast<int>(std::ceil(H / S)));
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::vector<int>> bucket(static_cast<std::size_t>(bw) * bh);
    for (std::size_t k = 0; k < K; ++k) {
      const int bx = std::clamp(static_cast<int>(centers[k].x / S), 0, bw - 1);
      const int by = std::clamp(static_cast<int>(centers[k].y / S), 0, bh - 1);
      bucket[static_cast<std::size_t>(by) * bw + bx].push_back(static_cast<int>(k));
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        const Lab& c = lab[p];
        double best = std::numeric_limits<double>::infinity();
        int arg = -1;
        const int bx0 = std::max(0, static_cast<int>((x - S) / S) - 1), bx1 = std::min(bw - 1, static_cast<int>((x + S) / S) + 1);
        const int by0 = std::max(0, static_cast<int>((y - S) / S) - 1), by1 = std::min(bh - 1, static_cast<int>((y + S) / S) + 1);
        for (int by = by0; by <= by1; ++by)
          for (int bx = bx0; bx <= bx1; ++bx)
            for (int k : bucket[static_cast<std::size_t>(by) * bw + bx]) {
              const Center& ce = centers[static_cast<std::size_t>(k)];
              const double dx = x + 0.5 - ce.x, dy = y + 0.5 - ce.y;
              if (std::abs(dx) > S || std::abs(dy) > S) continue;
              const double dl = c.l - ce.l, da = c.a - ce.a, db = c.b - ce.b;
              const double d = dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial;
              if (d < best || (d == best && k < arg)) {
                best = d;
                arg = k;
              }
            }
        if (arg < 0) {
          // No center within the search window: fall back to the spatially nearest one.
          for (std::size_t k = 0; k < K; ++k) {
            const double dx = x + 0.5 - centers[k].x, dy = y + 0.5 - centers[k].y;
            const double d = dx * dx + dy * dy;
            if (d < best) {
              best = d;
              arg = static_cast<int>(k);
            }
          }
        }
        label[p] = arg;
      }
    std::vector<Center> sum(K, Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> count(K, 0);
    for (std::size_t p = 0; p < P; ++p) {
      auto& s = sum[static_cast<std::size_t>(label[p])];
      s.l += lab[p].l;
      s.a += lab[p].a;
      s.b += lab[p].b;
      s.x += static_cast<double>(p % W) + 0.5;
      s.y += static_cast<double>(p / W) + 0.5;
      ++count[static_cast<std::size_t>(label[p])];
    }
    for (std::size_t k = 0; k < K; ++k)
      if (count[k] > 0) {
        const double n = static_cast<double>(count[k]);
        centers[k] = {sum[k].l / n, sum[k].a / n, sum[k].b / n, sum[k].x / n, sum[k].y / n};
      }
  }

  // Connectivity: each small fragment joins the adjacent segment whose mean
  // color is closest, visiting fragments in raster order of their first pixel.
  SuperpixelMap parts = relabel_connected(W, H, label);
  const auto n_parts = static_cast<std::size_t>(parts.count);
  std::vector<std::size_t> size(n_parts, 0);
  std::vector<Lab> mean(n_parts, Lab{0, 0, 0});
  for (std::size_t p = 0; p < P; ++p) {
    const auto l = static_cast<std::size_t>(parts.labels[p]);
    ++size[l];
    mean[l].l += lab[p].l;
    mean[l].a += lab[p].a;
    mean[l].b += lab[p].b;
  }
  std::vector<std::vector<int>> adjacent(n_parts);
  for (std::size_t p = 0; p < P; ++p) {
    const int l = parts.labels[p];
    if (p % W + 1 < static_cast<std::size_t>(W) && parts.labels[p + 1] != l) {
      adjacent[static_cast<std::size_t>(l)].push_back(parts.labels[p + 1]);
      adjacent[static_cast<std::size_t>(parts.labels[p + 1])].push_back(l);
    }
    if (p + W < P && parts.labels[p + W] != l) {
      adjacent[static_cast<std::size_t>(l)].push_back(parts.labels[p + W]);
      adjacent[static_cast<std::size_t>(parts.labels[p + W])].push_back(l);
    }
  }
  const auto min_size = static_cast<std::size_t>(std::max(1.0, S * S / 4.0));
  std::vector<int> target(n_parts);
  for (std::size_t l = 0; l < n_parts; ++l) target[l] = static_cast<int>(l);
  auto root = [&](int l) {
    while (target[static_cast<std::size_t>(l)] != l) l = target[static_cast<std::size_t>(l)];
    return l;
  };
  for (std::size_t l = 0; l < n_parts; ++l) {
    if (size[l] >= min_size) continue;
    const double n = static_cast<double>(size[l]);
    const Lab c{mean[l].l / n, mean[l].a / n, mean[l].b / n};
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int a : adjacent[l]) {
      const int r = root(a);
      if (r == static_cast<int>(l)) continue;
      const auto ru = static_cast<std::size_t>(r);
      const double m = static_cast<double>(size[ru]);
      const double dl = c.l - mean[ru].l / m, da = c.a - mean[ru].a / m, db = c.b - mean[ru].b / m;
      const double d = dl * dl + da * da + db * db;
      if (d < best_d || (d == best_d && r < best)) {
        best_d = d;
        best = r;
      }
    }
    if (best < 0) continue;  // the only segment in the frame
    const auto bu = static_cast<std::size_t>(best);
    target[l] = best;
    size[bu] += size[l];
    mean[bu].l += mean[l].l;
    mean[bu].a += mean[l].a;
    mean[bu].b += mean[l].b;
  }
  std::vector<int> merged(P);
  for (std::size_t p = 0; p < P; ++p) merged[p] = root(parts.labels[p]);
  SuperpixelMap out = relabel_connected(W, H, merged);
  out.compactness = compactness;
  return out;
}

// ---------------------------------------------------------------------------
// Rank-1

void GuidedConfig::validate() const {
  if (q_superpixels && *q_superpixels < 1) throw DataError("q must be at least 1");
  if (q_base && !(*q_base > 0.0)) throw DataError("q_base must be positive");
  if (ridge_eta && !(*ridge_eta > 0.0)) throw DataError("ridge eta must be positive");
  if (!(compactness > 0.0)) throw DataError("compactness must be positive");
  if (guided_filter_radius < 0 || !(guided_filter_eps > 0.0)) throw DataError("invalid guided filter parameters");
}

double rank1_ridge_eta(std::size_t captures) {
  if (captures < 1) throw DataError("ridge schedule needs at least one capture");
  const double t = std::min(1.0, static_cast<double>(captures - 1) / 255.0);
  return 1e-5 + t * (1e-6 - 1e-5);
}

int rank1_superpixel_count(std::size_t pixels, std::size_t captures, const GuidedConfig& cfg) {
  if (cfg.q_superpixels) return std::min<int>(*cfg.q_superpixels, static_cast<int>(pixels));
  const double base = cfg.q_base.value_or(static_cast<double>(pixels) / 256.0);
  const double k = static_cast<double>(std::max<std::size_t>(captures, 1));
  const double q = base * (cfg.q_schedule == QSchedule::Sqrt ? std::sqrt(k) : k);
  return static_cast<int>(std::clamp<double>(std::lround(q), 1.0, static_cast<double>(pixels)));
}

Rank1Result reconstruct_rank1(const sim::CaptureSet& captures, const GuideImage& guide, const GuidedConfig& cfg) {
  cfg.validate();
  captures.validate();
  const std::size_t P = static_cast<std::size_t>(captures.width()) * captures.height();
  const int q = rank1_superpixel_count(P, captures.size(), cfg);
  if (guide.width != captures.width() || guide.height != captures.height())
    throw DataError("guide is not registered to the captures");
  return reconstruct_rank1(captures, guide, slic_superpixels(guide, q, cfg.compactness), cfg);
}

Rank1Result reconstruct_rank1(const sim::CaptureSet& captures, const GuideImage& guide, const SuperpixelMap& labels,
                              const GuidedConfig& cfg) {
  cfg.validate();
  captures.validate();
  const int W = captures.width(), H = captures.height();
  const std::size_t P = static_cast<std::size_t>(W) * H;
  if (guide.width != W || guide.height != H) throw DataError("guide is not registered to the captures");
  if (labels.width != W || labels.height != H || labels.labels.size() != P || labels.count < 1)
    throw DataError("superpixel map does not match the captures");
  for (int l : labels.labels)
    if (l < 0 || l >= labels.count) throw DataError("superpixel label out of range");

  const MeasurementOperator op = sim::make_operator(captures.patterns, captures.bank, captures.sensor);
  const std::size_t N = op.bands;
  const std::size_t K = op.frames;

  Rank1Result res;
  res.superpixels = labels;
  res.eta = cfg.ridge_eta.value_or(rank1_ridge_eta(K));

  const std::vector<double> g = guide.gray();
  res.guide_peak = *std::max_element(g.begin(), g.end());
  double ipeak = 0.0;
  for (const auto& m : captures.measurements)
    for (float v : m.data) ipeak = std::max(ipeak, double(v));
  res.measurement_peak = ipeak;
  const double ginv = res.guide_peak > 0.0 ? 1.0 / res.guide_peak : 0.0;
  const double iinv = ipeak > 0.0 ? 1.0 / ipeak : 0.0;

  const auto Q = static_cast<std::size_t>(labels.count);
  std::vector<std::vector<std::size_t>> members(Q);
  for (std::size_t p = 0; p < P; ++p) members[static_cast<std::size_t>(labels.labels[p])].push_back(p);

  res.spectra.assign(Q * N, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(Q); ++qi) {
    const auto sq = static_cast<std::size_t>(qi);
    const auto n = static_cast<Eigen::Index>(N);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (std::size_t p : members[sq]) {
      const double gp = g[p] * ginv;
      if (gp == 0.0) continue;
      for (std::size_t k = 0; k < K; ++k) {
        Eigen::Map<const Eigen::VectorXd> phi(op.row(k, p), n);
        A.selfadjointView<Eigen::Lower>().rankUpdate(phi, gp * gp);
        b += (gp * captures.measurements[k].data[p] * iinv) * phi;
      }
    }
    Eigen::MatrixXd M = A.selfadjointView<Eigen::Lower>();
    M.diagonal().array() += res.eta;
    const Eigen::VectorXd s = M.ldlt().solve(b);
    for (std::size_t l = 0; l < N; ++l) res.spectra[sq * N + l] = s[static_cast<Eigen::Index>(l)];
  }

  // X = g s^T in normalized units; back to radiance via the measurement peak and exposure.
  res.cube = HyperspectralCube(W, H, captures.bank.grid);
  auto data = res.cube.data();
  const double back = ipeak / captures.electrons_per_unit;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const double gp = g[p] * ginv;
    const double* s = res.spectra.data() + static_cast<std::size_t>(labels.labels[p]) * N;
    for (std::size_t l = 0; l < N; ++l) data[p * N + l] = static_cast<float>(std::max(0.0, gp * s[l] * back));
  }
  if (cfg.postfilter) res.cube = guided_filter(res.cube, guide, cfg.guided_filter_radius, cfg.guided_filter_eps);
  return res;
}

// ---------------------------------------------------------------------------
// Guided filter

HyperspectralCube guided_filter(const HyperspectralCube& cube, const GuideImage& guide, int radius, double eps) {
  const int W = cube.width(), H = cube.height();
  if (guide.width != W || guide.height != H) throw DataError("guide and cube sizes differ");
  if (radius < 0 || radius >= std::min(W, H)) throw DataError("guided filter radius must be below the frame size");
  if (!(eps > 0.0)) throw DataError("guided filter eps must be positive");
  const std::size_t P = cube.pixels();
  const std::size_t N = cube.bands();

  std::vector<double> I = guide.gray();
  const double peak = *std::max_element(I.begin(), I.end());
  if (peak > 0.0)
    for (double& v : I) v /= peak;
  std::vector<double> mean_I(P), corr_II(P), II(P);
  for (std::size_t p = 0; p < P; ++p) II[p] = I[p] * I[p];
  kernels::box_mean(I, W, H, radius, mean_I);
  kernels::box_mean(II, W, H, radius, corr_II);

  HyperspectralCube out(W, H, cube.grid());
  auto src = cube.data();
  auto dst = out.data();
  std::vector<double> p_band(P), Ip(P), mean_p(P), corr_Ip(P), a(P), b(P), mean_a(P), mean_b(P);
  for (std::size_t l = 0; l < N; ++l) {
    for (std::size_t p = 0; p < P; ++p) {
      p_band[p] = src[p * N + l];
      Ip[p] = I[p] * p_band[p];
    }
    kernels::box_mean(p_band, W, H, radius, mean_p);
    kernels::box_mean(Ip, W, H, radius, corr_Ip);
    for (std::size_t p = 0; p < P; ++p) {
      const double var = corr_II[p] - mean_I[p] * mean_I[p];
      const double cov = corr_Ip[p] - mean_I[p] * mean_p[p];
      a[p] = cov / (var + eps);
      b[p] = mean_p[p] - a[p] * mean_I[p];
    }
    kernels::box_mean(a, W, H, radius, mean_a);
    kernels::box_mean(b, W, H, radius, mean_b);
    for (std::size_t p = 0; p < P; ++p) dst[p * N + l] = static_cast<float>(mean_a[p] * I[p] + mean_b[p]);
  }
  return out;
}

}  // namespace slmspec::recon
