#include "slmspec/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "slmspec/error.hpp"

namespace slmspec::recon {

namespace {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

std::vector<double> stacked_measurements(const sim::CaptureSet& set) {
  const std::size_t P = static_cast<std::size_t>(set.width()) * set.height();
  std::vector<double> y(set.size() * P);
  for (std::size_t k = 0; k < set.size(); ++k)
    for (std::size_t p = 0; p < P; ++p) y[k * P + p] = set.measurements[k].data[p];
  return y;
}

// Groups pixels by their sequence of filter indices, in order of first appearance.
std::vector<std::size_t> group_pixels(const MeasurementOperator& op, std::vector<std::size_t>& representative) {
  const std::size_t P = op.pixels();
  std::vector<std::size_t> group(P);
  std::map<std::string, std::size_t> seen;
  std::string key(op.frames, '\0');
  representative.clear();
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t k = 0; k < op.frames; ++k) key[k] = static_cast<char>(op.indices[k * P + p]);
    auto [it, inserted] = seen.emplace(key, representative.size());
    if (inserted) representative.push_back(p);
    group[p] = it->second;
  }
  return group;
}

// Gram matrix sum_k row row^T for one pixel.
MatX pixel_gram(const MeasurementOperator& op, std::size_t p) {
  const auto N = static_cast<Eigen::Index>(op.bands);
  MatX G = MatX::Zero(N, N);
  for (std::size_t k = 0; k < op.frames; ++k) {
    Eigen::Map<const VecX> r(op.row(k, p), N);
    G.selfadjointView<Eigen::Lower>().rankUpdate(r);
  }
  return G.selfadjointView<Eigen::Lower>();
}

}  // namespace

HyperspectralCube reconstruct_lsq(const sim::CaptureSet& set, double ridge_rel) {
  set.validate();
  if (!(ridge_rel >= 0.0)) throw DataError("ridge must be nonnegative");
  const MeasurementOperator op = sim::make_operator(set.patterns, set.bank, set.sensor);
  const std::vector<double> y = stacked_measurements(set);
  const std::size_t P = op.pixels();
  const std::size_t N = op.bands;

  std::vector<std::size_t> rep;
  const std::vector<std::size_t> group = group_pixels(op, rep);
  std::vector<Eigen::LLT<MatX>> factors(rep.size());
  std::vector<int> failed(rep.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(rep.size()); ++gi) {
    const auto g = static_cast<std::size_t>(gi);
    MatX G = pixel_gram(op, rep[g]);
    const double ridge = ridge_rel * G.trace() / static_cast<double>(N);
    G.diagonal().array() += ridge;
    factors[g].compute(G);
    if (factors[g].info() != Eigen::Success) {
      failed[g] = 1;
    } else if (ridge_rel == 0.0) {
      // Cholesky can succeed on a numerically singular matrix; check the pivots.
      const VecX d = factors[g].matrixL().toDenseMatrix().diagonal();
      if (d.minCoeff() <= 1e-12 * d.maxCoeff()) failed[g] = 1;
    }
  }
  if (std::any_of(failed.begin(), failed.end(), [](int f) { return f != 0; }))
    throw NumericError("least-squares normal matrix is singular; use a positive ridge");

  HyperspectralCube out(set.width(), set.height(), set.bank.grid);
  auto data = out.data();
  const double inv_scale = 1.0 / set.electrons_per_unit;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    VecX b = VecX::Zero(static_cast<Eigen::Index>(N));
    for (std::size_t k = 0; k < op.frames; ++k) {
      Eigen::Map<const VecX> r(op.row(k, p), static_cast<Eigen::Index>(N));
      b += y[k * P + p] * r;
    }
    const VecX s = factors[group[p]].solve(b) * inv_scale;
    for (std::size_t l = 0; l < N; ++l) data[p * N + l] = static_cast<float>(s[static_cast<Eigen::Index>(l)]);
  }
  return out;
}

HyperspectralCube reconstruct_lsq_fullscan(const sim::CaptureSet& full, double ridge_rel) {
  if (full.size() != 256) throw DataError("full-scan reconstruction needs all 256 frames");
  for (std::size_t r = 0; r < 256; ++r) {
    const auto& v = full.patterns[r].values;
    if (std::any_of(v.begin(), v.end(), [r](std::uint8_t i) { return i != r; }))
      throw DataError("full scan frame " + std::to_string(r) + " is not constant index " + std::to_string(r));
  }
  return reconstruct_lsq(full, ridge_rel);
}

// ---------------------------------------------------------------------------
// TV

void TvConfig::validate() const {
  if (eta_tv && !(*eta_tv >= 0.0)) throw DataError("eta_tv must be nonnegative");
  if (!(eta_spectral >= 0.0)) throw DataError("eta_spectral must be nonnegative");
  if (iterations < 1) throw DataError("TV needs at least one iteration");
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw DataError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0) || !(charbonnier_eps > 0.0)) throw DataError("epsilons must be positive");
}

double default_eta_tv(double max_electrons) {
  if (!(max_electrons > 0.0)) throw DataError("max_electrons must be positive");
  return 100.0 / std::sqrt(max_electrons);
}

TvProblem::TvProblem(MeasurementOperator op, std::vector<double> measurements, double eta_tv, double eta_spectral,
                     double charbonnier_eps, TvConfig::DataTerm data_term)
    : op_(std::move(op)), y_(std::move(measurements)), eta_tv_(eta_tv), eta_spectral_(eta_spectral),
      eps_(charbonnier_eps) {
  op_.validate();
  if (y_.size() != op_.frames * op_.pixels()) throw DataError("measurement stack does not match the operator");
  gram_mode_ = data_term == TvConfig::DataTerm::Gram ||
               (data_term == TvConfig::DataTerm::Auto && op_.frames > op_.bands);
  if (!gram_mode_) return;

  const std::size_t P = op_.pixels();
  const std::size_t N = op_.bands;
  std::vector<std::size_t> rep;
  group_ = group_pixels(op_, rep);
  gram_.resize(rep.size() * N * N);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(rep.size()); ++gi) {
    const MatX G = pixel_gram(op_, rep[static_cast<std::size_t>(gi)]);
    Eigen::Map<MatX>(gram_.data() + static_cast<std::size_t>(gi) * N * N, static_cast<Eigen::Index>(N),
                     static_cast<Eigen::Index>(N)) = G;
  }
  rhs_.assign(P * N, 0.0);
  yy_.assign(P, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    double* b = rhs_.data() + p * N;
    double c = 0.0;
    for (std::size_t k = 0; k < op_.frames; ++k) {
      const double yk = y_[k * P + p];
      const double* r = op_.row(k, p);
      for (std::size_t l = 0; l < N; ++l) b[l] += yk * r[l];
      c += yk * yk;
    }
    yy_[p] = c;
  }
}

double TvProblem::data_term(std::span<const double> x, std::span<double> grad) const {
  const std::size_t P = op_.pixels();
  const std::size_t N = op_.bands;
  std::vector<double> partial(P, 0.0);
  if (gram_mode_) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
      const auto p = static_cast<std::size_t>(pi);
      const double* G = gram_.data() + group_[p] * N * N;
      const double* b = rhs_.data() + p * N;
      const double* xp = x.data() + p * N;
      double quad = 0.0, lin = 0.0;
      for (std::size_t a = 0; a < N; ++a) {
        double gx = 0.0;
        for (std::size_t c = 0; c < N; ++c) gx += G[a * N + c] * xp[c];
        quad += xp[a] * gx;
        lin += b[a] * xp[a];
        grad[p * N + a] = 2.0 * (gx - b[a]);
      }
      partial[p] = quad - 2.0 * lin + yy_[p];
    }
  } else {
    std::vector<double> r(op_.frames * P);
    kernels::forward(op_, x, r);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
      const auto p = static_cast<std::size_t>(pi);
      double s = 0.0;
      for (std::size_t k = 0; k < op_.frames; ++k) {
        const double d = r[k * P + p] - y_[k * P + p];
        r[k * P + p] = 2.0 * d;
        s += d * d;
      }
      partial[p] = s;
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    kernels::adjoint_accumulate(op_, r, grad);
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

double TvProblem::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  if (x.size() != size() || grad.size() != size()) throw DataError("TV iterate has the wrong size");
  double f = data_term(x, grad);
  if (eta_tv_ > 0.0) f += kernels::tv_charbonnier(x, op_.width, op_.height, op_.bands, eps_, eta_tv_, grad);
  if (eta_spectral_ > 0.0) f += kernels::spectral_smoothness(x, op_.pixels(), op_.bands, eta_spectral_, grad);
  return f;
}

double TvProblem::objective(std::span<const double> x) const {
  std::vector<double> g(size());
  return value_and_gradient(x, g);
}

TvResult reconstruct_tv(const sim::CaptureSet& captures, const TvConfig& cfg) {
  captures.validate();
  cfg.validate();
  const double eta_tv = cfg.eta_tv.value_or(default_eta_tv(captures.noise.max_electrons));
  MeasurementOperator op = sim::make_operator(captures.patterns, captures.bank, captures.sensor);
  std::vector<double> y = stacked_measurements(captures);

  // Iterate on U = X / c so that a unit step moves X on the scale of the data.
  double row_max = 0.0;
  for (std::size_t r = 0; r < 256; ++r) {
    double s = 0.0;
    for (std::size_t l = 0; l < op.bands; ++l) s += op.bank[r * op.bands + l];
    row_max = std::max(row_max, s);
  }
  const double y_max = y.empty() ? 0.0 : *std::max_element(y.begin(), y.end());
  const double c = (y_max > 0.0 && row_max > 0.0) ? y_max / row_max : 1.0;

  const TvProblem problem(std::move(op), std::move(y), eta_tv, cfg.eta_spectral, cfg.charbonnier_eps, cfg.data_term);
  const std::size_t n = problem.size();
  std::vector<double> x(n, 0.0), g(n), m(n, 0.0), v(n, 0.0);
  TvResult res;
  res.objective_trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);

  double b1t = 1.0, b2t = 1.0;
  for (int it = 0; it <= cfg.iterations; ++it) {
    const double f = problem.value_and_gradient(x, g);
    if (!std::isfinite(f)) throw NumericError("TV objective became non-finite at iteration " + std::to_string(it));
    res.objective_trace.push_back(f);
    if (it == cfg.iterations) break;
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    const double a = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const double gu = c * g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gu;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gu * gu;
      // Step in U, mapped back to X.
      x[i] -= c * a * m[i] / (std::sqrt(v[i]) + cfg.adam_eps * std::sqrt(1.0 - b2t));
    }
  }

  res.cube = HyperspectralCube(captures.width(), captures.height(), captures.bank.grid);
  auto data = res.cube.data();
  const double inv_scale = 1.0 / captures.electrons_per_unit;
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(std::max(x[i], 0.0) * inv_scale);
  return res;
}

}  // namespace slmspec::recon
