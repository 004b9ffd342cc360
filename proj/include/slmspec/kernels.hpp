#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace slmspec {

/// The per-pixel coded measurement operator: frame k at pixel p sees filter
/// row bank[indices[k * pixels + p]]. The bank already includes the sensor
/// response, so i_k(p) = <x_p, row>.
struct MeasurementOperator {
  int width = 0;
  int height = 0;
  std::size_t bands = 0;
  std::size_t frames = 0;
  std::vector<std::uint8_t> indices;  // frames x pixels
  std::vector<double> bank;           // 256 x bands

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }
  const double* row(std::size_t frame, std::size_t pixel) const noexcept {
    return bank.data() + static_cast<std::size_t>(indices[frame * pixels() + pixel]) * bands;
  }
  void validate() const;
};

}  // namespace slmspec

// Data-parallel kernels. The top-level functions are the OpenMP versions used
// throughout the library; kernels::serial holds plain reference loops kept for
// tests and for the benchmark. Every parallel kernel partitions work so that
// each output element is produced by exactly one thread with a fixed
// summation order, so results do not depend on the thread count.
namespace slmspec::kernels {

/// out[k * P + p] = <x_p, row(k, p)>.  x is P x bands, pixel-interleaved.
void forward(const MeasurementOperator& op, std::span<const double> x, std::span<double> out);

/// grad[p * N + l] += sum_k r[k * P + p] * row(k, p)[l].
void adjoint_accumulate(const MeasurementOperator& op, std::span<const double> r, std::span<double> grad);

/// Per-pixel normal-equation blocks: gram[p] = sum_k row row^T (N x N, row-major),
/// rhs[p] = sum_k y_k(p) row.  Only pixels listed in `pixels` are computed.
void pixel_normal_equations(const MeasurementOperator& op, std::span<const double> y,
                            std::span<const std::size_t> pixels, std::span<double> gram,
                            std::span<double> rhs);

/// Box mean over a (2r+1)^2 window clipped at the borders.
void box_mean(std::span<const double> img, int width, int height, int radius, std::span<double> out);

/// Isotropic Charbonnier TV summed over bands: weight * sum sqrt(dx^2 + dy^2 + eps^2), forward
/// differences with zero difference past the last row/column. Adds the gradient to grad.
double tv_charbonnier(std::span<const double> x, int width, int height, std::size_t bands, double eps,
                      double weight, std::span<double> grad);

/// weight * sum_p sum_l (x[l+1] - x[l])^2; adds the gradient to grad.
double spectral_smoothness(std::span<const double> x, std::size_t pixels, std::size_t bands, double weight,
                           std::span<double> grad);

namespace serial {

void forward(const MeasurementOperator& op, std::span<const double> x, std::span<double> out);
void adjoint_accumulate(const MeasurementOperator& op, std::span<const double> r, std::span<double> grad);
void box_mean(std::span<const double> img, int width, int height, int radius, std::span<double> out);
double tv_charbonnier(std::span<const double> x, int width, int height, std::size_t bands, double eps,
                      double weight, std::span<double> grad);
double spectral_smoothness(std::span<const double> x, std::size_t pixels, std::size_t bands, double weight,
                           std::span<double> grad);

}  // namespace serial
}  // namespace slmspec::kernels
