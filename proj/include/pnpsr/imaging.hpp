#pragma once

#include <cstdint>
#include <optional>

#include "pnpsr/grid.hpp"

namespace pnpsr {

struct GroundTruth {
  ImageGrid image;
  KernelGrid kernel;
};

/// One blind super-resolution instance: low-res observation `observed`, the
/// scale factor, the kernel side to estimate, and optionally the truth.
struct Problem {
  ImageGrid observed;
  std::size_t scale = 1;
  std::size_t kernel_side = 1;
  std::optional<GroundTruth> ground_truth;
  double noise_std = 0.0;

  std::size_t hr_height() const noexcept { return observed.height() * scale; }
  std::size_t hr_width() const noexcept { return observed.width() * scale; }
};

/// Periodic 2D convolution kernel * x, output the same size as x.
ImageGrid convolve_periodic(const ImageGrid& x, const KernelGrid& kernel);
/// Adjoint of convolve_periodic (periodic correlation).
ImageGrid correlate_periodic(const ImageGrid& y, const KernelGrid& kernel);

/// Keeps the sample at offset (0,0) of each s x s block.
ImageGrid downsample(const ImageGrid& x, std::size_t s);
/// Zero-insertion upsampling, the adjoint of downsample.
ImageGrid upsample_adjoint(const ImageGrid& y, std::size_t s);

/// downsample(convolve_periodic(x, kernel), s)
ImageGrid forward_model(const ImageGrid& x, const KernelGrid& kernel, std::size_t s);

/// 0.5 * ||forward_model(x, kernel, s) - b||^2
double datafit(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b, std::size_t s);

ImageGrid grad_x_datafit(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b,
                         std::size_t s);

/// Gradient with respect to the kernel taps: periodic cross-correlation of x
/// with the zero-upsampled residual, cropped to the p x p window.
KernelGrid grad_theta_datafit(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b,
                              std::size_t s);

/// b = forward_model(x_true, kernel_true, s) + noise. Noise is drawn by
/// `gaussian_noise` from a std::mt19937_64 stream seeded with `seed`.
Problem generate_synthetic(const ImageGrid& x_true, const KernelGrid& kernel_true, std::size_t s,
                           double noise_std, std::uint64_t seed, double cap = 1.0);

/// n samples of N(0, stddev^2) using Box-Muller on the 53-bit uniforms of a
/// std::mt19937_64 engine. Both pieces are fully specified by the standard,
/// so the stream is identical on every conforming platform.
std::vector<double> gaussian_noise(std::size_t n, double stddev, std::uint64_t seed);

}  // namespace pnpsr
