#include "pnpsr/imaging.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "pnpsr/errors.hpp"
#include "pnpsr/fft.hpp"

namespace pnpsr {

namespace {

void require_kernel_fits(const ImageGrid& x, const KernelGrid& kernel) {
  if (kernel.side() > x.height() || kernel.side() > x.width()) {
    throw InvalidInput("kernel side " + std::to_string(kernel.side()) + " exceeds image " +
                       std::to_string(x.height()) + "x" + std::to_string(x.width()));
  }
}

void require_divisible(const ImageGrid& x, std::size_t s) {
  if (s == 0) throw InvalidInput("scale factor must be positive");
  if (x.height() % s != 0 || x.width() % s != 0) {
    throw InvalidInput("image " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                       " not divisible by scale " + std::to_string(s));
  }
}

void require_observation_shape(const ImageGrid& x, const ImageGrid& b, std::size_t s) {
  require_divisible(x, s);
  if (b.height() * s != x.height() || b.width() * s != x.width()) {
    throw InvalidInput("observation shape does not match high-res shape / scale");
  }
}

// S^T (S(kernel * x) - b), the high-res residual shared by both gradients.
ImageGrid upsampled_residual(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b,
                             std::size_t s) {
  return upsample_adjoint(forward_model(x, kernel, s) - b, s);
}

}  // namespace

ImageGrid convolve_periodic(const ImageGrid& x, const KernelGrid& kernel) {
  require_kernel_fits(x, kernel);
  Spectrum X = fft2(x);
  const Spectrum K = kernel_spectrum(kernel, x.height(), x.width());
  for (std::size_t i = 0; i < X.data.size(); ++i) X.data[i] *= K.data[i];
  return ifft2_real(X);
}

ImageGrid correlate_periodic(const ImageGrid& y, const KernelGrid& kernel) {
  require_kernel_fits(y, kernel);
  Spectrum Y = fft2(y);
  const Spectrum K = kernel_spectrum(kernel, y.height(), y.width());
  for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= std::conj(K.data[i]);
  return ifft2_real(Y);
}

ImageGrid downsample(const ImageGrid& x, std::size_t s) {
  require_divisible(x, s);
  ImageGrid y(x.height() / s, x.width() / s);
  for (std::size_t r = 0; r < y.height(); ++r) {
    for (std::size_t c = 0; c < y.width(); ++c) y(r, c) = x(r * s, c * s);
  }
  return y;
}

ImageGrid upsample_adjoint(const ImageGrid& y, std::size_t s) {
  if (s == 0) throw InvalidInput("scale factor must be positive");
  ImageGrid x(y.height() * s, y.width() * s);
  for (std::size_t r = 0; r < y.height(); ++r) {
    for (std::size_t c = 0; c < y.width(); ++c) x(r * s, c * s) = y(r, c);
  }
  return x;
}

ImageGrid forward_model(const ImageGrid& x, const KernelGrid& kernel, std::size_t s) {
  require_divisible(x, s);
  return downsample(convolve_periodic(x, kernel), s);
}

double datafit(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b, std::size_t s) {
  require_observation_shape(x, b, s);
  return 0.5 * squared_distance(forward_model(x, kernel, s).data(), b.data());
}

ImageGrid grad_x_datafit(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b,
                         std::size_t s) {
  require_observation_shape(x, b, s);
  return correlate_periodic(upsampled_residual(x, kernel, b, s), kernel);
}

KernelGrid grad_theta_datafit(const ImageGrid& x, const KernelGrid& kernel, const ImageGrid& b,
                              std::size_t s) {
  require_observation_shape(x, b, s);
  require_kernel_fits(x, kernel);
  const ImageGrid residual = upsampled_residual(x, kernel, b, s);

  // corr[u, v] = sum_{i,j} residual[i, j] * x[i - u, j - v]
  Spectrum R = fft2(residual);
  const Spectrum X = fft2(x);
  for (std::size_t i = 0; i < R.data.size(); ++i) R.data[i] *= std::conj(X.data[i]);
  const ImageGrid corr = ifft2_real(R);

  const auto h = static_cast<long>(x.height());
  const auto w = static_cast<long>(x.width());
  const auto c = static_cast<long>(kernel.center());
  KernelGrid g(kernel.side());
  for (std::size_t a = 0; a < kernel.side(); ++a) {
    const long r = ((static_cast<long>(a) - c) % h + h) % h;
    for (std::size_t bcol = 0; bcol < kernel.side(); ++bcol) {
      const long col = ((static_cast<long>(bcol) - c) % w + w) % w;
      g(a, bcol) = corr(static_cast<std::size_t>(r), static_cast<std::size_t>(col));
    }
  }
  return g;
}

std::vector<double> gaussian_noise(std::size_t n, double stddev, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  auto uniform = [&engine]() {
    // 53 random bits -> (0, 1]; never returns 0 so log() is finite.
    return (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
  };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; i += 2) {
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    out[i] = stddev * radius * std::cos(angle);
    if (i + 1 < n) out[i + 1] = stddev * radius * std::sin(angle);
  }
  return out;
}

Problem generate_synthetic(const ImageGrid& x_true, const KernelGrid& kernel_true, std::size_t s,
                           double noise_std, std::uint64_t seed, double cap) {
  if (!kernel_true.is_feasible(cap)) throw InvalidInput("ground-truth kernel not in the constraint set");
  if (!(noise_std >= 0.0)) throw InvalidInput("noise_std must be non-negative");
  ImageGrid b = forward_model(x_true, kernel_true, s);
  if (noise_std > 0.0) {
    const std::vector<double> eta = gaussian_noise(b.size(), noise_std, seed);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += eta[i];
  }
  Problem problem;
  problem.observed = std::move(b);
  problem.scale = s;
  problem.kernel_side = kernel_true.side();
  problem.ground_truth = GroundTruth{x_true, kernel_true};
  problem.noise_std = noise_std;
  return problem;
}

}  // namespace pnpsr
