#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "pnpsr/fft.hpp"
#include "pnpsr/grid.hpp"
#include "pnpsr/transport.hpp"

namespace pnpsr {

enum class DenoiserKind { kIdentity, kGaussianSmoother, kExternal };

/// How the Jacobian-transpose product of an external denoiser is obtained.
/// kResidualApprox pretends J = 0, i.e. grad phi ~= lambda (x - N(x)); it is
/// an approximation for endpoints that cannot differentiate.
enum class VjpMode { kExact, kResidualApprox };

struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::kGaussianSmoother;
  /// Noise-level hyperparameter, forwarded to external endpoints.
  double sigma = 0.06;
  /// Smoother standard deviation in pixels; <= 0 means derive from sigma.
  double width = 0.0;
  /// Pixels of smoother width per unit of sigma when width is derived.
  double width_per_sigma = 1.0;
  /// Connection descriptor for external endpoints (see open_frame_stream).
  std::string endpoint;
  VjpMode vjp_mode = VjpMode::kExact;

  /// width if set, else max(sigma * width_per_sigma, 1.0).
  double effective_width() const noexcept;

  friend bool operator==(const DenoiserSpec&, const DenoiserSpec&) = default;
};

struct RegularizerSpec {
  double lambda = 0.15;
  DenoiserSpec denoiser;
  std::optional<double> lphi_estimate;

  friend bool operator==(const RegularizerSpec&, const RegularizerSpec&) = default;
};

/// N_sigma and its Jacobian-transpose product.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual ImageGrid denoise(const ImageGrid& x) = 0;
  /// J_N(x)^T u
  virtual ImageGrid vjp(const ImageGrid& x, const ImageGrid& u) = 0;
  virtual std::string name() const = 0;
};

class IdentityDenoiser final : public Denoiser {
 public:
  ImageGrid denoise(const ImageGrid& x) override { return x; }
  ImageGrid vjp(const ImageGrid&, const ImageGrid& u) override { return u; }
  std::string name() const override { return "identity"; }
};

/// Periodic convolution with a normalized Gaussian: a linear, symmetric,
/// unit-flux operator W. Taps are exp(-d^2 / (2 width^2)) for |d| <= radius
/// with radius = ceil(4 width) per axis, normalized to unit sum; taps that
/// reach past the image wrap around.
class GaussianSmoother final : public Denoiser {
 public:
  explicit GaussianSmoother(double width);

  ImageGrid denoise(const ImageGrid& x) override;
  ImageGrid vjp(const ImageGrid& x, const ImageGrid& u) override;
  std::string name() const override { return "gaussian"; }

  double width() const noexcept { return width_; }
  std::size_t radius() const noexcept { return radius_; }
  /// The (2 radius + 1)^2 tap kernel.
  const KernelGrid& taps() const noexcept { return taps_; }
  /// Frequency response of W on an h x w grid (real, since W is symmetric).
  Spectrum response(std::size_t height, std::size_t width) const;

 private:
  ImageGrid apply(const ImageGrid& x) const;

  double width_;
  std::size_t radius_;
  KernelGrid taps_;
  mutable std::mutex cache_mutex_;
  mutable Spectrum cached_;
};

/// Client of the PNPD wire protocol. Handshakes on construction.
class ExternalDenoiser final : public Denoiser {
 public:
  ExternalDenoiser(std::unique_ptr<FrameStream> stream, double sigma, VjpMode mode);

  ImageGrid denoise(const ImageGrid& x) override;
  ImageGrid vjp(const ImageGrid& x, const ImageGrid& u) override;
  std::string name() const override { return "external"; }

  bool endpoint_supports_vjp() const noexcept { return capabilities_ & 1u; }

 private:
  protocol::Frame round_trip(const std::string& phase, const protocol::Frame& request,
                             protocol::Opcode expected);

  std::unique_ptr<FrameStream> stream_;
  double sigma_;
  VjpMode mode_;
  std::uint32_t capabilities_ = 0;
};

std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec);

inline ImageGrid apply_denoiser(const ImageGrid& x, Denoiser& d) { return d.denoise(x); }
inline ImageGrid denoiser_vjp(const ImageGrid& x, const ImageGrid& u, Denoiser& d) {
  return d.vjp(x, u);
}

struct PhiEvaluation {
  double value = 0.0;
  ImageGrid gradient;
};

/// phi(x) = (lambda/2) ||x - N(x)||^2 with its exact gradient
/// lambda (r - J_N(x)^T r), r = x - N(x).
class Regularizer {
 public:
  explicit Regularizer(const RegularizerSpec& spec);
  Regularizer(const RegularizerSpec& spec, std::unique_ptr<Denoiser> denoiser);

  const RegularizerSpec& spec() const noexcept { return spec_; }
  double lambda() const noexcept { return spec_.lambda; }
  Denoiser& denoiser() noexcept { return *denoiser_; }

  double phi_value(const ImageGrid& x);
  ImageGrid grad_phi(const ImageGrid& x);
  /// Value and gradient from a single denoise + VJP.
  PhiEvaluation evaluate(const ImageGrid& x);
  /// x - grad_phi(x)
  ImageGrid induced_denoise(const ImageGrid& x);

  /// Power iteration on the Jacobian of grad_phi, probed by central finite
  /// differences around a seeded random point in [0,1]^n. Returns
  /// ||J v|| for the final unit probe v.
  double estimate_lphi(std::size_t height, std::size_t width, std::size_t iterations,
                       std::uint64_t seed = 7);

  std::size_t denoise_calls() const noexcept { return denoise_calls_; }
  std::size_t vjp_calls() const noexcept { return vjp_calls_; }

 private:
  RegularizerSpec spec_;
  std::unique_ptr<Denoiser> denoiser_;
  std::size_t denoise_calls_ = 0;
  std::size_t vjp_calls_ = 0;
};

}  // namespace pnpsr
