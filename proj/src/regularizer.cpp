#include "pnpsr/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pnpsr/errors.hpp"
#include "pnpsr/imaging.hpp"

namespace pnpsr {

double DenoiserSpec::effective_width() const noexcept {
  if (width > 0.0) return width;
  return std::max(sigma * width_per_sigma, 1.0);
}

namespace {

KernelGrid gaussian_taps(double width, std::size_t radius) {
  const std::size_t side = 2 * radius + 1;
  std::vector<double> w1(side);
  double total = 0.0;
  for (std::size_t i = 0; i < side; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(radius);
    w1[i] = std::exp(-d * d / (2.0 * width * width));
    total += w1[i];
  }
  for (double& v : w1) v /= total;
  KernelGrid k(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) k(r, c) = w1[r] * w1[c];
  }
  return k;
}

void require_same_shape(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw InvalidInput("denoiser inputs differ in shape");
}

}  // namespace

namespace {

double checked_width(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw InvalidInput("smoother width must be positive");
  return width;
}

}  // namespace

GaussianSmoother::GaussianSmoother(double width)
    : width_(checked_width(width)),
      radius_(static_cast<std::size_t>(std::ceil(4.0 * width_))),
      taps_(gaussian_taps(width_, radius_)) {}

Spectrum GaussianSmoother::response(std::size_t height, std::size_t width) const {
  std::lock_guard lock(cache_mutex_);
  if (cached_.height != height || cached_.width != width) {
    cached_ = kernel_spectrum(taps_, height, width);
  }
  return cached_;
}

ImageGrid GaussianSmoother::apply(const ImageGrid& x) const {
  Spectrum X = fft2(x);
  const Spectrum W = response(x.height(), x.width());
  for (std::size_t i = 0; i < X.data.size(); ++i) X.data[i] *= W.data[i];
  return ifft2_real(X);
}

ImageGrid GaussianSmoother::denoise(const ImageGrid& x) { return apply(x); }

ImageGrid GaussianSmoother::vjp(const ImageGrid& x, const ImageGrid& u) {
  require_same_shape(x, u);
  return apply(u);  // W is symmetric
}

ExternalDenoiser::ExternalDenoiser(std::unique_ptr<FrameStream> stream, double sigma, VjpMode mode)
    : stream_(std::move(stream)), sigma_(sigma), mode_(mode) {
  const protocol::Frame reply =
      round_trip("handshake", protocol::make_handshake_request(), protocol::Opcode::kHandshake);
  try {
    capabilities_ = protocol::parse_handshake_reply(reply);
  } catch (const protocol::ProtocolError& e) {
    throw TransportError("handshake", e.what());
  }
  if (mode_ == VjpMode::kExact && !endpoint_supports_vjp()) {
    throw TransportError("handshake",
                         "endpoint does not support VJP; use vjp_mode=residual_approx");
  }
}

protocol::Frame ExternalDenoiser::round_trip(const std::string& phase,
                                             const protocol::Frame& request,
                                             protocol::Opcode expected) {
  protocol::Frame reply;
  try {
    stream_->send(request);
    reply = stream_->receive();
  } catch (const std::exception& e) {
    throw TransportError(phase, e.what());
  }
  if (reply.opcode == protocol::Opcode::kError) {
    std::string detail = "endpoint error";
    try {
      const protocol::ErrorReply err = protocol::parse_error(reply);
      detail += " " + std::to_string(err.code) + ": " + err.message;
    } catch (const protocol::ProtocolError&) {
      detail += " (unparseable)";
    }
    throw TransportError(phase, detail);
  }
  if (reply.opcode != expected) throw TransportError(phase, "unexpected reply opcode");
  return reply;
}

ImageGrid ExternalDenoiser::denoise(const ImageGrid& x) {
  const protocol::Frame reply =
      round_trip("denoise", protocol::make_denoise_request({sigma_, protocol::to_wire(x)}),
                 protocol::Opcode::kDenoiseReply);
  try {
    ImageGrid out =
        protocol::from_wire(protocol::parse_grid_reply(reply, protocol::Opcode::kDenoiseReply));
    if (!out.same_shape(x)) throw protocol::ProtocolError("reply shape differs from request");
    return out;
  } catch (const std::exception& e) {
    throw TransportError("denoise", e.what());
  }
}

ImageGrid ExternalDenoiser::vjp(const ImageGrid& x, const ImageGrid& u) {
  require_same_shape(x, u);
  if (mode_ == VjpMode::kResidualApprox) return u;
  const protocol::Frame reply = round_trip(
      "vjp", protocol::make_vjp_request({sigma_, protocol::to_wire(x), protocol::to_wire(u)}),
      protocol::Opcode::kVjpReply);
  try {
    ImageGrid out =
        protocol::from_wire(protocol::parse_grid_reply(reply, protocol::Opcode::kVjpReply));
    if (!out.same_shape(x)) throw protocol::ProtocolError("reply shape differs from request");
    return out;
  } catch (const std::exception& e) {
    throw TransportError("vjp", e.what());
  }
}

std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec) {
  switch (spec.kind) {
    case DenoiserKind::kIdentity:
      return std::make_unique<IdentityDenoiser>();
    case DenoiserKind::kGaussianSmoother:
      return std::make_unique<GaussianSmoother>(spec.effective_width());
    case DenoiserKind::kExternal:
      return std::make_unique<ExternalDenoiser>(open_frame_stream(spec.endpoint), spec.sigma,
                                                spec.vjp_mode);
  }
  throw InvalidInput("unknown denoiser kind");
}

Regularizer::Regularizer(const RegularizerSpec& spec) : Regularizer(spec, make_denoiser(spec.denoiser)) {}

Regularizer::Regularizer(const RegularizerSpec& spec, std::unique_ptr<Denoiser> denoiser)
    : spec_(spec), denoiser_(std::move(denoiser)) {
  if (!(spec_.lambda > 0.0) || !std::isfinite(spec_.lambda)) {
    throw InvalidInput("regularization weight lambda must be positive");
  }
  if (!denoiser_) throw InvalidInput("regularizer needs a denoiser");
}

double Regularizer::phi_value(const ImageGrid& x) {
  ++denoise_calls_;
  const ImageGrid residual = x - denoiser_->denoise(x);
  return 0.5 * spec_.lambda * squared_norm(residual.data());
}

PhiEvaluation Regularizer::evaluate(const ImageGrid& x) {
  ++denoise_calls_;
  ImageGrid residual = x - denoiser_->denoise(x);
  ++vjp_calls_;
  const ImageGrid back = denoiser_->vjp(x, residual);
  PhiEvaluation out;
  out.value = 0.5 * spec_.lambda * squared_norm(residual.data());
  out.gradient = std::move(residual);
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    out.gradient[i] = spec_.lambda * (out.gradient[i] - back[i]);
  }
  return out;
}

ImageGrid Regularizer::grad_phi(const ImageGrid& x) { return evaluate(x).gradient; }

ImageGrid Regularizer::induced_denoise(const ImageGrid& x) { return x - grad_phi(x); }

double Regularizer::estimate_lphi(std::size_t height, std::size_t width, std::size_t iterations,
                                  std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  ImageGrid base(height, width);
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = static_cast<double>(engine() >> 11) * 0x1.0p-53;
  }
  ImageGrid probe(height, width, gaussian_noise(height * width, 1.0, seed + 1));
  double probe_norm = norm(probe.data());
  if (probe_norm == 0.0) return 0.0;
  probe = (1.0 / probe_norm) * probe;

  const double step = 1e-4;
  double estimate = 0.0;
  for (std::size_t it = 0; it < std::max<std::size_t>(iterations, 1); ++it) {
    const ImageGrid plus = grad_phi(base + step * probe);
    const ImageGrid minus = grad_phi(base - step * probe);
    ImageGrid jv = (0.5 / step) * (plus - minus);
    estimate = norm(jv.data());
    if (!(estimate > 0.0) || !std::isfinite(estimate)) return 0.0;
    probe = (1.0 / estimate) * jv;
  }
  return estimate;
}

}  // namespace pnpsr
