#include "pnpsr/prox.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pnpsr/errors.hpp"
#include "pnpsr/imaging.hpp"

namespace pnpsr {

namespace {

void validate(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b, std::size_t s,
              double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("prox step alpha must be positive");
  if (s == 0) throw InvalidInput("scale factor must be positive");
  if (v.height() % s != 0 || v.width() % s != 0) throw InvalidInput("image not divisible by scale");
  if (b.height() * s != v.height() || b.width() * s != v.width()) {
    throw InvalidInput("observation shape does not match high-res shape / scale");
  }
  if (kernel.side() > v.height() || kernel.side() > v.width()) {
    throw InvalidInput("kernel larger than image");
  }
}

// Sum of the s x s aliased sub-blocks of a high-res spectrum.
Spectrum fold(const Spectrum& Z, std::size_t s) {
  const std::size_t lh = Z.height / s;
  const std::size_t lw = Z.width / s;
  Spectrum out(lh, lw);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t r = 0; r < lh; ++r) {
      for (std::size_t bb = 0; bb < s; ++bb) {
        for (std::size_t c = 0; c < lw; ++c) out(r, c) += Z(r + a * lh, c + bb * lw);
      }
    }
  }
  return out;
}

}  // namespace

void ProxWorkspace::prepare(const KernelGrid& kernel, std::size_t s, double alpha, std::size_t h,
                            std::size_t w) {
  if (scale_ == s && alpha_ == alpha && height_ == h && width_ == w &&
      kernel_key_ == kernel.values()) {
    return;
  }
  response_ = kernel_spectrum(kernel, h, w);
  Spectrum power(h, w);
  for (std::size_t i = 0; i < power.data.size(); ++i) power.data[i] = std::norm(response_.data[i]);
  denominator_ = fold(power, s);
  const double shift = static_cast<double>(s * s) / alpha;
  double min_den = std::numeric_limits<double>::infinity();
  for (auto& d : denominator_.data) {
    d += shift;
    min_den = std::min(min_den, d.real());
  }
  // fold(|Lambda|^2) >= 0 and s^2/alpha > 0, so this only trips on overflow/NaN.
  if (!(min_den > 0.0)) throw NumericalError("prox denominator not positive");

  kernel_key_ = kernel.values();
  scale_ = s;
  alpha_ = alpha;
  height_ = h;
  width_ = w;
  ++rebuilds_;
}

ImageGrid ProxWorkspace::apply(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b,
                               std::size_t s, double alpha) {
  validate(v, kernel, b, s, alpha);
  prepare(kernel, s, alpha, v.height(), v.width());

  // d = v + alpha H^T S^T b, formed in the frequency domain.
  Spectrum D = fft2(v);
  const Spectrum B = fft2(upsample_adjoint(b, s));
  for (std::size_t i = 0; i < D.data.size(); ++i) {
    D.data[i] += alpha * std::conj(response_.data[i]) * B.data[i];
  }

  // x = d - Lambda^* tile( fold(Lambda d) / (s^2/alpha + fold|Lambda|^2) )
  Spectrum LD(D.height, D.width);
  for (std::size_t i = 0; i < LD.data.size(); ++i) LD.data[i] = response_.data[i] * D.data[i];
  Spectrum folded = fold(LD, s);
  for (std::size_t i = 0; i < folded.data.size(); ++i) folded.data[i] /= denominator_.data[i];

  const std::size_t lh = folded.height;
  const std::size_t lw = folded.width;
  for (std::size_t r = 0; r < D.height; ++r) {
    for (std::size_t c = 0; c < D.width; ++c) {
      D(r, c) -= std::conj(response_(r, c)) * folded(r % lh, c % lw);
    }
  }
  return ifft2_real(D);
}

ImageGrid prox_datafit(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b,
                       std::size_t s, double alpha) {
  ProxWorkspace ws;
  return ws.apply(v, kernel, b, s, alpha);
}

ImageGrid prox_normal_operator(const ImageGrid& x, const KernelGrid& kernel, std::size_t s,
                               double alpha) {
  const ImageGrid hx = convolve_periodic(x, kernel);
  const ImageGrid back = correlate_periodic(upsample_adjoint(downsample(hx, s), s), kernel);
  return x + alpha * back;
}

ImageGrid prox_datafit_oracle(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b,
                              std::size_t s, double alpha, double tol, CgReport* report) {
  validate(v, kernel, b, s, alpha);
  const ImageGrid rhs = v + alpha * correlate_periodic(upsample_adjoint(b, s), kernel);
  const double rhs_norm = norm(rhs.data());

  ImageGrid x = v;
  ImageGrid r = rhs - prox_normal_operator(x, kernel, s, alpha);
  ImageGrid d = r;
  double rr = squared_norm(r.data());
  const std::size_t cap = 10 * v.size();
  std::size_t it = 0;
  auto converged = [&] { return std::sqrt(rr) <= tol * rhs_norm; };
  while (!converged()) {
    if (it >= cap) {
      throw NumericalError("CG prox oracle did not converge in " + std::to_string(cap) +
                           " iterations");
    }
    const ImageGrid ad = prox_normal_operator(d, kernel, s, alpha);
    const double step = rr / dot(d.data(), ad.data());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += step * d[i];
      r[i] -= step * ad[i];
    }
    const double rr_next = squared_norm(r.data());
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = r[i] + beta * d[i];
    ++it;
  }
  if (report != nullptr) {
    report->iterations = it;
    report->relative_residual = rhs_norm > 0.0 ? std::sqrt(rr) / rhs_norm : 0.0;
  }
  return x;
}

}  // namespace pnpsr
