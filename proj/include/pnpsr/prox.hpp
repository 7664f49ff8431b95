#pragma once

#include <cstddef>
#include <vector>

#include "pnpsr/fft.hpp"
#include "pnpsr/grid.hpp"

namespace pnpsr {

/// Cached frequency-domain pieces of the data-fit prox for one (kernel, s,
/// alpha, shape) key. Not thread-safe; use one workspace per thread.
class ProxWorkspace {
 public:
  /// argmin_x 0.5||x - v||^2 + alpha * 0.5||S(kernel * x) - b||^2.
  ImageGrid apply(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b, std::size_t s,
                  double alpha);

  /// Number of times the cached spectra had to be rebuilt.
  std::size_t rebuilds() const noexcept { return rebuilds_; }

 private:
  void prepare(const KernelGrid& kernel, std::size_t s, double alpha, std::size_t h, std::size_t w);

  std::vector<double> kernel_key_;
  std::size_t scale_ = 0;
  double alpha_ = 0.0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t rebuilds_ = 0;

  Spectrum response_;     // Lambda, high-res
  Spectrum denominator_;  // s^2/alpha + fold(|Lambda|^2), low-res
};

/// Closed-form prox of alpha * datafit(., kernel) through the decimation
/// (fold/tile) identity. Uses a throwaway workspace.
ImageGrid prox_datafit(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b,
                       std::size_t s, double alpha);

/// Applies I + alpha * H^T S^T S H.
ImageGrid prox_normal_operator(const ImageGrid& x, const KernelGrid& kernel, std::size_t s,
                               double alpha);

struct CgReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Same minimizer by conjugate gradient on the normal equations, stopping
/// when ||r|| <= tol * ||rhs||. Throws NumericalError after 10*n iterations.
ImageGrid prox_datafit_oracle(const ImageGrid& v, const KernelGrid& kernel, const ImageGrid& b,
                              std::size_t s, double alpha, double tol, CgReport* report = nullptr);

}  // namespace pnpsr
