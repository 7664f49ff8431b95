#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "pnpsr/grid.hpp"

namespace pnpsr {

using Complex = std::complex<double>;

/// Row-major complex 2D array holding a DFT spectrum.
struct Spectrum {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Complex> data;

  Spectrum() = default;
  Spectrum(std::size_t h, std::size_t w) : height(h), width(w), data(h * w) {}

  Complex& operator()(std::size_t r, std::size_t c) { return data[r * width + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data[r * width + c]; }
};

/// Unnormalized forward 2D DFT.
Spectrum fft2(const ImageGrid& x);
/// Inverse 2D DFT scaled by 1/(h*w) so that ifft2_real(fft2(x)) == x; the
/// imaginary part is discarded.
ImageGrid ifft2_real(const Spectrum& X);

/// Frequency response of periodic convolution by `kernel` on an h x w grid:
/// the kernel is zero-padded and circularly shifted so its center lands on
/// index (0,0). Wrapped taps add onto each other.
Spectrum kernel_spectrum(const KernelGrid& kernel, std::size_t height, std::size_t width);

}  // namespace pnpsr
