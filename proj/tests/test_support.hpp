#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "pnpsr/grid.hpp"

namespace pnpsr::testing {

inline ImageGrid random_image(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = 0.0,
                              double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ImageGrid x(h, w);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
  return x;
}

inline KernelGrid random_kernel(std::size_t p, std::mt19937_64& rng, double lo = -1.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  KernelGrid k(p);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = u(rng);
  return k;
}

/// Nonnegative, unit-sum kernel with every entry <= 2/p^2 (so it lies in the
/// capped simplex for any cap >= 2/p^2).
inline KernelGrid random_simplex_kernel(std::size_t p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.0);
  KernelGrid k(p);
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) total += (k[i] = u(rng));
  for (std::size_t i = 0; i < k.size(); ++i) k[i] /= total;
  return k;
}

/// Direct O(n p^2) periodic convolution:
/// y(r,c) = sum_{i,j} k(i,j) x((r - (i - c0)) mod h, (c - (j - c0)) mod w).
inline ImageGrid spatial_convolution(const ImageGrid& x, const KernelGrid& k) {
  const long h = static_cast<long>(x.height());
  const long w = static_cast<long>(x.width());
  const long p = static_cast<long>(k.side());
  const long c0 = (p - 1) / 2;
  ImageGrid y(x.height(), x.width());
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long i = 0; i < p; ++i) {
        for (long j = 0; j < p; ++j) {
          const long rr = (((r - (i - c0)) % h) + h) % h;
          const long cc = (((c - (j - c0)) % w) + w) % w;
          acc += k(i, j) * x(rr, cc);
        }
      }
      y(r, c) = acc;
    }
  }
  return y;
}

/// Decimation by explicit enumeration of the index set {(s i, s j)}.
inline ImageGrid index_downsample(const ImageGrid& x, std::size_t s) {
  ImageGrid y(x.height() / s, x.width() / s);
  for (std::size_t i = 0; i < y.height(); ++i) {
    for (std::size_t j = 0; j < y.width(); ++j) y(i, j) = x(s * i, s * j);
  }
  return y;
}

/// Central differences of f along every coordinate of `at`.
inline std::vector<double> central_differences(std::span<double> at,
                                               const std::function<double()>& f, double step) {
  std::vector<double> out(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double saved = at[i];
    at[i] = saved + step;
    const double fp = f();
    at[i] = saved - step;
    const double fm = f();
    at[i] = saved;
    out[i] = (fp - fm) / (2.0 * step);
  }
  return out;
}

/// max_i |a_i - b_i| / max_i |b_i| (0/0 counts as 0).
inline double relative_max_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  if (den == 0.0) return num;
  return num / den;
}

}  // namespace pnpsr::testing
