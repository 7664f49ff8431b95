#include "pnpsr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnpsr/errors.hpp"

namespace pnpsr {

namespace {

bool finite_span(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidInput("length mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
}

}  // namespace

ImageGrid::ImageGrid(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width, fill) {
  if (height == 0 || width == 0) throw InvalidInput("image dimensions must be positive");
}

ImageGrid::ImageGrid(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height == 0 || width == 0) throw InvalidInput("image dimensions must be positive");
  if (data_.size() != height * width) {
    throw InvalidInput("image data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(height) + "x" + std::to_string(width));
  }
}

bool ImageGrid::all_finite() const noexcept { return finite_span(data_); }

KernelGrid::KernelGrid(std::size_t p, double fill) : p_(p), data_(p * p, fill) {
  if (p == 0 || p % 2 == 0) throw InvalidInput("kernel side must be odd and positive");
}

KernelGrid::KernelGrid(std::size_t p, std::vector<double> data) : p_(p), data_(std::move(data)) {
  if (p == 0 || p % 2 == 0) throw InvalidInput("kernel side must be odd and positive");
  if (data_.size() != p * p) throw InvalidInput("kernel data length must be p*p");
}

KernelGrid KernelGrid::delta(std::size_t p) {
  KernelGrid k(p);
  k(k.center(), k.center()) = 1.0;
  return k;
}

double KernelGrid::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool KernelGrid::all_finite() const noexcept { return finite_span(data_); }

bool KernelGrid::is_feasible(double cap, double sum_tol, double bound_tol) const noexcept {
  for (double v : data_) {
    if (!(v >= 0.0) || v > cap + bound_tol) return false;
  }
  return std::abs(sum() - 1.0) <= sum_tol;
}

KernelGrid KernelGrid::rotated180() const {
  KernelGrid r(p_);
  const std::size_t n = data_.size();
  for (std::size_t i = 0; i < n; ++i) r.data_[i] = data_[n - 1 - i];
  return r;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace {

template <typename Grid, typename Op>
Grid zip(const Grid& a, const Grid& b, Op op) {
  require_same_length(a.data(), b.data());
  Grid out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

template <typename Grid>
Grid scaled(double s, const Grid& a) {
  Grid out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

}  // namespace

ImageGrid operator+(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw InvalidInput("image shape mismatch");
  return zip(a, b, [](double u, double v) { return u + v; });
}
ImageGrid operator-(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw InvalidInput("image shape mismatch");
  return zip(a, b, [](double u, double v) { return u - v; });
}
ImageGrid operator*(double s, const ImageGrid& a) { return scaled(s, a); }

KernelGrid operator+(const KernelGrid& a, const KernelGrid& b) {
  return zip(a, b, [](double u, double v) { return u + v; });
}
KernelGrid operator-(const KernelGrid& a, const KernelGrid& b) {
  return zip(a, b, [](double u, double v) { return u - v; });
}
KernelGrid operator*(double s, const KernelGrid& a) { return scaled(s, a); }

}  // namespace pnpsr
