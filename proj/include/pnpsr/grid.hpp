#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pnpsr {

/// Row-major 2D raster of doubles.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(std::size_t height, std::size_t width, double fill = 0.0);
  ImageGrid(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const ImageGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Square p x p blur kernel, p odd, centered at ((p-1)/2, (p-1)/2).
class KernelGrid {
 public:
  KernelGrid() = default;
  explicit KernelGrid(std::size_t p, double fill = 0.0);
  KernelGrid(std::size_t p, std::vector<double> data);

  /// Unit impulse at the center.
  static KernelGrid delta(std::size_t p);

  std::size_t side() const noexcept { return p_; }
  std::size_t center() const noexcept { return (p_ - 1) / 2; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t row, std::size_t col) { return data_[row * p_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return data_[row * p_ + col]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double sum() const noexcept;
  bool all_finite() const noexcept;
  /// 0 <= theta_i <= cap + bound_tol and |sum - 1| <= sum_tol.
  bool is_feasible(double cap, double sum_tol = 1e-12, double bound_tol = 1e-14) const noexcept;
  /// 180 degree rotation about the center.
  KernelGrid rotated180() const;

  friend bool operator==(const KernelGrid&, const KernelGrid&) = default;

 private:
  std::size_t p_ = 0;
  std::vector<double> data_;
};

// Flat vector helpers shared by images and kernels.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

ImageGrid operator+(const ImageGrid& a, const ImageGrid& b);
ImageGrid operator-(const ImageGrid& a, const ImageGrid& b);
ImageGrid operator*(double s, const ImageGrid& a);
KernelGrid operator+(const KernelGrid& a, const KernelGrid& b);
KernelGrid operator-(const KernelGrid& a, const KernelGrid& b);
KernelGrid operator*(double s, const KernelGrid& a);

}  // namespace pnpsr
