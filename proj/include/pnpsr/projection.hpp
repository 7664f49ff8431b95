#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pnpsr/grid.hpp"

namespace pnpsr {

/// The capped simplex {z : 0 <= z_i <= cap, sum z_i = 1} over `count` entries.
class CappedSimplexSpec {
 public:
  /// Throws InvalidInput when cap <= 0 or cap * count < 1 (empty set).
  CappedSimplexSpec(std::size_t count, double cap);

  std::size_t count() const noexcept { return count_; }
  double cap() const noexcept { return cap_; }
  static constexpr double target_sum = 1.0;

 private:
  std::size_t count_;
  double cap_;
};

struct ProjectionReport {
  double tau = 0.0;
  std::size_t iterations = 0;
  std::size_t bisections = 0;
  std::size_t free_count = 0;
};

/// g(tau) = sum_i clip(v_i - tau, 0, cap) - 1. Continuous, piecewise linear,
/// non-increasing in tau.
double capped_simplex_dual(std::span<const double> v, double cap, double tau);

/// Euclidean projection onto the capped simplex. The multiplier tau of the
/// sum constraint is found by secant steps on g with a bisection safeguard,
/// then the free coordinates are shifted so the sum is exact.
std::vector<double> project_capped_simplex(std::span<const double> v, const CappedSimplexSpec& spec,
                                           ProjectionReport* report = nullptr);
KernelGrid project_capped_simplex(const KernelGrid& kernel, const CappedSimplexSpec& spec,
                                  ProjectionReport* report = nullptr);

/// Reference projection: 200 plain bisection steps on tau, no refinement.
std::vector<double> project_oracle(std::span<const double> v, const CappedSimplexSpec& spec);
KernelGrid project_oracle(const KernelGrid& kernel, const CappedSimplexSpec& spec);

}  // namespace pnpsr
