#include "pnpsr/projection.hpp"

#include <algorithm>
#include <cmath>

#include "pnpsr/errors.hpp"

namespace pnpsr {

namespace {

constexpr double kRootTol = 1e-12;
constexpr double kBracketTol = 1e-15;
constexpr std::size_t kMaxIterations = 200;

void require_length(std::span<const double> v, const CappedSimplexSpec& spec) {
  if (v.size() != spec.count()) throw InvalidInput("projection input length does not match spec");
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput("projection input is not finite");
  }
}

double clip(double t, double cap) { return std::clamp(t, 0.0, cap); }

std::vector<double> primal(std::span<const double> v, double cap, double tau) {
  std::vector<double> z(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) z[i] = clip(v[i] - tau, cap);
  return z;
}

struct Bracket {
  double lo;
  double hi;
};

Bracket initial_bracket(std::span<const double> v, double cap) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return {*mn - cap - 1.0, *mx + 1.0};
}

// Re-solve the sum constraint on the current free set so that it holds to
// rounding error. Returns the number of free coordinates.
std::size_t restore_sum(std::span<const double> v, double cap, double& tau) {
  std::size_t free_count = 0;
  for (int pass = 0; pass < 4; ++pass) {
    double free_sum = 0.0;
    std::size_t capped = 0;
    free_count = 0;
    for (double vi : v) {
      const double t = vi - tau;
      if (t >= cap) {
        ++capped;
      } else if (t > 0.0) {
        free_sum += vi;
        ++free_count;
      }
    }
    if (free_count == 0) return 0;
    const double refined =
        (free_sum + static_cast<double>(capped) * cap - CappedSimplexSpec::target_sum) /
        static_cast<double>(free_count);
    if (refined == tau) break;
    tau = refined;
  }
  return free_count;
}

}  // namespace

CappedSimplexSpec::CappedSimplexSpec(std::size_t count, double cap) : count_(count), cap_(cap) {
  if (count == 0) throw InvalidInput("capped simplex needs at least one coordinate");
  if (!(cap > 0.0)) throw InvalidInput("capped simplex cap must be positive");
  if (cap * static_cast<double>(count) < target_sum) {
    throw InvalidInput("capped simplex is empty: cap * count < 1");
  }
}

double capped_simplex_dual(std::span<const double> v, double cap, double tau) {
  double s = 0.0;
  for (double vi : v) s += clip(vi - tau, cap);
  return s - CappedSimplexSpec::target_sum;
}

std::vector<double> project_capped_simplex(std::span<const double> v, const CappedSimplexSpec& spec,
                                           ProjectionReport* report) {
  require_length(v, spec);
  const double cap = spec.cap();
  auto [lo, hi] = initial_bracket(v, cap);
  double g_lo = capped_simplex_dual(v, cap, lo);
  double g_hi = capped_simplex_dual(v, cap, hi);
  if (!(g_lo >= 0.0 && g_hi < 0.0)) {
    throw NumericalError("capped simplex projection: root not bracketed");
  }

  ProjectionReport rep;
  double tau = lo;
  if (g_lo > 0.0) {
    bool bisect = false;
    tau = 0.5 * (lo + hi);
    for (std::size_t it = 0; it < kMaxIterations; ++it) {
      ++rep.iterations;
      // Secant on the bracket; g_lo > 0 > g_hi so the denominator is positive.
      double t = bisect ? 0.5 * (lo + hi) : lo + g_lo * (hi - lo) / (g_lo - g_hi);
      if (!(t > lo && t < hi)) {
        t = 0.5 * (lo + hi);
        bisect = true;
      }
      if (bisect) ++rep.bisections;
      const double g_t = capped_simplex_dual(v, cap, t);
      const double width_before = hi - lo;
      tau = t;
      if (std::abs(g_t) <= kRootTol) break;
      if (g_t > 0.0) {
        lo = t;
        g_lo = g_t;
      } else {
        hi = t;
        g_hi = g_t;
      }
      if (hi - lo <= kBracketTol) break;
      // Regula falsi can creep from one side on a flat piece of g; fall back
      // to a bisection whenever a step failed to halve the bracket.
      bisect = (hi - lo) > 0.5 * width_before;
    }
  }

  rep.free_count = restore_sum(v, cap, tau);
  rep.tau = tau;
  if (report != nullptr) *report = rep;
  return primal(v, cap, tau);
}

KernelGrid project_capped_simplex(const KernelGrid& kernel, const CappedSimplexSpec& spec,
                                  ProjectionReport* report) {
  return KernelGrid(kernel.side(), project_capped_simplex(kernel.data(), spec, report));
}

std::vector<double> project_oracle(std::span<const double> v, const CappedSimplexSpec& spec) {
  require_length(v, spec);
  const double cap = spec.cap();
  auto [lo, hi] = initial_bracket(v, cap);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (capped_simplex_dual(v, cap, mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return primal(v, cap, 0.5 * (lo + hi));
}

KernelGrid project_oracle(const KernelGrid& kernel, const CappedSimplexSpec& spec) {
  return KernelGrid(kernel.side(), project_oracle(kernel.data(), spec));
}

}  // namespace pnpsr
