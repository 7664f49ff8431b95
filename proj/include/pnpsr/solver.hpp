#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnpsr/grid.hpp"
#include "pnpsr/imaging.hpp"
#include "pnpsr/projection.hpp"
#include "pnpsr/prox.hpp"
#include "pnpsr/regularizer.hpp"

namespace pnpsr {

struct SolverConfig {
  double rho = 0.5;          // reflection weight
  double alpha_x = 1.34;     // x prox step
  double alpha_theta = 0.8;  // kernel gradient step
  double nu = 1e-4;          // Armijo constant
  double gamma = 0.5;        // backtracking factor
  double eps = 1e-5;         // relative objective change for stopping
  std::size_t max_iter = 100;
  RegularizerSpec regularizer;
  double kernel_cap = 0.45;  // upper bound M of the kernel constraint set
  bool terminal_denoise = false;
  bool validate_steps = false;
  std::size_t backtrack_cap = 60;
  /// Abort when ||x_k|| exceeds this multiple of max(||x_0||, 1).
  double runaway_factor = 1e6;

  /// Throws InvalidInput when a parameter is out of range.
  void validate() const;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct StepValidation {
  bool checked = false;
  double lphi = 0.0;
  double rho_bound = 0.0;    // 1 / (2 L)
  double alpha_bound = 0.0;  // (1 - 2 L rho) / (2 L)
  bool rho_ok = false;
  bool alpha_ok = false;
  bool compliant() const noexcept { return checked && rho_ok && alpha_ok; }
  std::string describe() const;
};

/// Step-size conditions under which the merit function provably decreases.
StepValidation check_step_sizes(double lphi, double rho, double alpha_x);

struct SolverState {
  std::size_t k = 0;
  ImageGrid x_prev;  // x_{k-1}
  ImageGrid x_curr;  // x_k
  KernelGrid theta;  // theta_k
  ImageGrid grad_prev;  // grad phi(x_{k-1})
  ImageGrid grad_curr;  // grad phi(x_k)
  double phi_curr = 0.0;
  double objective = 0.0;  // f(x_k, theta_k) + phi(x_k)
};

enum class ThetaBranch { kProjected, kLineSearch, kUnchanged };
const char* to_string(ThetaBranch b) noexcept;

struct ThetaUpdate {
  KernelGrid theta;      // accepted theta_{k+1}
  KernelGrid projected;  // projected-gradient point
  KernelGrid gradient;   // grad_theta f(x_{k+1}, theta_k)
  KernelGrid line_point; // theta_k + lambda d_k
  double lambda = 1.0;
  std::size_t backtracks = 0;
  bool cap_hit = false;
  ThetaBranch branch = ThetaBranch::kLineSearch;
  double f_before = 0.0;     // f(x_{k+1}, theta_k)
  double f_line = 0.0;       // f(x_{k+1}, theta_k + lambda d_k)
  double f_projected = 0.0;  // f(x_{k+1}, projected)
  double f_after = 0.0;      // f(x_{k+1}, theta_{k+1})
  double slope = 0.0;        // grad^T d_k
  double direction_norm = 0.0;
};

struct IterationRecord {
  std::size_t k = 0;  // 1-based index of the completed iteration
  double f = 0.0;
  double phi = 0.0;
  double objective = 0.0;  // F = f + phi
  double merit = 0.0;      // H(x_{k+1}, x_k, theta_{k+1})
  double lambda = 1.0;
  std::size_t backtracks = 0;
  ThetaBranch branch = ThetaBranch::kLineSearch;
  bool backtrack_cap_hit = false;
  double stationarity = 0.0;
  double wall_ms = 0.0;
};

struct IterationTrace {
  double initial_objective = 0.0;
  double initial_merit = 0.0;
  std::vector<IterationRecord> records;
};

enum class StopReason { kTolerance, kMaxIter };
const char* to_string(StopReason r) noexcept;

struct RunResult {
  ImageGrid x;
  KernelGrid theta;
  IterationTrace trace;
  StopReason stop = StopReason::kMaxIter;
  StepValidation validation;
};

/// Everything an observer may want to check after one iteration.
struct IterationView {
  const IterationRecord& record;
  const ImageGrid& x_before;       // x_k
  const ImageGrid& x_after;        // x_{k+1}
  const KernelGrid& theta_before;  // theta_k
  const ThetaUpdate& theta;
};
using IterationObserver = std::function<void(const IterationView&)>;

/// A run that stopped on an error; carries the trace collected so far.
class RunAborted : public std::runtime_error {
 public:
  enum class Cause { kTransport, kInternal };
  RunAborted(Cause cause, const std::string& what, IterationTrace trace)
      : std::runtime_error(what), cause_(cause), trace_(std::move(trace)) {}
  Cause cause() const noexcept { return cause_; }
  const IterationTrace& trace() const noexcept { return trace_; }

 private:
  Cause cause_;
  IterationTrace trace_;
};

class BlindSrSolver {
 public:
  /// The regularizer is borrowed and must outlive the solver.
  BlindSrSolver(const Problem& problem, const SolverConfig& cfg, Regularizer& regularizer);

  const SolverConfig& config() const noexcept { return cfg_; }
  const CappedSimplexSpec& constraint() const noexcept { return constraint_; }

  /// x_{-1} = x_0 = x0; theta0 is projected onto the constraint set if needed.
  SolverState initialize(const ImageGrid& x0, const KernelGrid& theta0);

  /// prox_{alpha_x f(., theta_k)}(y_k - alpha_x grad phi(x_k)),
  /// y_k = x_k + rho (grad phi(x_{k-1}) - grad phi(x_k)).
  ImageGrid x_update(const SolverState& state);

  /// Projected gradient step, Armijo backtracking along d_k, and the choice
  /// between the projected and the line-search point.
  ThetaUpdate theta_update(const SolverState& state, const ImageGrid& x_new) const;

  /// f(x, theta) + phi(x) + ||x - y||^2 / (4 alpha_x); +infinity when theta is
  /// more than 1e-9 outside the constraint set.
  double merit_value(const ImageGrid& x, const ImageGrid& y, const KernelGrid& theta);

  /// ||x_new - x_k|| / alpha_x + ||theta_hat - theta_k|| / alpha_theta
  double stationarity_residual(const SolverState& state, const ImageGrid& x_new,
                               const KernelGrid& theta_hat) const;

  RunResult run(const ImageGrid& x0, const KernelGrid& theta0,
                const IterationObserver& observer = {});

 private:
  double f(const ImageGrid& x, const KernelGrid& theta) const;

  const Problem& problem_;
  SolverConfig cfg_;
  Regularizer& regularizer_;
  CappedSimplexSpec constraint_;
  ProxWorkspace prox_;
};

}  // namespace pnpsr
