#include "pnpsr/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "pnpsr/errors.hpp"

namespace pnpsr {

void SolverConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidInput("solver config: " + what); };
  if (!(rho >= 0.0) || !std::isfinite(rho)) fail("rho must be >= 0");
  if (!(alpha_x > 0.0) || !std::isfinite(alpha_x)) fail("alpha_x must be > 0");
  if (!(alpha_theta > 0.0) || !std::isfinite(alpha_theta)) fail("alpha_theta must be > 0");
  if (!(nu > 0.0 && nu < 1.0)) fail("nu must be in (0,1)");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must be in (0,1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (max_iter == 0) fail("max_iter must be positive");
  if (!(regularizer.lambda > 0.0)) fail("lambda must be > 0");
  if (!(kernel_cap > 0.0)) fail("kernel cap M must be > 0");
}

std::string StepValidation::describe() const {
  std::ostringstream os;
  if (!checked) return "step sizes not validated";
  os << "L_phi=" << lphi << " rho " << (rho_ok ? "<" : ">=") << " 1/(2L)=" << rho_bound
     << ", alpha_x " << (alpha_ok ? "<" : ">=") << " (1-2L rho)/(2L)=" << alpha_bound;
  return os.str();
}

StepValidation check_step_sizes(double lphi, double rho, double alpha_x) {
  StepValidation v;
  v.checked = true;
  v.lphi = lphi;
  if (lphi <= 0.0) {
    v.rho_bound = v.alpha_bound = std::numeric_limits<double>::infinity();
    v.rho_ok = v.alpha_ok = true;
    return v;
  }
  v.rho_bound = 1.0 / (2.0 * lphi);
  v.alpha_bound = (1.0 - 2.0 * lphi * rho) / (2.0 * lphi);
  v.rho_ok = rho < v.rho_bound;
  v.alpha_ok = alpha_x < v.alpha_bound;
  return v;
}

const char* to_string(ThetaBranch b) noexcept {
  switch (b) {
    case ThetaBranch::kProjected:
      return "projected";
    case ThetaBranch::kLineSearch:
      return "linesearch";
    case ThetaBranch::kUnchanged:
      return "unchanged";
  }
  return "?";
}

const char* to_string(StopReason r) noexcept {
  return r == StopReason::kTolerance ? "tolerance" : "max_iter";
}

BlindSrSolver::BlindSrSolver(const Problem& problem, const SolverConfig& cfg,
                             Regularizer& regularizer)
    : problem_(problem),
      cfg_(cfg),
      regularizer_(regularizer),
      constraint_(problem.kernel_side * problem.kernel_side, cfg.kernel_cap) {
  cfg_.validate();
  if (problem_.scale == 0) throw InvalidInput("problem scale must be positive");
}

double BlindSrSolver::f(const ImageGrid& x, const KernelGrid& theta) const {
  return datafit(x, theta, problem_.observed, problem_.scale);
}

SolverState BlindSrSolver::initialize(const ImageGrid& x0, const KernelGrid& theta0) {
  if (x0.height() != problem_.hr_height() || x0.width() != problem_.hr_width()) {
    throw InvalidInput("initial image does not have the high-res shape");
  }
  if (theta0.side() != problem_.kernel_side) throw InvalidInput("initial kernel has wrong side");
  SolverState s;
  s.theta = theta0.is_feasible(cfg_.kernel_cap) ? theta0 : project_capped_simplex(theta0, constraint_);
  s.x_curr = x0;
  s.x_prev = x0;
  PhiEvaluation phi = regularizer_.evaluate(x0);
  s.grad_curr = std::move(phi.gradient);
  s.grad_prev = s.grad_curr;
  s.phi_curr = phi.value;
  s.objective = f(x0, s.theta) + phi.value;
  return s;
}

ImageGrid BlindSrSolver::x_update(const SolverState& state) {
  ImageGrid v = state.x_curr;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double y = state.x_curr[i] + cfg_.rho * (state.grad_prev[i] - state.grad_curr[i]);
    v[i] = y - cfg_.alpha_x * state.grad_curr[i];
  }
  return prox_.apply(v, state.theta, problem_.observed, problem_.scale, cfg_.alpha_x);
}

ThetaUpdate BlindSrSolver::theta_update(const SolverState& state, const ImageGrid& x_new) const {
  const KernelGrid& theta = state.theta;
  ThetaUpdate u;
  u.gradient = grad_theta_datafit(x_new, theta, problem_.observed, problem_.scale);
  u.f_before = f(x_new, theta);
  u.projected = project_capped_simplex(theta - cfg_.alpha_theta * u.gradient, constraint_);
  const KernelGrid direction = u.projected - theta;
  u.slope = dot(u.gradient.data(), direction.data());
  u.direction_norm = norm(direction.data());

  u.lambda = 1.0;
  for (;;) {
    if (u.lambda == 1.0) {
      u.line_point = u.projected;
    } else {
      // theta_k + lambda d_k written as a convex combination so that the
      // bounds of the constraint set survive rounding.
      u.line_point = KernelGrid(theta.side());
      for (std::size_t i = 0; i < theta.size(); ++i) {
        u.line_point[i] = (1.0 - u.lambda) * theta[i] + u.lambda * u.projected[i];
      }
    }
    u.f_line = f(x_new, u.line_point);
    if (!(u.f_line > u.f_before + cfg_.nu * u.lambda * u.slope)) break;
    if (u.backtracks == cfg_.backtrack_cap) {
      u.cap_hit = true;
      break;
    }
    u.lambda *= cfg_.gamma;
    ++u.backtracks;
  }

  if (u.cap_hit) {
    u.theta = theta;
    u.branch = ThetaBranch::kUnchanged;
    u.f_projected = f(x_new, u.projected);
    u.f_after = u.f_before;
    return u;
  }

  u.f_projected = u.lambda == 1.0 ? u.f_line : f(x_new, u.projected);
  if (u.f_projected < u.f_line) {
    u.theta = u.projected;
    u.branch = ThetaBranch::kProjected;
    u.f_after = u.f_projected;
  } else {
    u.theta = u.line_point;
    u.branch = ThetaBranch::kLineSearch;
    u.f_after = u.f_line;
  }
  return u;
}

double BlindSrSolver::merit_value(const ImageGrid& x, const ImageGrid& y, const KernelGrid& theta) {
  if (!theta.is_feasible(cfg_.kernel_cap, 1e-9, 1e-9)) {
    return std::numeric_limits<double>::infinity();
  }
  return f(x, theta) + regularizer_.phi_value(x) + squared_distance(x.data(), y.data()) /
                                                       (4.0 * cfg_.alpha_x);
}

double BlindSrSolver::stationarity_residual(const SolverState& state, const ImageGrid& x_new,
                                            const KernelGrid& theta_hat) const {
  return std::sqrt(squared_distance(x_new.data(), state.x_curr.data())) / cfg_.alpha_x +
         std::sqrt(squared_distance(theta_hat.data(), state.theta.data())) / cfg_.alpha_theta;
}

RunResult BlindSrSolver::run(const ImageGrid& x0, const KernelGrid& theta0,
                             const IterationObserver& observer) {
  RunResult result;
  if (cfg_.validate_steps) {
    const double lphi = regularizer_.spec().lphi_estimate
                            ? *regularizer_.spec().lphi_estimate
                            : regularizer_.estimate_lphi(problem_.hr_height(), problem_.hr_width(), 50);
    result.validation = check_step_sizes(lphi, cfg_.rho, cfg_.alpha_x);
  }

  SolverState state;
  try {
    state = initialize(x0, theta0);
  } catch (const TransportError& e) {
    throw RunAborted(RunAborted::Cause::kTransport, e.what(), result.trace);
  }
  result.trace.initial_objective = state.objective;
  result.trace.initial_merit = state.objective;  // x_{-1} = x_0
  const double norm_limit = cfg_.runaway_factor * std::max(norm(x0.data()), 1.0);

  using Clock = std::chrono::steady_clock;
  try {
    for (std::size_t k = 0; k < cfg_.max_iter; ++k) {
      const auto t0 = Clock::now();
      ImageGrid x_new = x_update(state);
      PhiEvaluation phi = regularizer_.evaluate(x_new);
      ThetaUpdate tu = theta_update(state, x_new);

      IterationRecord rec;
      rec.k = k + 1;
      rec.f = tu.f_after;
      rec.phi = phi.value;
      rec.objective = rec.f + rec.phi;
      rec.merit = rec.objective +
                  squared_distance(x_new.data(), state.x_curr.data()) / (4.0 * cfg_.alpha_x);
      rec.lambda = tu.lambda;
      rec.backtracks = tu.backtracks;
      rec.branch = tu.branch;
      rec.backtrack_cap_hit = tu.cap_hit;
      rec.stationarity = stationarity_residual(state, x_new, tu.projected);
      rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

      const double previous = state.objective;
      const double change = std::abs(rec.objective - previous);
      const double relative = previous != 0.0 ? change / std::abs(previous)
                                              : (change == 0.0 ? 0.0 : change / 0.0);
      result.trace.records.push_back(rec);

      state.x_prev = std::move(state.x_curr);
      state.x_curr = std::move(x_new);
      state.grad_prev = std::move(state.grad_curr);
      state.grad_curr = std::move(phi.gradient);
      KernelGrid theta_before = std::move(state.theta);
      state.theta = tu.theta;
      state.phi_curr = rec.phi;
      state.objective = rec.objective;
      state.k = k + 1;

      if (observer) {
        observer(IterationView{result.trace.records.back(), state.x_prev, state.x_curr,
                               theta_before, tu});
      }
      if (!state.x_curr.all_finite()) throw NumericalError("iterate became non-finite");
      if (norm(state.x_curr.data()) > norm_limit) {
        throw NumericalError("iterate norm exceeded runaway guard");
      }
      if (relative <= cfg_.eps) {
        result.stop = StopReason::kTolerance;
        break;
      }
    }
  } catch (const TransportError& e) {
    throw RunAborted(RunAborted::Cause::kTransport, e.what(), result.trace);
  } catch (const RunAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw RunAborted(RunAborted::Cause::kInternal, e.what(), result.trace);
  }

  result.theta = state.theta;
  result.x = cfg_.terminal_denoise ? regularizer_.induced_denoise(state.x_curr) : state.x_curr;
  return result;
}

}  // namespace pnpsr
