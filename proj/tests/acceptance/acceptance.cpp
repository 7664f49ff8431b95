// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "pnpsr/imaging.hpp"
#include "pnpsr/pipeline.hpp"
#include "pnpsr/projection.hpp"
#include "pnpsr/prox.hpp"
#include "pnpsr/regularizer.hpp"
#include "pnpsr/run_config.hpp"
#include "pnpsr/solver.hpp"
#include "test_support.hpp"

using namespace pnpsr;
using namespace pnpsr::testing;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// θ-block and feasibility bookkeeping shared by every solver run below.
struct ThetaAudit {
  const Problem* problem = nullptr;
  double nu = 0.0;
  double cap = 0.0;
  std::size_t iterations = 0;
  std::size_t descent_violations = 0;
  std::size_t armijo_violations = 0;
  std::size_t cap_hits = 0;
  std::size_t infeasible = 0;
  double min_lambda = 1.0;
  double worst_bound = 0.0;
  double worst_sum = 0.0;
  double line_point_error = 0.0;

  void check_theta(const KernelGrid& t) {
    double lo = 0.0, hi = 0.0;
    for (double v : t.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v - cap);
    }
    const double sum_err = std::abs(t.sum() - 1.0);
    worst_bound = std::max({worst_bound, -lo, hi});
    worst_sum = std::max(worst_sum, sum_err);
    infeasible += lo < 0.0 || hi > 1e-14 || sum_err > 1e-12;
  }

  void observe(const IterationView& v) {
    ++iterations;
    const ImageGrid& x = v.x_after;
    const ImageGrid& b = problem->observed;
    const std::size_t s = problem->scale;
    const double f_before = datafit(x, v.theta_before, b, s);
    const double f_after = datafit(x, v.theta.theta, b, s);
    descent_violations += f_after > f_before;
    const KernelGrid g = grad_theta_datafit(x, v.theta_before, b, s);
    const KernelGrid d = v.theta.projected - v.theta_before;
    const double lambda = v.theta.lambda;
    // The accepted line point must be theta_k + lambda d_k up to rounding, and
    // f is re-evaluated there independently of the solver.
    const double f_line = datafit(x, v.theta.line_point, b, s);
    line_point_error = std::max(
        line_point_error, max_abs_diff(v.theta.line_point.data(), (v.theta_before + lambda * d).data()));
    if (!v.theta.cap_hit) armijo_violations += f_line > f_before + nu * lambda * dot(g.data(), d.data());
    cap_hits += v.theta.cap_hit;
    min_lambda = std::min(min_lambda, lambda);
    check_theta(v.theta.theta);
  }
};

ThetaAudit audit;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void projection_oracle() {
  Timer t;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> scale(0.01, 10.0);
  const std::size_t sides[] = {2, 3, 13};
  double worst = 0.0, worst_vi = -1.0;
  std::size_t infeasible = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = sides[i % 3] * sides[i % 3];
    const double caps[] = {1.0 / n + 0.01, 0.45, 0.6, 1.0};
    const CappedSimplexSpec spec(n, caps[(i / 3) % 4]);
    const double sc = scale(rng);
    std::uniform_real_distribution<double> u(-sc, sc);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    const auto z = project_capped_simplex(v, spec);
    const auto o = project_oracle(v, spec);
    worst = std::max(worst, max_abs_diff(z, o));
    double total = 0.0;
    for (double x : z) {
      infeasible += x < 0.0 || x > spec.cap() + 1e-14;
      total += x;
    }
    infeasible += std::abs(total - 1.0) > 1e-12;
    std::uniform_real_distribution<double> w01(-1.0, 1.0);
    for (int j = 0; j < 5; ++j) {
      std::vector<double> w(n);
      for (double& x : w) x = w01(rng);
      w = project_oracle(w, spec);
      double vi = 0.0;
      for (std::size_t k = 0; k < n; ++k) vi += (v[k] - z[k]) * (w[k] - z[k]);
      worst_vi = std::max(worst_vi, vi);
    }
  }
  const double sec = t.seconds();
  report("projection oracle equivalence",
         worst <= 1e-8 && worst_vi <= 1e-10 && infeasible == 0 && sec < 10.0,
         fmt("1000 instances, max err %.3g (<=1e-8), max VI %.3g (<=1e-10), %.2f s (<10)", worst,
             worst_vi, sec));
}

void prox_oracle() {
  Timer t;
  std::mt19937_64 rng(202);
  const std::size_t scales[] = {1, 2, 4};
  const std::size_t sides[] = {3, 5, 13};
  const double alphas[] = {0.1, 1.34, 10.0};
  const std::size_t sizes[] = {16, 32, 64};
  double worst = 0.0;
  int count = 0;
  for (std::size_t s : scales) {
    for (std::size_t p : sides) {
      for (double alpha : alphas) {
        for (int rep = 0; rep < 2; ++rep) {
          const std::size_t n = sizes[(count + rep) % 3];
          const ImageGrid v = random_image(n, n, rng);
          const ImageGrid b = random_image(n / s, n / s, rng);
          const KernelGrid k = random_simplex_kernel(p, rng);
          const ImageGrid fast = prox_datafit(v, k, b, s, alpha);
          const ImageGrid slow = prox_datafit_oracle(v, k, b, s, alpha, 1e-12);
          worst = std::max(worst, relative_max_error(fast.data(), slow.data()));
          ++count;
        }
      }
    }
  }
  const double sec = t.seconds();
  report("prox oracle equivalence", worst <= 1e-6 && count >= 50 && sec < 30.0,
         fmt("%d instances, max rel err %.3g (<=1e-6), %.2f s (<30)", count, worst, sec));
}

void gradient_suite() {
  Timer t;
  std::mt19937_64 rng(303);
  double worst_x = 0.0, worst_t = 0.0, worst_id = 0.0, worst_g = 0.0;
  const std::size_t sizes[] = {8, 12, 16};
  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t n = sizes[rep % 3];
    const std::size_t s = rep % 2 ? 2 : 1;
    const std::size_t p = rep % 3 == 0 ? 3 : 5;
    ImageGrid x = random_image(n, n, rng);
    KernelGrid k = random_simplex_kernel(p, rng);
    const ImageGrid b = random_image(n / s, n / s, rng);

    const ImageGrid gx = grad_x_datafit(x, k, b, s);
    const auto fdx = central_differences(x.data(), [&] { return datafit(x, k, b, s); }, 1e-5);
    worst_x = std::max(worst_x, relative_max_error(gx.data(), fdx));

    const KernelGrid gt = grad_theta_datafit(x, k, b, s);
    const auto fdt = central_differences(k.data(), [&] { return datafit(x, k, b, s); }, 1e-5);
    worst_t = std::max(worst_t, relative_max_error(gt.data(), fdt));

    RegularizerSpec id;
    id.denoiser.kind = DenoiserKind::kIdentity;
    Regularizer rid(id);
    const ImageGrid gi = rid.grad_phi(x);
    const auto fdi = central_differences(x.data(), [&] { return rid.phi_value(x); }, 1e-5);
    // phi == 0 identically: compare absolutely.
    double abs_i = max_abs_diff(gi.data(), fdi);
    worst_id = std::max(worst_id, abs_i);

    RegularizerSpec sm;
    sm.lambda = 0.15;
    sm.denoiser.kind = DenoiserKind::kGaussianSmoother;
    sm.denoiser.width = 0.8 + 0.2 * rep;
    Regularizer rs(sm);
    const ImageGrid gs = rs.grad_phi(x);
    const auto fds = central_differences(x.data(), [&] { return rs.phi_value(x); }, 1e-5);
    worst_g = std::max(worst_g, relative_max_error(gs.data(), fds));
  }
  const double sec = t.seconds();
  const double worst = std::max({worst_x, worst_t, worst_id, worst_g});
  report("gradient suite", worst <= 1e-5 && sec < 10.0,
         fmt("grad_x %.3g, grad_theta %.3g, grad_phi identity %.3g, smoother %.3g (<=1e-5), %.2f s "
             "(<10)",
             worst_x, worst_t, worst_id, worst_g, sec));
}

void merit_monotonicity() {
  Timer t;
  const ImageGrid x_true = make_phantom(64, 64);
  const double cap = 0.45;
  const CappedSimplexSpec spec(25, cap);
  const Problem pb = generate_synthetic(x_true, init_kernel(5, 1.0, spec), 2, 0.01, 7, cap);

  SolverConfig cfg;
  cfg.kernel_cap = cap;
  cfg.regularizer.lambda = 0.15;
  cfg.regularizer.denoiser.kind = DenoiserKind::kGaussianSmoother;
  cfg.max_iter = 100;
  cfg.eps = 1e-300;
  Regularizer reg(cfg.regularizer);
  const double L = reg.estimate_lphi(64, 64, 100);
  cfg.rho = 0.8 / (2.0 * L);
  cfg.alpha_x = 0.8 * (1.0 - 2.0 * L * cfg.rho) / (2.0 * L);
  const StepValidation sv = check_step_sizes(L, cfg.rho, cfg.alpha_x);

  audit.problem = &pb;
  audit.nu = cfg.nu;
  audit.cap = cap;
  BlindSrSolver solver(pb, cfg, reg);
  const ImageGrid x0 = bicubic_init(pb.observed, 2);
  const KernelGrid t0 = init_kernel(5, 0.8, spec);
  audit.check_theta(solver.initialize(x0, t0).theta);
  const RunResult r = solver.run(x0, t0, [](const IterationView& v) { audit.observe(v); });

  double prev = r.trace.initial_merit;
  double worst = -std::numeric_limits<double>::infinity();
  for (const IterationRecord& rec : r.trace.records) {
    worst = std::max(worst, rec.merit - prev);
    prev = rec.merit;
  }
  const double sec = t.seconds();
  report("merit monotonicity",
         sv.compliant() && r.trace.records.size() == 100 && worst <= 1e-10 && sec < 60.0,
         fmt("L_phi %.4g, rho %.4g, alpha_x %.4g, 100 iters, max H increase %.3g (<=1e-10), %.2f s "
             "(<60)",
             L, cfg.rho, cfg.alpha_x, worst, sec));
}

struct EndToEnd {
  RunResult result;
  double psnr_init = 0.0;
  double psnr_final = 0.0;
  double seconds = 0.0;
};

RunConfig end_to_end_config() {
  RunConfig c = preset_config("flair");
  c.mode = RunConfig::Mode::kSynthetic;
  c.synthetic_size = 64;
  c.kernel_side = 13;
  c.true_kernel_std = 1.5;
  c.noise_std = 0.01;
  c.seed = 0;
  c.timing = false;
  return c;
}

EndToEnd run_end_to_end(bool audited) {
  Timer t;
  const RunConfig c = end_to_end_config();
  const PreparedRun prep = prepare_run(c);
  Regularizer reg(c.solver.regularizer);
  BlindSrSolver solver(prep.problem, c.solver, reg);
  EndToEnd e;
  IterationObserver obs;
  if (audited) {
    audit.problem = &prep.problem;
    audit.nu = c.solver.nu;
    audit.cap = c.solver.kernel_cap;
    audit.check_theta(solver.initialize(prep.x0, prep.theta0).theta);
    obs = [](const IterationView& v) { audit.observe(v); };
  }
  e.result = solver.run(prep.x0, prep.theta0, obs);
  e.psnr_init = psnr(prep.x0, prep.problem.ground_truth->image);
  e.psnr_final = psnr(e.result.x, prep.problem.ground_truth->image);
  e.seconds = t.seconds();
  return e;
}

void end_to_end() {
  const EndToEnd e = run_end_to_end(true);
  const auto& rec = e.result.trace.records;
  const double s1 = rec.front().stationarity;
  const double sk = rec.back().stationarity;
  const double F0 = e.result.trace.initial_objective;
  const double Fk = rec.back().objective;
  const bool ok = e.psnr_final >= e.psnr_init && sk * 10.0 <= s1 && Fk < F0 && e.seconds < 300.0;
  report("synthetic end-to-end", ok,
         fmt("stop %s after %zu iters, PSNR %.3f dB vs bicubic %.3f dB, stationarity %.3g -> %.3g "
             "(%.1fx), F %.6g -> %.6g, %.2f s (<300)",
             to_string(e.result.stop), rec.size(), e.psnr_final, e.psnr_init, s1, sk, s1 / sk, F0,
             Fk, e.seconds));
}

void theta_block_and_feasibility() {
  report("theta-block descent",
         audit.descent_violations == 0 && audit.armijo_violations == 0 && audit.cap_hits == 0 &&
             audit.min_lambda > 1e-6 && audit.line_point_error <= 1e-15,
         fmt("%zu iterations audited, descent violations %zu, Armijo violations %zu, cap hits %zu, "
             "min lambda %.3g (>1e-6), line point vs theta+lambda*d %.3g (<=1e-15)",
             audit.iterations, audit.descent_violations, audit.armijo_violations, audit.cap_hits,
             audit.min_lambda, audit.line_point_error));
  report("feasibility", audit.infeasible == 0,
         fmt("%zu kernels checked, worst bound excess %.3g (<=1e-14), worst |sum-1| %.3g (<=1e-12)",
             audit.iterations + 2, audit.worst_bound, audit.worst_sum));
}

void determinism() {
  Timer t;
  const EndToEnd a = run_end_to_end(false);
  const EndToEnd b = run_end_to_end(false);
  bool same = a.result.x == b.result.x && a.result.theta == b.result.theta &&
              a.result.trace.records.size() == b.result.trace.records.size();
  for (std::size_t i = 0; same && i < a.result.trace.records.size(); ++i) {
    const IterationRecord& p = a.result.trace.records[i];
    const IterationRecord& q = b.result.trace.records[i];
    same = p.f == q.f && p.phi == q.phi && p.merit == q.merit && p.lambda == q.lambda &&
           p.backtracks == q.backtracks && p.stationarity == q.stationarity;
  }

  // Same check through the file outputs.
  std::size_t files = 0, differing = 0;
  const fs::path root = fs::temp_directory_path() / "pnpsr_acceptance";
  fs::remove_all(root);
  RunConfig c = end_to_end_config();
  for (const char* sub : {"a", "b"}) {
    c.output_dir = (root / sub).string();
    std::ostringstream diag;
    if (run_blind_sr(c, diag) != kExitOk) ++differing;
  }
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    differing += slurp(entry.path()) != slurp(root / "b" / entry.path().filename());
  }
  report("determinism", same && differing == 0 && files > 0,
         fmt("in-memory results %s, %zu output files, %zu differ, %.2f s", same ? "identical" : "differ",
             files, differing, t.seconds()));
}

void guarded(const char* name, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded("projection oracle equivalence", projection_oracle);
  guarded("prox oracle equivalence", prox_oracle);
  guarded("gradient suite", gradient_suite);
  guarded("merit monotonicity", merit_monotonicity);
  guarded("synthetic end-to-end", end_to_end);
  guarded("theta-block descent / feasibility", theta_block_and_feasibility);
  guarded("determinism", determinism);
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
