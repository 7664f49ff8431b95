// Blind super-resolution driver.
//
//   pnpsr --synthetic --output-dir out
//   pnpsr --preset swi --input slice.png --output-dir out --emit-every 10

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "pnpsr/errors.hpp"
#include "pnpsr/pipeline.hpp"
#include "pnpsr/run_config.hpp"

namespace {

struct Overrides {
  std::optional<std::string> input, ground_truth, ground_truth_kernel, output_dir, endpoint;
  std::optional<std::string> denoiser, vjp_mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> scale, kernel_side, emit_every, max_iter, size, backtrack_cap;
  std::optional<double> rho, alpha_x, alpha_theta, nu, gamma, eps, lambda, cap, sigma, width;
  std::optional<double> noise_std, true_kernel_std, init_kernel_std, lphi;
  bool synthetic = false;
  bool terminal_denoise = false;
  bool validate_steps = false;
  bool no_timing = false;
  bool no_trace = false;
};

template <typename T, typename U>
void set_if(const std::optional<T>& v, U& field) {
  if (v) field = *v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play blind super-resolution with kernel estimation"};
  Overrides o;
  std::string config_path;
  std::string preset;
  bool print_config = false;

  app.add_option("--config", config_path, "config file (applied on top of the preset)")
      ->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "built-in parameter preset")
      ->check(CLI::IsMember({"flair", "swi"}));
  app.add_option("--input", o.input, "observed low-res image, or the ground truth with --synthetic");
  app.add_option("--ground-truth", o.ground_truth, "high-res reference image for PSNR");
  app.add_option("--ground-truth-kernel", o.ground_truth_kernel, "reference kernel (raw)");
  app.add_option("--output-dir", o.output_dir, "output directory (created if missing)");
  app.add_flag("--synthetic", o.synthetic, "blur, decimate and add noise to a ground truth");
  app.add_option("--seed", o.seed, "noise seed");
  app.add_option("--scale", o.scale, "super-resolution factor s");
  app.add_option("--kernel-side", o.kernel_side, "side p of the estimated kernel (odd)");
  app.add_option("--size", o.size, "phantom side when --synthetic has no --input");
  app.add_option("--noise-std", o.noise_std, "synthetic noise standard deviation");
  app.add_option("--true-kernel-std", o.true_kernel_std, "synthetic blur width");
  app.add_option("--init-kernel-std", o.init_kernel_std, "width of the initial kernel");
  app.add_option("--denoiser", o.denoiser, "denoiser used by the regularizer")
      ->check(CLI::IsMember({"identity", "gaussian", "external"}));
  app.add_option("--endpoint", o.endpoint, "external denoiser: unix:<path> or exec:<command>");
  app.add_option("--vjp-mode", o.vjp_mode, "external VJP source")
      ->check(CLI::IsMember({"exact", "residual"}));
  app.add_option("--emit-every", o.emit_every, "write iterates every N iterations (0: never)");
  app.add_option("--max-iter", o.max_iter, "iteration limit");
  app.add_option("--rho", o.rho, "reflection weight");
  app.add_option("--alpha-x", o.alpha_x, "image step size");
  app.add_option("--alpha-theta", o.alpha_theta, "kernel step size");
  app.add_option("--nu", o.nu, "Armijo constant");
  app.add_option("--gamma", o.gamma, "backtracking factor");
  app.add_option("--eps", o.eps, "relative objective change for stopping");
  app.add_option("--backtrack-cap", o.backtrack_cap, "maximum backtracking steps");
  app.add_option("--lambda", o.lambda, "regularization weight");
  app.add_option("--M,--cap", o.cap, "kernel upper bound M");
  app.add_option("--sigma", o.sigma, "denoiser noise level");
  app.add_option("--width", o.width, "Gaussian smoother width in pixels (0: from sigma)");
  app.add_option("--lphi", o.lphi, "Lipschitz constant of grad phi, skips estimation");
  app.add_flag("--terminal-denoise", o.terminal_denoise, "apply x - grad phi(x) to the result");
  app.add_flag("--validate-steps", o.validate_steps, "estimate L_phi and check the step sizes");
  app.add_flag("--no-timing", o.no_timing, "write 0 for wall times (byte-identical reruns)");
  app.add_flag("--no-trace", o.no_trace, "skip trace.csv");
  app.add_flag("--print-config", print_config, "print the effective config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pnpsr::kExitConfig;
  }

  pnpsr::RunConfig cfg;
  try {
    if (!preset.empty()) cfg = pnpsr::preset_config(preset);
    if (!config_path.empty()) cfg = pnpsr::load_run_config(config_path, cfg);
  } catch (const pnpsr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pnpsr::kExitConfig;
  }

  if (o.synthetic) cfg.mode = pnpsr::RunConfig::Mode::kSynthetic;
  set_if(o.input, cfg.input);
  set_if(o.ground_truth, cfg.ground_truth);
  set_if(o.ground_truth_kernel, cfg.ground_truth_kernel);
  set_if(o.output_dir, cfg.output_dir);
  set_if(o.seed, cfg.seed);
  set_if(o.scale, cfg.scale);
  set_if(o.kernel_side, cfg.kernel_side);
  set_if(o.size, cfg.synthetic_size);
  set_if(o.noise_std, cfg.noise_std);
  set_if(o.true_kernel_std, cfg.true_kernel_std);
  set_if(o.init_kernel_std, cfg.init_kernel_std);
  set_if(o.emit_every, cfg.emit_every);

  pnpsr::SolverConfig& s = cfg.solver;
  set_if(o.max_iter, s.max_iter);
  set_if(o.rho, s.rho);
  set_if(o.alpha_x, s.alpha_x);
  set_if(o.alpha_theta, s.alpha_theta);
  set_if(o.nu, s.nu);
  set_if(o.gamma, s.gamma);
  set_if(o.eps, s.eps);
  set_if(o.backtrack_cap, s.backtrack_cap);
  set_if(o.lambda, s.regularizer.lambda);
  set_if(o.cap, s.kernel_cap);
  set_if(o.sigma, s.regularizer.denoiser.sigma);
  set_if(o.width, s.regularizer.denoiser.width);
  set_if(o.endpoint, s.regularizer.denoiser.endpoint);
  if (o.lphi) s.regularizer.lphi_estimate = *o.lphi;
  if (o.terminal_denoise) s.terminal_denoise = true;
  if (o.validate_steps) s.validate_steps = true;
  if (o.no_timing) cfg.timing = false;
  if (o.no_trace) cfg.write_trace = false;
  try {
    if (o.denoiser) s.regularizer.denoiser.kind = pnpsr::parse_denoiser_kind(*o.denoiser);
    if (o.vjp_mode) {
      pnpsr::set_config_value(cfg, "denoiser", "vjp_mode", *o.vjp_mode);
    }
  } catch (const pnpsr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pnpsr::kExitConfig;
  }

  if (print_config) {
    std::cout << pnpsr::serialize_run_config(cfg);
    return 0;
  }
  return pnpsr::run_blind_sr(cfg, std::cerr);
}
