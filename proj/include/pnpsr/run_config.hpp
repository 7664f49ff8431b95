#pragma once

#include <cstdint>
#include <string>

#include "pnpsr/solver.hpp"

namespace pnpsr {

struct RunConfig {
  enum class Mode { kSynthetic, kReal };

  Mode mode = Mode::kReal;

  // [io]
  std::string input;                // observation (real) or ground-truth image (synthetic)
  std::string ground_truth;         // optional high-res reference for PSNR (real mode)
  std::string ground_truth_kernel;  // optional reference kernel (real mode)
  std::string output_dir = "out";
  bool write_trace = true;
  std::size_t emit_every = 0;  // 0: no intermediate iterates
  bool timing = true;

  // [problem]
  std::size_t scale = 2;
  std::size_t kernel_side = 13;
  double noise_std = 0.01;
  std::uint64_t seed = 0;
  std::size_t synthetic_size = 64;
  double true_kernel_std = 1.5;
  double init_kernel_std = 1.0;

  // [solver] [regularizer] [denoiser] [constraint]
  SolverConfig solver;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses the sectioned `key = value` text format, starting from `base`.
/// Blank lines and lines starting with '#' or ';' are ignored. Unknown
/// sections or keys and malformed values throw ConfigError.
RunConfig parse_run_config(const std::string& text, const RunConfig& base = RunConfig{});
RunConfig load_run_config(const std::string& path, const RunConfig& base = RunConfig{});
/// Writes every field; parse_run_config(serialize_run_config(c)) == c.
std::string serialize_run_config(const RunConfig& config);

/// Sets one field by its dotted name, e.g. "solver.rho" or "constraint.M".
void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

/// "identity", "gaussian" (or "gaussian_smoother"), "external".
DenoiserKind parse_denoiser_kind(const std::string& text);

/// Built-in presets: "flair" (lambda 0.15, M 0.45) and "swi" (lambda 0.075,
/// M 0.6), with the algorithm defaults (rho 0.5, alpha_x 1.34, alpha_theta
/// 0.8, gamma 0.5, nu 1e-4, eps 1e-5, 100 iterations, s 2, p 13, sigma 0.06).
RunConfig preset_config(const std::string& name);

/// Checks ranges and that referenced input files exist; creates the output
/// directory. Throws ConfigError.
void validate_run_config(const RunConfig& config);

}  // namespace pnpsr
