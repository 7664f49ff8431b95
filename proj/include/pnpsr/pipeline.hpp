#pragma once

#include <iosfwd>
#include <optional>

#include "pnpsr/grid.hpp"
#include "pnpsr/imaging.hpp"
#include "pnpsr/projection.hpp"
#include "pnpsr/run_config.hpp"

namespace pnpsr {

/// s-fold bicubic upsampling (Keys kernel, a = -0.5) with periodic
/// boundaries. High-res pixel i is evaluated at low-res coordinate i/s, which
/// puts the low-res samples on the (0,0) offset kept by `downsample`.
ImageGrid bicubic_init(const ImageGrid& b, std::size_t s);

/// Keys cubic convolution weight at distance t.
double keys_weight(double t, double a = -0.5) noexcept;

/// exp(-|d|^2 / (2 std^2)) on the p x p grid around the center, unit sum.
KernelGrid gaussian_kernel(std::size_t p, double stddev);

/// gaussian_kernel(p, width) projected onto the capped simplex.
KernelGrid init_kernel(std::size_t p, double width, const CappedSimplexSpec& spec);

inline constexpr double kPsnrCap = 999.0;

/// 10 log10(peak^2 / MSE), or kPsnrCap when the images are equal.
double psnr(const ImageGrid& x, const ImageGrid& ref, double peak = 1.0);

/// Deterministic test image in [0,1]: overlapping ellipses of different
/// intensity on a dark background.
ImageGrid make_phantom(std::size_t height, std::size_t width);

struct PreparedRun {
  Problem problem;
  ImageGrid x0;
  KernelGrid theta0;
};

/// Loads or synthesizes the problem and builds x0 = bicubic_init(b) and
/// theta0 = init_kernel(p, init_kernel_std). Throws ConfigError, IoError or
/// InvalidInput.
PreparedRun prepare_run(const RunConfig& config);

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIo = 2,
  kExitTransport = 3,
  kExitSolver = 4,
};

/// Validates the config, runs the solver and writes the outputs into
/// config.output_dir:
///   x_init.png, x_final.png, x_final.f32, x_final.f64, kernel_final.f32,
///   kernel_final.f64, observed.f64, trace.csv, summary.json and, when
///   emit_every > 0, iterates/iter_NNNN_x.f64 and iter_NNNN_kernel.f64.
/// On a solver or transport failure the partial trace and a summary with the
/// error are still written. Diagnostics go to `diag`.
int run_blind_sr(const RunConfig& config, std::ostream& diag);

}  // namespace pnpsr
