#include "pnpsr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include "json.hpp"

#include "pnpsr/errors.hpp"
#include "pnpsr/image_io.hpp"
#include "pnpsr/regularizer.hpp"
#include "pnpsr/solver.hpp"

namespace pnpsr {

namespace fs = std::filesystem;
using nlohmann::json;

double keys_weight(double t, double a) noexcept {
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

std::size_t wrap(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

// Interpolates each row of `in` (rows x n) to rows x (n s).
std::vector<double> upsample_rows(const std::vector<double>& in, std::size_t rows, std::size_t n,
                                  std::size_t s) {
  std::vector<double> out(rows * n * s);
  for (std::size_t j = 0; j < n * s; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(s);
    const long base = static_cast<long>(std::floor(u));
    double w[4];
    std::size_t idx[4];
    for (int t = 0; t < 4; ++t) {
      w[t] = keys_weight(u - static_cast<double>(base - 1 + t));
      idx[t] = wrap(base - 1 + t, n);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = in.data() + r * n;
      out[r * n * s + j] = w[0] * row[idx[0]] + w[1] * row[idx[1]] + w[2] * row[idx[2]] +
                           w[3] * row[idx[3]];
    }
  }
  return out;
}

std::vector<double> transpose(const std::vector<double>& in, std::size_t h, std::size_t w) {
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[c * h + r] = in[r * w + c];
  }
  return out;
}

}  // namespace

ImageGrid bicubic_init(const ImageGrid& b, std::size_t s) {
  if (s == 0) throw InvalidInput("scale must be >= 1");
  if (s == 1) return b;
  const std::size_t h = b.height();
  const std::size_t w = b.width();
  std::vector<double> wide = upsample_rows(b.values(), h, w, s);  // h x ws
  std::vector<double> t = transpose(wide, h, w * s);              // ws x h
  std::vector<double> tall = upsample_rows(t, w * s, h, s);       // ws x hs
  return ImageGrid(h * s, w * s, transpose(tall, w * s, h * s));
}

KernelGrid gaussian_kernel(std::size_t p, double stddev) {
  if (p % 2 == 0) throw InvalidInput("kernel side must be odd");
  if (!(stddev > 0.0)) throw InvalidInput("kernel standard deviation must be positive");
  KernelGrid k(p);
  const double c = static_cast<double>(k.center());
  double total = 0.0;
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t q = 0; q < p; ++q) {
      const double dr = static_cast<double>(r) - c;
      const double dq = static_cast<double>(q) - c;
      k(r, q) = std::exp(-(dr * dr + dq * dq) / (2.0 * stddev * stddev));
      total += k(r, q);
    }
  }
  for (std::size_t i = 0; i < k.size(); ++i) k[i] /= total;
  return k;
}

KernelGrid init_kernel(std::size_t p, double width, const CappedSimplexSpec& spec) {
  if (spec.count() != p * p) throw InvalidInput("constraint size does not match kernel side");
  return project_capped_simplex(gaussian_kernel(p, width), spec);
}

double psnr(const ImageGrid& x, const ImageGrid& ref, double peak) {
  if (!x.same_shape(ref)) throw InvalidInput("psnr: image shapes differ");
  if (!(peak > 0.0)) throw InvalidInput("psnr: peak must be positive");
  const double mse = squared_distance(x.data(), ref.data()) / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return 10.0 * std::log10(peak * peak / mse);
}

ImageGrid make_phantom(std::size_t height, std::size_t width) {
  struct Ellipse {
    double cy, cx, ry, rx, angle, value;
  };
  // Coordinates in [-1,1]^2; values are added where ellipses overlap.
  static constexpr Ellipse kShapes[] = {
      {0.0, 0.0, 0.85, 0.68, 0.0, 0.35},    {0.02, 0.0, 0.76, 0.6, 0.0, 0.2},
      {0.2, -0.25, 0.34, 0.14, 0.35, 0.3},  {0.2, 0.28, 0.28, 0.12, -0.35, 0.25},
      {-0.4, 0.0, 0.16, 0.22, 0.0, 0.15},   {-0.1, 0.0, 0.07, 0.07, 0.0, -0.2},
      {0.55, -0.08, 0.05, 0.09, 0.0, 0.1},  {0.55, 0.12, 0.05, 0.05, 0.0, -0.1},
  };
  ImageGrid x(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    const double y = 2.0 * (static_cast<double>(r) + 0.5) / static_cast<double>(height) - 1.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double xx = 2.0 * (static_cast<double>(c) + 0.5) / static_cast<double>(width) - 1.0;
      double v = 0.0;
      for (const Ellipse& e : kShapes) {
        const double dy = y - e.cy;
        const double dx = xx - e.cx;
        const double ca = std::cos(e.angle);
        const double sa = std::sin(e.angle);
        const double u = (ca * dx + sa * dy) / e.rx;
        const double t = (-sa * dx + ca * dy) / e.ry;
        if (u * u + t * t <= 1.0) v += e.value;
      }
      x(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return x;
}

PreparedRun prepare_run(const RunConfig& cfg) {
  const CappedSimplexSpec spec(cfg.kernel_side * cfg.kernel_side, cfg.solver.kernel_cap);
  PreparedRun run;
  if (cfg.mode == RunConfig::Mode::kSynthetic) {
    const ImageGrid x_true = cfg.input.empty()
                                 ? make_phantom(cfg.synthetic_size, cfg.synthetic_size)
                                 : io::read_image(cfg.input);
    if (x_true.height() % cfg.scale != 0 || x_true.width() % cfg.scale != 0) {
      throw InvalidInput("ground-truth image size must be a multiple of the scale");
    }
    const KernelGrid theta_true = init_kernel(cfg.kernel_side, cfg.true_kernel_std, spec);
    run.problem = generate_synthetic(x_true, theta_true, cfg.scale, cfg.noise_std, cfg.seed,
                                     cfg.solver.kernel_cap);
  } else {
    run.problem.observed = io::read_image(cfg.input);
    run.problem.scale = cfg.scale;
    run.problem.kernel_side = cfg.kernel_side;
    run.problem.noise_std = cfg.noise_std;
    if (!cfg.ground_truth.empty()) {
      GroundTruth gt;
      gt.image = io::read_image(cfg.ground_truth);
      if (gt.image.height() != run.problem.hr_height() ||
          gt.image.width() != run.problem.hr_width()) {
        throw InvalidInput("ground-truth image does not have the high-res shape");
      }
      if (!cfg.ground_truth_kernel.empty()) gt.kernel = io::read_kernel(cfg.ground_truth_kernel);
      run.problem.ground_truth = std::move(gt);
    }
  }
  if (run.problem.hr_height() < cfg.kernel_side || run.problem.hr_width() < cfg.kernel_side) {
    throw InvalidInput("high-res image is smaller than the kernel");
  }
  run.x0 = bicubic_init(run.problem.observed, cfg.scale);
  run.theta0 = init_kernel(cfg.kernel_side, cfg.init_kernel_std, spec);
  return run;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json trace_tail(const IterationTrace& trace) {
  json j;
  j["initial_F"] = finite_or_null(trace.initial_objective);
  j["iterations"] = trace.records.size();
  if (!trace.records.empty()) {
    const IterationRecord& last = trace.records.back();
    j["final_F"] = finite_or_null(last.objective);
    j["final_f"] = finite_or_null(last.f);
    j["final_phi"] = finite_or_null(last.phi);
    j["first_stationarity"] = finite_or_null(trace.records.front().stationarity);
    j["final_stationarity"] = finite_or_null(last.stationarity);
  } else {
    j["final_F"] = finite_or_null(trace.initial_objective);
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

const char* category(int code) {
  switch (code) {
    case kExitOk:
      return "ok";
    case kExitConfig:
      return "config";
    case kExitIo:
      return "io";
    case kExitTransport:
      return "transport";
    default:
      return "solver";
  }
}

// Best-effort summary for a failed run; never throws.
void write_failure(const fs::path& dir, int code, const std::string& message,
                   const IterationTrace* trace, bool timing, std::ostream& diag) {
  try {
    if (dir.empty() || !fs::is_directory(dir)) return;
    json j = trace ? trace_tail(*trace) : json::object();
    j["status"] = category(code);
    j["exit_code"] = code;
    j["error"] = message;
    if (trace) io::write_trace_csv(dir / "trace.csv", *trace, timing);
    write_json(dir / "summary.json", j);
  } catch (const std::exception& e) {
    diag << "warning: could not record failure: " << e.what() << "\n";
  }
}

}  // namespace

int run_blind_sr(const RunConfig& cfg, std::ostream& diag) {
  const fs::path dir = cfg.output_dir;
  try {
    validate_run_config(cfg);
  } catch (const ConfigError& e) {
    diag << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  PreparedRun prep;
  try {
    prep = prepare_run(cfg);
  } catch (const IoError& e) {
    diag << "I/O error: " << e.what() << "\n";
    write_failure(dir, kExitIo, e.what(), nullptr, cfg.timing, diag);
    return kExitIo;
  } catch (const std::exception& e) {
    diag << "config error: " << e.what() << "\n";
    write_failure(dir, kExitConfig, e.what(), nullptr, cfg.timing, diag);
    return kExitConfig;
  }

  std::unique_ptr<Regularizer> reg;
  try {
    reg = std::make_unique<Regularizer>(cfg.solver.regularizer);
  } catch (const TransportError& e) {
    diag << "denoiser transport error (" << e.phase() << "): " << e.what() << "\n";
    write_failure(dir, kExitTransport, e.what(), nullptr, cfg.timing, diag);
    return kExitTransport;
  } catch (const std::exception& e) {
    diag << "config error: " << e.what() << "\n";
    write_failure(dir, kExitConfig, e.what(), nullptr, cfg.timing, diag);
    return kExitConfig;
  }

  const Problem& problem = prep.problem;
  std::string emit_error;
  IterationObserver observer;
  if (cfg.emit_every > 0) {
    observer = [&](const IterationView& v) {
      if (!emit_error.empty() || v.record.k % cfg.emit_every != 0) return;
      try {
        const fs::path sub = dir / "iterates";
        fs::create_directories(sub);
        char stem[32];
        std::snprintf(stem, sizeof stem, "iter_%04zu", v.record.k);
        io::write_raw_f64(sub / (std::string(stem) + "_x.f64"), v.x_after);
        io::write_kernel_f64(sub / (std::string(stem) + "_kernel.f64"), v.theta.theta);
      } catch (const std::exception& e) {
        emit_error = e.what();
      }
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  try {
    io::write_raw_f64(dir / "observed.f64", problem.observed);
    io::write_png16(dir / "x_init.png", prep.x0);
    BlindSrSolver solver(problem, cfg.solver, *reg);
    result = solver.run(prep.x0, prep.theta0, observer);
  } catch (const RunAborted& e) {
    const int code = e.cause() == RunAborted::Cause::kTransport ? kExitTransport : kExitSolver;
    diag << (code == kExitTransport ? "denoiser transport error: " : "solver error: ") << e.what()
         << "\n";
    write_failure(dir, code, e.what(), &e.trace(), cfg.timing, diag);
    return code;
  } catch (const IoError& e) {
    diag << "I/O error: " << e.what() << "\n";
    write_failure(dir, kExitIo, e.what(), nullptr, cfg.timing, diag);
    return kExitIo;
  } catch (const std::exception& e) {
    diag << "solver error: " << e.what() << "\n";
    write_failure(dir, kExitSolver, e.what(), nullptr, cfg.timing, diag);
    return kExitSolver;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  try {
    if (!emit_error.empty()) throw IoError("writing iterates: " + emit_error);
    io::write_png16(dir / "x_final.png", result.x);
    io::write_raw_f32(dir / "x_final.f32", result.x);
    io::write_raw_f64(dir / "x_final.f64", result.x);
    io::write_kernel(dir / "kernel_final.f32", result.theta);
    io::write_kernel_f64(dir / "kernel_final.f64", result.theta);
    if (cfg.write_trace) io::write_trace_csv(dir / "trace.csv", result.trace, cfg.timing);

    json j = trace_tail(result.trace);
    j["status"] = "ok";
    j["exit_code"] = kExitOk;
    j["stop_reason"] = to_string(result.stop);
    j["height"] = result.x.height();
    j["width"] = result.x.width();
    j["scale"] = problem.scale;
    j["kernel_side"] = problem.kernel_side;
    j["denoiser"] = reg->denoiser().name();
    j["denoise_calls"] = reg->denoise_calls();
    j["vjp_calls"] = reg->vjp_calls();
    std::size_t total_backtracks = 0;
    double min_lambda = 1.0;
    for (const IterationRecord& r : result.trace.records) {
      total_backtracks += r.backtracks;
      min_lambda = std::min(min_lambda, r.lambda);
    }
    j["total_backtracks"] = total_backtracks;
    j["min_lambda"] = min_lambda;
    if (result.validation.checked) {
      j["step_validation"] = {{"lphi", result.validation.lphi},
                              {"rho_bound", finite_or_null(result.validation.rho_bound)},
                              {"alpha_bound", finite_or_null(result.validation.alpha_bound)},
                              {"compliant", result.validation.compliant()}};
    }
    if (problem.ground_truth) {
      const GroundTruth& gt = *problem.ground_truth;
      j["psnr_init"] = psnr(prep.x0, gt.image);
      j["psnr_final"] = psnr(result.x, gt.image);
      if (gt.kernel.side() == result.theta.side()) {
        j["kernel_error"] = norm((result.theta - gt.kernel).data());
      }
    }
    if (cfg.timing) j["seconds"] = seconds;
    write_json(dir / "summary.json", j);

    diag << "stop: " << to_string(result.stop) << " after " << result.trace.records.size()
         << " iterations, F " << result.trace.initial_objective << " -> "
         << j["final_F"].dump() << "\n";
    if (result.validation.checked && !result.validation.compliant()) {
      diag << "warning: " << result.validation.describe() << "\n";
    }
  } catch (const std::exception& e) {
    diag << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace pnpsr
