#include "pnpsr/run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pnpsr/errors.hpp"

namespace pnpsr {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (!v.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || v.empty()) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

const char* kind_text(DenoiserKind k) {
  switch (k) {
    case DenoiserKind::kIdentity:
      return "identity";
    case DenoiserKind::kGaussianSmoother:
      return "gaussian";
    case DenoiserKind::kExternal:
      return "external";
  }
  return "?";
}

}  // namespace

DenoiserKind parse_denoiser_kind(const std::string& v) {
  if (v == "identity") return DenoiserKind::kIdentity;
  if (v == "gaussian" || v == "gaussian_smoother") return DenoiserKind::kGaussianSmoother;
  if (v == "external") return DenoiserKind::kExternal;
  throw ConfigError("unknown denoiser '" + v + "' (identity, gaussian, external)");
}

void set_config_value(RunConfig& c, const std::string& section, const std::string& key,
                      const std::string& value) {
  const std::string name = section + "." + key;
  SolverConfig& s = c.solver;
  DenoiserSpec& d = s.regularizer.denoiser;
  auto num = [&] { return parse_double(name, value); };
  auto count = [&] { return static_cast<std::size_t>(parse_u64(name, value)); };
  auto flag = [&] { return parse_bool(name, value); };

  if (section == "problem") {
    if (key == "mode") {
      if (value == "synthetic") {
        c.mode = RunConfig::Mode::kSynthetic;
      } else if (value == "real") {
        c.mode = RunConfig::Mode::kReal;
      } else {
        throw ConfigError("'" + name + "': expected synthetic or real, got '" + value + "'");
      }
    } else if (key == "scale") {
      c.scale = count();
    } else if (key == "kernel_side") {
      c.kernel_side = count();
    } else if (key == "noise_std") {
      c.noise_std = num();
    } else if (key == "seed") {
      c.seed = parse_u64(name, value);
    } else if (key == "synthetic_size") {
      c.synthetic_size = count();
    } else if (key == "true_kernel_std") {
      c.true_kernel_std = num();
    } else if (key == "init_kernel_std") {
      c.init_kernel_std = num();
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else if (section == "io") {
    if (key == "input") {
      c.input = value;
    } else if (key == "ground_truth") {
      c.ground_truth = value;
    } else if (key == "ground_truth_kernel") {
      c.ground_truth_kernel = value;
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else if (key == "write_trace") {
      c.write_trace = flag();
    } else if (key == "emit_every") {
      c.emit_every = count();
    } else if (key == "timing") {
      c.timing = flag();
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else if (section == "solver") {
    if (key == "rho") {
      s.rho = num();
    } else if (key == "alpha_x") {
      s.alpha_x = num();
    } else if (key == "alpha_theta") {
      s.alpha_theta = num();
    } else if (key == "nu") {
      s.nu = num();
    } else if (key == "gamma") {
      s.gamma = num();
    } else if (key == "eps") {
      s.eps = num();
    } else if (key == "max_iter") {
      s.max_iter = count();
    } else if (key == "terminal_denoise") {
      s.terminal_denoise = flag();
    } else if (key == "validate_steps") {
      s.validate_steps = flag();
    } else if (key == "backtrack_cap") {
      s.backtrack_cap = count();
    } else if (key == "runaway_factor") {
      s.runaway_factor = num();
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else if (section == "regularizer") {
    if (key == "lambda") {
      s.regularizer.lambda = num();
    } else if (key == "lphi_estimate") {
      if (value == "none" || value.empty()) {
        s.regularizer.lphi_estimate.reset();
      } else {
        s.regularizer.lphi_estimate = num();
      }
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else if (section == "denoiser") {
    if (key == "kind") {
      d.kind = parse_denoiser_kind(value);
    } else if (key == "sigma") {
      d.sigma = num();
    } else if (key == "width") {
      d.width = num();
    } else if (key == "width_per_sigma") {
      d.width_per_sigma = num();
    } else if (key == "endpoint") {
      d.endpoint = value;
    } else if (key == "vjp_mode") {
      if (value == "exact") {
        d.vjp_mode = VjpMode::kExact;
      } else if (value == "residual") {
        d.vjp_mode = VjpMode::kResidualApprox;
      } else {
        throw ConfigError("'" + name + "': expected exact or residual, got '" + value + "'");
      }
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else if (section == "constraint") {
    if (key == "M" || key == "cap") {
      s.kernel_cap = num();
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else {
    throw ConfigError("unknown section '[" + section + "]'");
  }
}

RunConfig parse_run_config(const std::string& text, const RunConfig& base) {
  RunConfig c = base;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      static const char* const kSections[] = {"problem", "io", "solver", "regularizer", "denoiser",
                                              "constraint"};
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections)) {
        throw ConfigError(where + "unknown section '[" + section + "]'");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    try {
      set_config_value(c, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), base);
}

std::string serialize_run_config(const RunConfig& c) {
  const SolverConfig& s = c.solver;
  const DenoiserSpec& d = s.regularizer.denoiser;
  std::ostringstream os;
  os << "[problem]\n"
     << "mode = " << (c.mode == RunConfig::Mode::kSynthetic ? "synthetic" : "real") << "\n"
     << "scale = " << c.scale << "\n"
     << "kernel_side = " << c.kernel_side << "\n"
     << "noise_std = " << fmt(c.noise_std) << "\n"
     << "seed = " << c.seed << "\n"
     << "synthetic_size = " << c.synthetic_size << "\n"
     << "true_kernel_std = " << fmt(c.true_kernel_std) << "\n"
     << "init_kernel_std = " << fmt(c.init_kernel_std) << "\n\n";
  os << "[io]\n"
     << "input = " << c.input << "\n"
     << "ground_truth = " << c.ground_truth << "\n"
     << "ground_truth_kernel = " << c.ground_truth_kernel << "\n"
     << "output_dir = " << c.output_dir << "\n"
     << "write_trace = " << bool_text(c.write_trace) << "\n"
     << "emit_every = " << c.emit_every << "\n"
     << "timing = " << bool_text(c.timing) << "\n\n";
  os << "[solver]\n"
     << "rho = " << fmt(s.rho) << "\n"
     << "alpha_x = " << fmt(s.alpha_x) << "\n"
     << "alpha_theta = " << fmt(s.alpha_theta) << "\n"
     << "nu = " << fmt(s.nu) << "\n"
     << "gamma = " << fmt(s.gamma) << "\n"
     << "eps = " << fmt(s.eps) << "\n"
     << "max_iter = " << s.max_iter << "\n"
     << "terminal_denoise = " << bool_text(s.terminal_denoise) << "\n"
     << "validate_steps = " << bool_text(s.validate_steps) << "\n"
     << "backtrack_cap = " << s.backtrack_cap << "\n"
     << "runaway_factor = " << fmt(s.runaway_factor) << "\n\n";
  os << "[regularizer]\n"
     << "lambda = " << fmt(s.regularizer.lambda) << "\n"
     << "lphi_estimate = "
     << (s.regularizer.lphi_estimate ? fmt(*s.regularizer.lphi_estimate) : std::string("none"))
     << "\n\n";
  os << "[denoiser]\n"
     << "kind = " << kind_text(d.kind) << "\n"
     << "sigma = " << fmt(d.sigma) << "\n"
     << "width = " << fmt(d.width) << "\n"
     << "width_per_sigma = " << fmt(d.width_per_sigma) << "\n"
     << "endpoint = " << d.endpoint << "\n"
     << "vjp_mode = " << (d.vjp_mode == VjpMode::kExact ? "exact" : "residual") << "\n\n";
  os << "[constraint]\n"
     << "M = " << fmt(s.kernel_cap) << "\n";
  return os.str();
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "flair") {
    c.solver.regularizer.lambda = 0.15;
    c.solver.kernel_cap = 0.45;
  } else if (name == "swi") {
    c.solver.regularizer.lambda = 0.075;
    c.solver.kernel_cap = 0.6;
  } else {
    throw ConfigError("unknown preset '" + name + "' (flair, swi)");
  }
  return c;
}

void validate_run_config(const RunConfig& c) {
  try {
    c.solver.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (c.scale == 0) throw ConfigError("scale must be >= 1");
  if (c.kernel_side == 0 || c.kernel_side % 2 == 0) throw ConfigError("kernel_side must be odd");
  if (c.solver.kernel_cap * static_cast<double>(c.kernel_side * c.kernel_side) < 1.0) {
    throw ConfigError("constraint set is empty: M * p^2 < 1");
  }
  if (!(c.noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!(c.init_kernel_std > 0.0)) throw ConfigError("init_kernel_std must be > 0");
  const DenoiserSpec& d = c.solver.regularizer.denoiser;
  if (!(d.sigma > 0.0)) throw ConfigError("denoiser sigma must be > 0");
  if (d.kind == DenoiserKind::kExternal && d.endpoint.empty()) {
    throw ConfigError("external denoiser needs an endpoint descriptor");
  }
  if (c.mode == RunConfig::Mode::kReal) {
    if (c.input.empty()) throw ConfigError("real mode needs an input image");
  } else {
    if (!(c.true_kernel_std > 0.0)) throw ConfigError("true_kernel_std must be > 0");
    if (c.input.empty() && c.synthetic_size < c.kernel_side) {
      throw ConfigError("synthetic_size must be at least kernel_side");
    }
    if (c.input.empty() && c.synthetic_size % c.scale != 0) {
      throw ConfigError("synthetic_size must be a multiple of scale");
    }
  }
  for (const std::string* p : {&c.input, &c.ground_truth, &c.ground_truth_kernel}) {
    if (!p->empty() && !fs::exists(*p)) throw ConfigError("path '" + *p + "' does not exist");
  }
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec || !fs::is_directory(c.output_dir)) {
    throw ConfigError("cannot create output directory '" + c.output_dir + "'");
  }
}

}  // namespace pnpsr
