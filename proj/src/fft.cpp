#include "pnpsr/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "pnpsr/errors.hpp"

namespace pnpsr {

namespace {

// The FFTW planner is not thread-safe; execution with the new-array interface
// is. Plans are created once per (h, w, direction) under a lock and reused.
// FFTW_ESTIMATE keeps plan selection deterministic so repeated runs are
// bitwise reproducible.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t h, std::size_t w, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch_in(h * w), scratch_out(h * w);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w),
                                      reinterpret_cast<fftw_complex*>(scratch_in.data()),
                                      reinterpret_cast<fftw_complex*>(scratch_out.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw NumericalError("fftw plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void execute(std::size_t h, std::size_t w, int sign, std::vector<Complex>& in,
             std::vector<Complex>& out) {
  fftw_plan plan = plan_cache().get(h, w, sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

Spectrum fft2(const ImageGrid& x) {
  std::vector<Complex> in(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = Complex(x[i], 0.0);
  Spectrum out(x.height(), x.width());
  execute(x.height(), x.width(), FFTW_FORWARD, in, out.data);
  return out;
}

ImageGrid ifft2_real(const Spectrum& X) {
  std::vector<Complex> in = X.data;
  std::vector<Complex> out(in.size());
  execute(X.height, X.width, FFTW_BACKWARD, in, out);
  const double scale = 1.0 / static_cast<double>(X.height * X.width);
  ImageGrid x(X.height, X.width);
  for (std::size_t i = 0; i < out.size(); ++i) x[i] = out[i].real() * scale;
  return x;
}

Spectrum kernel_spectrum(const KernelGrid& kernel, std::size_t height, std::size_t width) {
  const auto p = static_cast<long>(kernel.side());
  const auto c = static_cast<long>(kernel.center());
  const auto h = static_cast<long>(height);
  const auto w = static_cast<long>(width);
  ImageGrid padded(height, width);
  for (long a = 0; a < p; ++a) {
    const long r = (((a - c) % h) + h) % h;
    for (long b = 0; b < p; ++b) {
      const long col = (((b - c) % w) + w) % w;
      padded(static_cast<std::size_t>(r), static_cast<std::size_t>(col)) +=
          kernel(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    }
  }
  return fft2(padded);
}

}  // namespace pnpsr
