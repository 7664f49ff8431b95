#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pnpsr/errors.hpp"
#include "pnpsr/fft.hpp"
#include "pnpsr/imaging.hpp"
#include "test_support.hpp"

using namespace pnpsr;
using namespace pnpsr::testing;

TEST_CASE("grid construction rejects bad shapes") {
  CHECK_THROWS_AS(ImageGrid(0, 3), InvalidInput);
  CHECK_THROWS_AS(ImageGrid(2, 2, std::vector<double>(3)), InvalidInput);
  CHECK_THROWS_AS(KernelGrid(4), InvalidInput);
  CHECK_THROWS_AS(KernelGrid(3, std::vector<double>(8)), InvalidInput);
  const KernelGrid d = KernelGrid::delta(5);
  CHECK(d(2, 2) == 1.0);
  CHECK(d.sum() == 1.0);
  CHECK(d.is_feasible(1.0));
  CHECK_FALSE(d.is_feasible(0.5));
}

TEST_CASE("fft round trip") {
  std::mt19937_64 rng(1);
  const ImageGrid x = random_image(6, 10, rng);
  CHECK(max_abs_diff(ifft2_real(fft2(x)).data(), x.data()) < 1e-14);
}

TEST_CASE("convolve_periodic: delta kernel is the identity") {
  std::mt19937_64 rng(2);
  const ImageGrid x = random_image(9, 12, rng);
  for (std::size_t p : {1, 3, 5, 9}) {
    CHECK(max_abs_diff(convolve_periodic(x, KernelGrid::delta(p)).data(), x.data()) <= 1e-12);
  }
}

TEST_CASE("convolve_periodic: unit-sum kernel keeps constants") {
  std::mt19937_64 rng(3);
  const ImageGrid x(8, 8, 0.37);
  const KernelGrid k = random_simplex_kernel(5, rng);
  const ImageGrid y = convolve_periodic(x, k);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-13));
}

TEST_CASE("convolve_periodic matches the spatial oracle") {
  std::mt19937_64 rng(4);
  const ImageGrid x = random_image(8, 8, rng);
  const KernelGrid k = random_kernel(3, rng);
  CHECK(max_abs_diff(convolve_periodic(x, k).data(), spatial_convolution(x, k).data()) <= 1e-12);
  // Non-square image and a kernel close to the image size.
  const ImageGrid x2 = random_image(7, 9, rng);
  const KernelGrid k2 = random_kernel(7, rng);
  CHECK(max_abs_diff(convolve_periodic(x2, k2).data(), spatial_convolution(x2, k2).data()) <=
        1e-12);
}

TEST_CASE("convolve_periodic rejects a kernel larger than the image") {
  CHECK_THROWS_AS(convolve_periodic(ImageGrid(4, 8), KernelGrid::delta(5)), InvalidInput);
}

TEST_CASE("convolution adjoint is correlation with the rotated kernel") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const ImageGrid x = random_image(10, 12, rng, -1, 1);
    const ImageGrid y = random_image(10, 12, rng, -1, 1);
    const KernelGrid k = random_kernel(5, rng);
    const double lhs = dot(convolve_periodic(x, k).data(), y.data());
    CHECK(std::abs(lhs - dot(x.data(), convolve_periodic(y, k.rotated180()).data())) <= 1e-10);
    CHECK(std::abs(lhs - dot(x.data(), correlate_periodic(y, k).data())) <= 1e-10);
  }
}

TEST_CASE("flux preservation") {
  std::mt19937_64 rng(6);
  const ImageGrid x = random_image(16, 16, rng);
  const KernelGrid k = random_simplex_kernel(7, rng);
  const ImageGrid y = convolve_periodic(x, k);
  const double mx = std::accumulate(x.data().begin(), x.data().end(), 0.0) / x.size();
  const double my = std::accumulate(y.data().begin(), y.data().end(), 0.0) / y.size();
  CHECK(std::abs(mx - my) <= 1e-12);
}

TEST_CASE("downsample") {
  std::vector<double> v(16);
  std::iota(v.begin(), v.end(), 1.0);
  const ImageGrid y = downsample(ImageGrid(4, 4, v), 2);
  CHECK(y == ImageGrid(2, 2, {1, 3, 9, 11}));

  std::mt19937_64 rng(7);
  const ImageGrid x = random_image(6, 6, rng);
  CHECK(downsample(x, 1) == x);
  CHECK(downsample(x, 3) == index_downsample(x, 3));
  CHECK_THROWS_AS(downsample(ImageGrid(6, 5), 2), InvalidInput);
  CHECK_THROWS_AS(downsample(x, 0), InvalidInput);
}

TEST_CASE("upsample_adjoint") {
  CHECK(upsample_adjoint(ImageGrid(1, 1, 1.0), 2) == ImageGrid(2, 2, {1, 0, 0, 0}));
  std::mt19937_64 rng(8);
  const ImageGrid x = random_image(8, 8, rng, -1, 1);
  const ImageGrid y = random_image(4, 4, rng, -1, 1);
  CHECK(std::abs(dot(downsample(x, 2).data(), y.data()) -
                 dot(x.data(), upsample_adjoint(y, 2).data())) <= 1e-12);
  CHECK(downsample(upsample_adjoint(y, 2), 2) == y);
  CHECK(downsample(upsample_adjoint(y, 3), 3) == y);
}

TEST_CASE("forward_model") {
  std::mt19937_64 rng(9);
  const ImageGrid x = random_image(12, 12, rng);
  CHECK(max_abs_diff(forward_model(x, KernelGrid::delta(3), 1).data(), x.data()) <= 1e-12);

  const ImageGrid c(12, 12, 0.6);
  const ImageGrid bc = forward_model(c, random_simplex_kernel(5, rng), 3);
  CHECK(bc.height() == 4);
  for (double v : bc.data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-13));

  const KernelGrid k = random_kernel(5, rng);
  const ImageGrid oracle = index_downsample(spatial_convolution(x, k), 2);
  CHECK(max_abs_diff(forward_model(x, k, 2).data(), oracle.data()) <= 1e-12);
}

TEST_CASE("forward_model is linear in x and in theta") {
  std::mt19937_64 rng(10);
  const ImageGrid x1 = random_image(8, 8, rng, -1, 1);
  const ImageGrid x2 = random_image(8, 8, rng, -1, 1);
  const KernelGrid k1 = random_kernel(3, rng);
  const KernelGrid k2 = random_kernel(3, rng);
  const double a = 0.7, b = -1.3;
  const ImageGrid lhs = forward_model(a * x1 + b * x2, k1, 2);
  const ImageGrid rhs = a * forward_model(x1, k1, 2) + b * forward_model(x2, k1, 2);
  CHECK(max_abs_diff(lhs.data(), rhs.data()) <= 1e-12);
  const ImageGrid lt = forward_model(x1, a * k1 + b * k2, 2);
  const ImageGrid rt = a * forward_model(x1, k1, 2) + b * forward_model(x1, k2, 2);
  CHECK(max_abs_diff(lt.data(), rt.data()) <= 1e-12);
}

TEST_CASE("datafit") {
  std::mt19937_64 rng(11);
  const ImageGrid x = random_image(8, 8, rng);
  const KernelGrid k = random_simplex_kernel(3, rng);
  const ImageGrid b = forward_model(x, k, 2);
  CHECK(datafit(x, k, b, 2) == 0.0);

  ImageGrid shifted = b;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] -= 1.0;
  CHECK(datafit(x, k, shifted, 2) == doctest::Approx(b.size() / 2.0).epsilon(1e-12));

  const ImageGrid r = random_image(4, 4, rng);
  const ImageGrid fx = index_downsample(spatial_convolution(x, k), 2);
  double oracle = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) oracle += 0.5 * (fx[i] - r[i]) * (fx[i] - r[i]);
  CHECK(datafit(x, k, r, 2) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK_THROWS_AS(datafit(x, k, ImageGrid(3, 4), 2), InvalidInput);
}

TEST_CASE("grad_x_datafit") {
  std::mt19937_64 rng(12);
  ImageGrid x = random_image(8, 8, rng);
  const KernelGrid k = random_kernel(3, rng);
  const ImageGrid b0 = forward_model(x, k, 2);
  CHECK(norm(grad_x_datafit(x, k, b0, 2).data()) == 0.0);

  const ImageGrid b1 = random_image(8, 8, rng);
  CHECK(max_abs_diff(grad_x_datafit(x, k.delta(3), b1, 1).data(), (x - b1).data()) <= 1e-12);

  for (std::size_t s : {1, 2}) {
    const ImageGrid b = random_image(8 / s, 8 / s, rng);
    const ImageGrid g = grad_x_datafit(x, k, b, s);
    const auto fd = central_differences(x.data(), [&] { return datafit(x, k, b, s); }, 1e-6);
    CHECK(relative_max_error(g.data(), fd) <= 1e-5);
  }
  CHECK_THROWS_AS(grad_x_datafit(x, k, ImageGrid(3, 3), 2), InvalidInput);
}

TEST_CASE("grad_theta_datafit") {
  std::mt19937_64 rng(13);
  const KernelGrid k0 = random_kernel(3, rng);
  CHECK(norm(grad_theta_datafit(ImageGrid(8, 8), k0, ImageGrid(4, 4, 1.0), 2).data()) == 0.0);

  const ImageGrid x = random_image(8, 8, rng);
  CHECK(norm(grad_theta_datafit(x, k0, forward_model(x, k0, 2), 2).data()) == 0.0);

  for (std::size_t p : {3, 5}) {
    for (std::size_t s : {1, 2}) {
      KernelGrid k = random_kernel(p, rng);
      const ImageGrid b = random_image(8 / s, 8 / s, rng);
      const KernelGrid g = grad_theta_datafit(x, k, b, s);
      const auto fd = central_differences(k.data(), [&] { return datafit(x, k, b, s); }, 1e-6);
      CHECK(relative_max_error(g.data(), fd) <= 1e-5);
    }
  }
}

TEST_CASE("generate_synthetic") {
  std::mt19937_64 rng(14);
  const ImageGrid x = random_image(64, 64, rng);
  const KernelGrid k = random_simplex_kernel(5, rng);
  const Problem clean = generate_synthetic(x, k, 2, 0.0, 1);
  CHECK(clean.observed == forward_model(x, k, 2));
  CHECK(clean.ground_truth.has_value());
  CHECK(clean.hr_height() == 64);

  const Problem a = generate_synthetic(x, k, 1, 0.05, 42);
  const Problem b = generate_synthetic(x, k, 1, 0.05, 42);
  CHECK(a.observed == b.observed);
  CHECK_FALSE(a.observed == generate_synthetic(x, k, 1, 0.05, 43).observed);

  const ImageGrid eta = a.observed - forward_model(x, k, 1);
  double mean = 0.0, var = 0.0;
  for (double v : eta.data()) mean += v;
  mean /= eta.size();
  for (double v : eta.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (eta.size() - 1));
  CHECK(std::abs(sd - 0.05) <= 0.15 * 0.05);

  KernelGrid bad = k;
  bad[0] += 0.1;
  CHECK_THROWS_AS(generate_synthetic(x, bad, 2, 0.0, 1), InvalidInput);
  CHECK_THROWS_AS(generate_synthetic(x, KernelGrid::delta(5), 2, 0.0, 1, 0.5), InvalidInput);
}

TEST_CASE("gaussian_noise stream is frozen") {
  // First draws for seed 2024, sd 0.5.
  const double frozen[] = {0.13723206280465755, -0.47552066486737865, -0.41131703189070534,
                           0.70256150843270582, 1.0147040589173235,  1.2298123873914801};
  const auto n = gaussian_noise(6, 0.5, 2024);
  REQUIRE(n.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(n[i] == doctest::Approx(frozen[i]).epsilon(1e-14));
  CHECK(gaussian_noise(6, 0.5, 2024) == n);
  // Odd lengths are a prefix of the even stream.
  const auto odd = gaussian_noise(5, 0.5, 2024);
  CHECK(std::equal(odd.begin(), odd.end(), n.begin()));
  CHECK(gaussian_noise(6, 0.5, 2025) != n);
}
