#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "fovsim/fft.hpp"
#include "fovsim/rng.hpp"

using namespace fovsim;

TEST_CASE("ifft2(fft2(x)) is the identity") {
  const int nx = 12, ny = 9;
  Rng rng(5);
  std::vector<double> x(static_cast<std::size_t>(nx) * ny);
  for (auto& v : x) v = rng.normal();
  const auto spec = fft::fft2_real(nx, ny, x.data());
  const auto back = fft::ifft2_to_real(nx, ny, spec);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-10));
}

TEST_CASE("ifft3(fft3(x)) is the identity") {
  const int nx = 8, ny = 6, nz = 5;
  Rng rng(6);
  std::vector<double> x(static_cast<std::size_t>(nx) * ny * nz);
  for (auto& v : x) v = rng.normal();
  const auto spec = fft::fft3_real(nx, ny, nz, x.data());
  const auto back = fft::ifft3_to_real(nx, ny, nz, spec);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-10));
}

TEST_CASE("Parseval: sum|X|^2 == N sum|x|^2") {
  const int nx = 16, ny = 16;
  Rng rng(7);
  std::vector<double> x(static_cast<std::size_t>(nx) * ny);
  double space = 0.0;
  for (auto& v : x) {
    v = rng.normal();
    space += v * v;
  }
  const auto spec = fft::fft2_real(nx, ny, x.data());
  double freq = 0.0;
  for (const auto& c : spec) freq += std::norm(c);
  CHECK(freq == doctest::Approx(space * nx * ny).epsilon(1e-10));
}

TEST_CASE("delta transforms to a flat spectrum") {
  const int nx = 8, ny = 8;
  std::vector<double> x(64, 0.0);
  x[0] = 1.0;
  const auto spec = fft::fft2_real(nx, ny, x.data());
  for (const auto& c : spec) {
    CHECK(c.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("cosine concentrates on its frequency bins") {
  const int nx = 32, ny = 1;
  std::vector<double> x(nx);
  const int k = 5;
  for (int i = 0; i < nx; ++i) x[i] = std::cos(2.0 * M_PI * k * i / nx);
  const auto spec = fft::fft2_real(nx, ny, x.data());
  for (int i = 0; i < nx; ++i) {
    const double expect = (i == k || i == nx - k) ? nx / 2.0 : 0.0;
    CHECK(std::abs(spec[i]) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("transforms are linear") {
  const int nx = 10, ny = 7;
  Rng rng(8);
  std::vector<double> a(static_cast<std::size_t>(nx) * ny), b(a.size()), sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    sum[i] = 2.0 * a[i] - 3.0 * b[i];
  }
  const auto fa = fft::fft2_real(nx, ny, a.data());
  const auto fb = fft::fft2_real(nx, ny, b.data());
  const auto fs = fft::fft2_real(nx, ny, sum.data());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto expect = 2.0 * fa[i] - 3.0 * fb[i];
    CHECK(std::abs(fs[i] - expect) < 1e-9);
  }
}

TEST_CASE("freq_index wraps the upper half to negative") {
  CHECK(fft::freq_index(0, 8) == 0);
  CHECK(fft::freq_index(4, 8) == 4);
  CHECK(fft::freq_index(5, 8) == -3);
  CHECK(fft::freq_index(7, 8) == -1);
  CHECK(fft::freq_index(3, 7) == 3);
  CHECK(fft::freq_index(4, 7) == -3);
}
