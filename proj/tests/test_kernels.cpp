#include <doctest.h>

#include <complex>
#include <vector>

#include "fovsim/kernels.hpp"
#include "fovsim/rng.hpp"

using namespace fovsim;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Sizes straddling SIMD lane boundaries.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 64, 1000, 1001};

}  // namespace

TEST_CASE("dispatched kernels agree with scalar reference") {
  Rng rng(42);
  for (const std::size_t n : kSizes) {
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);

    CHECK(kernels::dot(a.data(), b.data(), n) ==
          doctest::Approx(kernels::scalar::dot(a.data(), b.data(), n)).epsilon(1e-12));
    CHECK(kernels::sum(a.data(), n) ==
          doctest::Approx(kernels::scalar::sum(a.data(), n)).epsilon(1e-12));

    auto y1 = b, y2 = b;
    kernels::axpy(1.7, a.data(), y1.data(), n);
    kernels::scalar::axpy(1.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

    auto m1 = b, m2 = b;
    kernels::max_shift_into(a.data(), 0.3, m1.data(), n);
    kernels::scalar::max_shift_into(a.data(), 0.3, m2.data(), n);
    CHECK(m1 == m2);

    if (n > 0) {
      const auto r1 = kernels::max_argmax(a.data(), n);
      const auto r2 = kernels::scalar::max_argmax(a.data(), n);
      CHECK(r1.value == r2.value);
      CHECK(r1.index == r2.index);
    }
  }
}

TEST_CASE("dot matches a plain loop") {
  Rng rng(7);
  auto a = random_vec(37, rng);
  auto b = random_vec(37, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) expect += a[i] * b[i];
  CHECK(kernels::dot(a.data(), b.data(), a.size()) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("max_argmax breaks ties toward the lowest index") {
  const std::vector<double> x = {1.0, 3.0, 3.0, 2.0, 3.0};
  const auto r = kernels::max_argmax(x.data(), x.size());
  CHECK(r.value == 3.0);
  CHECK(r.index == 1);
  const auto rs = kernels::scalar::max_argmax(x.data(), x.size());
  CHECK(rs.index == 1);
}

TEST_CASE("max_shift_into is elementwise max of shifted input") {
  std::vector<double> x = {0.0, 2.0, -1.0};
  std::vector<double> y = {1.0, 1.0, 1.0};
  kernels::scalar::max_shift_into(x.data(), 0.5, y.data(), x.size());
  CHECK(y == std::vector<double>{1.0, 2.5, 1.0});
}

TEST_CASE("cmul_conj_acc accumulates a * conj(b)") {
  Rng rng(11);
  for (const std::size_t n : kSizes) {
    std::vector<std::complex<double>> a(n), b(n), out1(n, {0.5, -0.25}), out2 = out1;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = {rng.normal(), rng.normal()};
      b[i] = {rng.normal(), rng.normal()};
    }
    kernels::cmul_conj_acc(a.data(), b.data(), out1.data(), n);
    for (std::size_t i = 0; i < n; ++i) out2[i] += a[i] * std::conj(b[i]);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(out1[i].real() == doctest::Approx(out2[i].real()).epsilon(1e-12));
      CHECK(out1[i].imag() == doctest::Approx(out2[i].imag()).epsilon(1e-12));
    }
  }
}

TEST_CASE("backend reports a known name") {
  const std::string name = kernels::backend_name();
  CHECK((name == "avx2" || name == "scalar"));
}
