#include "fovsim/kernels.hpp"

namespace fovsim::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

MaxResult max_argmax(const double* x, std::size_t n) {
  MaxResult r{x[0], 0};
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] > r.value) {
      r.value = x[i];
      r.index = i;
    }
  }
  return r;
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void max_shift_into(const double* x, double shift, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i] + shift;
    if (v > y[i]) y[i] = v;
  }
}

void cmul_conj_acc(const std::complex<double>* a, const std::complex<double>* b,
                   std::complex<double>* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] += std::complex<double>(ar * br + ai * bi, ai * br - ar * bi);
  }
}

}  // namespace fovsim::kernels::scalar
