#pragma once

#include <complex>
#include <cstddef>
#include <string>

namespace fovsim::kernels {

struct MaxResult {
  double value;
  std::size_t index;
};

// Scalar reference kernels. These are the semantics of record; the dispatched
// variants below must agree with them (see tests/test_kernels.cpp).
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
MaxResult max_argmax(const double* x, std::size_t n);
double sum(const double* x, std::size_t n);
// y[i] = max(y[i], x[i] + shift)
void max_shift_into(const double* x, double shift, double* y, std::size_t n);
// out[i] += a[i] * conj(b[i])
void cmul_conj_acc(const std::complex<double>* a, const std::complex<double>* b,
                   std::complex<double>* out, std::size_t n);
}  // namespace scalar

// Runtime-dispatched entry points (AVX2 when the CPU supports it).
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
MaxResult max_argmax(const double* x, std::size_t n);
double sum(const double* x, std::size_t n);
void max_shift_into(const double* x, double shift, double* y, std::size_t n);
void cmul_conj_acc(const std::complex<double>* a, const std::complex<double>* b,
                   std::complex<double>* out, std::size_t n);

// Name of the active backend ("avx2" or "scalar").
std::string backend_name();

}  // namespace fovsim::kernels
