#include "fovsim/kernels.hpp"

namespace fovsim::kernels {

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double*, const double*, std::size_t);
void axpy(double, const double*, double*, std::size_t);
MaxResult max_argmax(const double*, std::size_t);
double sum(const double*, std::size_t);
void max_shift_into(const double*, double, double*, std::size_t);
void cmul_conj_acc(const std::complex<double>*, const std::complex<double>*,
                   std::complex<double>*, std::size_t);
}  // namespace avx2

static bool detect_avx2() { return __builtin_cpu_supports("avx2"); }
static const bool g_have_avx2 = detect_avx2();
#else
static const bool g_have_avx2 = false;
#endif

std::string backend_name() { return g_have_avx2 ? "avx2" : "scalar"; }

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_have_avx2) return avx2::dot(a, b, n);
#endif
  return scalar::dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_have_avx2) return avx2::axpy(alpha, x, y, n);
#endif
  scalar::axpy(alpha, x, y, n);
}

MaxResult max_argmax(const double* x, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_have_avx2) return avx2::max_argmax(x, n);
#endif
  return scalar::max_argmax(x, n);
}

double sum(const double* x, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_have_avx2) return avx2::sum(x, n);
#endif
  return scalar::sum(x, n);
}

void max_shift_into(const double* x, double shift, double* y, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_have_avx2) return avx2::max_shift_into(x, shift, y, n);
#endif
  scalar::max_shift_into(x, shift, y, n);
}

void cmul_conj_acc(const std::complex<double>* a, const std::complex<double>* b,
                   std::complex<double>* out, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_have_avx2) return avx2::cmul_conj_acc(a, b, out, n);
#endif
  scalar::cmul_conj_acc(a, b, out, n);
}

}  // namespace fovsim::kernels
