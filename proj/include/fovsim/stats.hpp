#pragma once

#include <cmath>
#include <stdexcept>

namespace fovsim {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation to the inverse normal CDF (|err| < 1.2e-9).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// z(HR) - z(FAR) with rates clamped to [1/(2n), 1 - 1/(2n)].
inline double dprime_yesno(int hits, int misses, int fas, int crs) {
  const int np = hits + misses;
  const int na = fas + crs;
  if (np <= 0 || na <= 0) throw std::invalid_argument("dprime_yesno: need present and absent trials");
  const double hr = std::min(1.0 - 0.5 / np, std::max(0.5 / np, static_cast<double>(hits) / np));
  const double far = std::min(1.0 - 0.5 / na, std::max(0.5 / na, static_cast<double>(fas) / na));
  return normal_quantile(hr) - normal_quantile(far);
}

inline double binomial_se(double p, int n) {
  if (n < 1) throw std::invalid_argument("binomial_se: n must be >= 1");
  return std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
}

}  // namespace fovsim
