#pragma once

#include <complex>
#include <vector>

namespace fovsim::fft {

using cvec = std::vector<std::complex<double>>;

// In all transforms the layout is x-fastest; dims are (nx, ny[, nz]).
// Inverse transforms are scaled by 1/N so ifft(fft(x)) == x.
void fft2(int nx, int ny, const std::complex<double>* in, std::complex<double>* out);
void ifft2(int nx, int ny, const std::complex<double>* in, std::complex<double>* out);
void fft3(int nx, int ny, int nz, const std::complex<double>* in, std::complex<double>* out);
void ifft3(int nx, int ny, int nz, const std::complex<double>* in, std::complex<double>* out);

cvec fft2_real(int nx, int ny, const double* in);
cvec fft3_real(int nx, int ny, int nz, const double* in);
std::vector<double> ifft2_to_real(int nx, int ny, const cvec& in);
std::vector<double> ifft3_to_real(int nx, int ny, int nz, const cvec& in);

// Signed wrapped frequency index for bin k of an n-point transform.
inline int freq_index(int k, int n) { return (k <= n / 2) ? k : k - n; }

}  // namespace fovsim::fft
