#include "fovsim/fft.hpp"

#include <fftw3.h>

#include <array>
#include <map>
#include <mutex>
#include <stdexcept>

namespace fovsim::fft {

namespace {

struct PlanKey {
  std::array<int, 3> dims;
  int sign;
  bool operator<(const PlanKey& o) const {
    if (dims != o.dims) return dims < o.dims;
    return sign < o.sign;
  }
};

// Plan cache. FFTW planning is not thread-safe; execution via the new-array
// interface is. FFTW_UNALIGNED lets us execute on arbitrary buffers.
class PlanCache {
 public:
  fftw_plan get(std::array<int, 3> dims, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    const PlanKey key{dims, sign};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const int rank = dims[2] > 0 ? 3 : 2;
    // FFTW dim order is slowest-first; our layout is x-fastest.
    int n[3];
    if (rank == 3) {
      n[0] = dims[2];
      n[1] = dims[1];
      n[2] = dims[0];
    } else {
      n[0] = dims[1];
      n[1] = dims[0];
    }
    std::vector<std::complex<double>> dummy(static_cast<std::size_t>(dims[0]) * dims[1] *
                                            (rank == 3 ? dims[2] : 1));
    fftw_plan p = fftw_plan_dft(rank, n, reinterpret_cast<fftw_complex*>(dummy.data()),
                                reinterpret_cast<fftw_complex*>(dummy.data()), sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fft: plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<PlanKey, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(std::array<int, 3> dims, int sign, const std::complex<double>* in,
         std::complex<double>* out) {
  fftw_plan p = cache().get(dims, sign);
  std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * (dims[2] > 0 ? dims[2] : 1);
  if (in != out) std::copy(in, in + n, out);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(out), reinterpret_cast<fftw_complex*>(out));
  if (sign == FFTW_BACKWARD) {
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
  }
}

}  // namespace

void fft2(int nx, int ny, const std::complex<double>* in, std::complex<double>* out) {
  run({nx, ny, 0}, FFTW_FORWARD, in, out);
}
void ifft2(int nx, int ny, const std::complex<double>* in, std::complex<double>* out) {
  run({nx, ny, 0}, FFTW_BACKWARD, in, out);
}
void fft3(int nx, int ny, int nz, const std::complex<double>* in, std::complex<double>* out) {
  run({nx, ny, nz}, FFTW_FORWARD, in, out);
}
void ifft3(int nx, int ny, int nz, const std::complex<double>* in, std::complex<double>* out) {
  run({nx, ny, nz}, FFTW_BACKWARD, in, out);
}

cvec fft2_real(int nx, int ny, const double* in) {
  cvec buf(static_cast<std::size_t>(nx) * ny);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = in[i];
  fft2(nx, ny, buf.data(), buf.data());
  return buf;
}

cvec fft3_real(int nx, int ny, int nz, const double* in) {
  cvec buf(static_cast<std::size_t>(nx) * ny * nz);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = in[i];
  fft3(nx, ny, nz, buf.data(), buf.data());
  return buf;
}

std::vector<double> ifft2_to_real(int nx, int ny, const cvec& in) {
  cvec buf(in.size());
  ifft2(nx, ny, in.data(), buf.data());
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real();
  return out;
}

std::vector<double> ifft3_to_real(int nx, int ny, int nz, const cvec& in) {
  cvec buf(in.size());
  ifft3(nx, ny, nz, in.data(), buf.data());
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace fovsim::fft
