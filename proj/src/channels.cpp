#include "fovsim/channels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fovsim/fft.hpp"

namespace fovsim {

using json = nlohmann::json;

void FoveationParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(internal_noise_gain >= 0.0))
    throw std::invalid_argument("FoveationParams: alpha, beta, K must be >= 0");
}

std::vector<double> fcho_frequencies_cpd() { return {32.0, 16.0, 8.0, 4.0, 2.0, 1.0}; }
std::vector<double> cho_frequencies_cpd() { return {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}; }

std::vector<double> drop_above_nyquist(std::vector<double> freqs_cpd, double pitch_dva) {
  const double nyquist = 1.0 / (2.0 * pitch_dva);
  std::vector<double> kept;
  for (const double f : freqs_cpd) {
    if (f >= nyquist) {
      std::cerr << "fovsim: dropping " << f << " cpd channel (Nyquist " << nyquist << " cpd)\n";
    } else {
      kept.push_back(f);
    }
  }
  return kept;
}

namespace {

constexpr double kPi = std::numbers::pi;

// Smallest odd side holding >= 99% of the channel's energy on the full grid.
int energy_side(const std::vector<double>& full, int full_side) {
  const int h_max = full_side / 2;
  std::vector<double> ring(h_max + 1, 0.0);
  double total = 0.0;
  for (int y = 0; y < full_side; ++y) {
    for (int x = 0; x < full_side; ++x) {
      const int m = std::max(std::abs(x - h_max), std::abs(y - h_max));
      const double e = full[static_cast<std::size_t>(y) * full_side + x];
      ring[m] += e * e;
      total += e * e;
    }
  }
  if (total <= 0.0) throw std::runtime_error("channel bank: all-zero channel");
  double acc = 0.0;
  for (int m = 0; m <= h_max; ++m) {
    acc += ring[m];
    if (acc >= 0.99 * total) return 2 * m + 1;
  }
  return full_side;
}

// Evaluates channels on the full grid, picks the shared 99%-energy side and
// crops.
ChannelBank assemble(ChannelBank::Family family, double pitch_dva, int max_side,
                     const std::vector<std::vector<double>>& full_channels) {
  if (max_side % 2 == 0) ++max_side;
  const int n = static_cast<int>(full_channels.size());
  int side = 1;
  for (const auto& ch : full_channels) side = std::max(side, energy_side(ch, max_side));
  ChannelBank bank;
  bank.family = family;
  bank.side = side;
  bank.pitch_dva = pitch_dva;
  bank.n_channels = n;
  bank.profiles.resize(static_cast<std::size_t>(n) * side * side);
  const int off = (max_side - side) / 2;
  for (int c = 0; c < n; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        bank.profiles[(static_cast<std::size_t>(c) * side + y) * side + x] =
            full_channels[c][static_cast<std::size_t>(y + off) * max_side + x + off];
  return bank;
}

}  // namespace

ChannelBank gabor_bank(const std::vector<double>& freqs_cpd, int n_orientations, double pitch_dva,
                       int max_side) {
  if (freqs_cpd.empty() || n_orientations < 1)
    throw std::invalid_argument("gabor_bank: need at least one frequency and orientation");
  const double nyquist = 1.0 / (2.0 * pitch_dva);
  for (const double f : freqs_cpd)
    if (f >= nyquist) throw std::domain_error("gabor_bank: frequency at or above Nyquist");
  if (max_side % 2 == 0) ++max_side;
  const int h = max_side / 2;

  std::vector<std::vector<double>> chans;
  std::vector<double> freqs, thetas;
  for (const double f : freqs_cpd) {
    // Envelope FWHM giving a 1-octave half-amplitude frequency bandwidth:
    // sigma_x = 3 sqrt(ln2/2) / (pi f), W = 2 sqrt(2 ln2) sigma_x = 6 ln2 / (pi f).
    const double w = 6.0 * std::log(2.0) / (kPi * f);
    // Channels whose envelope exceeds the patch are rolled off smoothly at the
    // boundary; a hard clip would leak broadband sidelobes that the covariance
    // solve then exploits in steep power-law noise.
    const double r_flat = 0.7 * h;
    auto taper = [&](double r) {
      if (r <= r_flat) return 1.0;
      if (r >= h) return 0.0;
      return 0.5 * (1.0 + std::cos(kPi * (r - r_flat) / (h - r_flat)));
    };
    for (int k = 0; k < n_orientations; ++k) {
      const double theta = kPi * k / n_orientations;
      std::vector<double> ch(static_cast<std::size_t>(max_side) * max_side);
      std::size_t i = 0;
      for (int y = -h; y <= h; ++y) {
        const double yd = y * pitch_dva;
        for (int x = -h; x <= h; ++x, ++i) {
          const double xd = x * pitch_dva;
          const double env = std::exp(-4.0 * std::log(2.0) * (xd * xd + yd * yd) / (w * w));
          ch[i] = env * taper(std::sqrt(static_cast<double>(x) * x + y * y)) *
                  std::cos(2.0 * kPi * f * (xd * std::cos(theta) + yd * std::sin(theta)));
        }
      }
      chans.push_back(std::move(ch));
      freqs.push_back(f);
      thetas.push_back(theta);
    }
  }
  ChannelBank bank = assemble(ChannelBank::Family::gabor, pitch_dva, max_side, chans);
  bank.center_freq_cpd = std::move(freqs);
  bank.orientation_rad = std::move(thetas);
  return bank;
}

namespace {

double laguerre(int j, double x) {
  if (j == 0) return 1.0;
  double lm1 = 1.0, l = 1.0 - x;
  for (int k = 1; k < j; ++k) {
    const double lp1 = ((2.0 * k + 1.0 - x) * l - k * lm1) / (k + 1.0);
    lm1 = l;
    l = lp1;
  }
  return l;
}

}  // namespace

ChannelBank laguerre_gauss_bank(const std::vector<int>& orders, const std::vector<double>& widths,
                                double pitch_dva, int max_side, bool literal_form) {
  if (orders.size() != widths.size() || orders.empty())
    throw std::invalid_argument("laguerre_gauss_bank: orders and widths must pair up");
  for (const int j : orders)
    if (j < 0) throw std::invalid_argument("laguerre_gauss_bank: orders must be >= 0");
  if (max_side % 2 == 0) ++max_side;
  const int h = max_side / 2;

  std::vector<std::vector<double>> chans;
  for (std::size_t c = 0; c < orders.size(); ++c) {
    const int j = orders[c];
    const double a = widths[c];
    const double denom = literal_form ? a : a * a;
    std::vector<double> ch(static_cast<std::size_t>(max_side) * max_side);
    std::size_t i = 0;
    for (int y = -h; y <= h; ++y)
      for (int x = -h; x <= h; ++x, ++i) {
        const double r2 = static_cast<double>(x) * x + static_cast<double>(y) * y;
        ch[i] = std::sqrt(2.0) / a * std::exp(-kPi * r2 / denom) * laguerre(j, 2.0 * kPi * r2 / denom);
      }
    chans.push_back(std::move(ch));
  }
  return assemble(ChannelBank::Family::laguerre_gauss, pitch_dva, max_side, chans);
}

ChannelBank laguerre_gauss_bank_default(double pitch_dva, int max_side) {
  // 4 orders x 4 widths, 16 channels.
  std::vector<int> orders;
  std::vector<double> widths;
  for (const int j : {0, 3, 9, 17})
    for (const double a : {5.0, 10.0, 20.0, 40.0}) {
      orders.push_back(j);
      widths.push_back(a);
    }
  return laguerre_gauss_bank(orders, widths, pitch_dva, max_side);
}

double dog_radial_gain(double f, int n, double sigma0, double alpha, double q, bool literal_form) {
  const double sn = sigma0 * std::pow(alpha, n);
  if (literal_form)
    return std::exp(-f * f / (q * 2.0 * sn * sn)) - std::exp(-f * f / (2.0 * sn * sn));
  return std::exp(-f * f / (2.0 * q * sn * q * sn)) - std::exp(-f * f / (2.0 * sn * sn));
}

ChannelBank dog_bank(double sigma0, double alpha, double q, int n_orders, double pitch_dva,
                     int max_side, bool literal_form) {
  if (!(q > 1.0)) throw std::invalid_argument("dog_bank: Q must be > 1");
  if (n_orders < 1) throw std::invalid_argument("dog_bank: need at least one order");
  if (max_side % 2 == 0) ++max_side;
  const int h = max_side / 2;

  std::vector<std::vector<double>> chans;
  fft::cvec freq(static_cast<std::size_t>(max_side) * max_side);
  for (int n = 1; n <= n_orders; ++n) {
    std::size_t i = 0;
    for (int ky = 0; ky < max_side; ++ky) {
      const double fy = static_cast<double>(fft::freq_index(ky, max_side)) / max_side;
      for (int kx = 0; kx < max_side; ++kx, ++i) {
        const double fx = static_cast<double>(fft::freq_index(kx, max_side)) / max_side;
        freq[i] = dog_radial_gain(std::sqrt(fx * fx + fy * fy), n, sigma0, alpha, q, literal_form);
      }
    }
    std::vector<double> spatial = fft::ifft2_to_real(max_side, max_side, freq);
    // fftshift so the channel is centered in the patch.
    std::vector<double> ch(spatial.size());
    for (int y = 0; y < max_side; ++y)
      for (int x = 0; x < max_side; ++x) {
        const int sx = (x + h + 1) % max_side;
        const int sy = (y + h + 1) % max_side;
        ch[static_cast<std::size_t>(y) * max_side + x] =
            spatial[static_cast<std::size_t>(sy) * max_side + sx];
      }
    chans.push_back(std::move(ch));
  }
  return assemble(ChannelBank::Family::dog, pitch_dva, max_side, chans);
}

ChannelBank dog_bank_default(double pitch_dva, int max_side) {
  return dog_bank(0.005, 1.4, 1.67, 10, pitch_dva, max_side);
}

ChannelBank scaled_gabor_bank(const std::vector<double>& base_freqs_cpd, int n_orientations,
                              double eccentricity_dva, const FoveationParams& params,
                              double pitch_dva, int max_side) {
  params.validate();
  if (eccentricity_dva < 0.0)
    throw std::invalid_argument("scaled_gabor_bank: eccentricity must be >= 0");
  const double scaling = params.scaling(eccentricity_dva);
  std::vector<double> scaled(base_freqs_cpd);
  for (auto& f : scaled) f /= scaling;
  return gabor_bank(scaled, n_orientations, pitch_dva, max_side);
}

std::vector<double> channel_response(const ChannelBank& bank, const std::vector<double>& patch) {
  if (patch.size() != bank.patch_pixels())
    throw std::invalid_argument("channel_response: patch size does not match bank geometry");
  std::vector<double> out(bank.n_channels);
  for (int c = 0; c < bank.n_channels; ++c) {
    double acc = 0.0;
    const double* t = bank.channel(c);
    for (std::size_t i = 0; i < patch.size(); ++i) acc += t[i] * patch[i];
    out[c] = acc;
  }
  return out;
}

void write_bank(const std::string& path, const ChannelBank& bank) {
  json meta = {
      {"family", bank.family == ChannelBank::Family::gabor
                     ? "gabor"
                     : bank.family == ChannelBank::Family::laguerre_gauss ? "laguerre_gauss" : "dog"},
      {"side", bank.side},
      {"pitch_dva", bank.pitch_dva},
      {"n_channels", bank.n_channels},
      {"center_freq_cpd", bank.center_freq_cpd},
      {"orientation_rad", bank.orientation_rad},
  };
  std::ofstream mf(path + ".json");
  mf << meta.dump(2) << "\n";
  std::ofstream f(path, std::ios::binary);
  std::vector<float> buf(bank.profiles.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(bank.profiles[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

ChannelBank read_bank(const std::string& path) {
  std::ifstream mf(path + ".json");
  if (!mf) throw std::runtime_error("read_bank: missing sidecar " + path + ".json");
  json meta = json::parse(mf);
  ChannelBank bank;
  const std::string fam = meta["family"];
  bank.family = fam == "gabor" ? ChannelBank::Family::gabor
              : fam == "laguerre_gauss" ? ChannelBank::Family::laguerre_gauss
                                        : ChannelBank::Family::dog;
  bank.side = meta["side"];
  bank.pitch_dva = meta["pitch_dva"];
  bank.n_channels = meta["n_channels"];
  bank.center_freq_cpd = meta["center_freq_cpd"].get<std::vector<double>>();
  bank.orientation_rad = meta["orientation_rad"].get<std::vector<double>>();
  bank.profiles.resize(static_cast<std::size_t>(bank.n_channels) * bank.side * bank.side);
  std::ifstream f(path, std::ios::binary);
  std::vector<float> buf(bank.profiles.size());
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<std::size_t>(f.gcount()) != buf.size() * sizeof(float))
    throw std::runtime_error("read_bank: truncated profile file");
  for (std::size_t i = 0; i < buf.size(); ++i) bank.profiles[i] = buf[i];
  return bank;
}

}  // namespace fovsim
