#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace fovsim {

struct FoveationParams {
  double alpha = 0.7063;
  double beta = 1.6953;
  double internal_noise_gain = 2.7813;  // K

  // Channel-frequency divisor at eccentricity E (dva).
  double scaling(double eccentricity_dva) const {
    return 1.0 + alpha * std::pow(eccentricity_dva, beta);
  }
  void validate() const;
};

struct ChannelBank {
  enum class Family { gabor, laguerre_gauss, dog };

  Family family = Family::gabor;
  int side = 0;           // odd patch side, voxels
  double pitch_dva = 0.0;
  int n_channels = 0;
  std::vector<double> profiles;  // n_channels x side^2, x-fastest per patch

  // Per-channel parameters (gabor only for freq/orientation).
  std::vector<double> center_freq_cpd;
  std::vector<double> orientation_rad;

  const double* channel(int c) const {
    return profiles.data() + static_cast<std::size_t>(c) * side * side;
  }
  std::size_t patch_pixels() const { return static_cast<std::size_t>(side) * side; }
};

// Frequency presets. The foveal FCHO set and the standard CHO set differ.
std::vector<double> fcho_frequencies_cpd();  // {32, 16, 8, 4, 2, 1}
std::vector<double> cho_frequencies_cpd();   // {0.5, 1, 2, 4, 8, 16}

// Drops frequencies at or above Nyquist for the given pitch; warns on stderr
// for each dropped entry.
std::vector<double> drop_above_nyquist(std::vector<double> freqs_cpd, double pitch_dva);

// Even-phase Gabors with 1-octave half-amplitude bandwidth, orientations
// evenly spaced over [0, pi). Throws std::domain_error if a frequency is at
// or above Nyquist. Patch side: smallest odd side holding 99% of each
// channel's energy (max over channels), capped at max_side.
ChannelBank gabor_bank(const std::vector<double>& freqs_cpd, int n_orientations,
                       double pitch_dva, int max_side = 127);

// Laguerre-Gauss channels u_j(r | a). literal_form keeps the source's a_u
// exponent arguments; the default uses the standard a_u^2 form.
ChannelBank laguerre_gauss_bank(const std::vector<int>& orders, const std::vector<double>& widths,
                                double pitch_dva, int max_side = 127, bool literal_form = false);
ChannelBank laguerre_gauss_bank_default(double pitch_dva, int max_side = 127);

// Difference-of-Gaussians channels, radial in the frequency domain
// (sigma_n = sigma0 * alpha^n, in cycles/pixel); spatial profiles by inverse
// FFT. literal_form uses exp(-f^2/(Q 2 sigma^2)); the alternative places Q
// inside the sigma.
ChannelBank dog_bank(double sigma0, double alpha, double q, int n_orders, double pitch_dva,
                     int max_side = 127, bool literal_form = true);
ChannelBank dog_bank_default(double pitch_dva, int max_side = 127);

// Radial gain of DoG channel n at radial frequency f (cycles/pixel).
double dog_radial_gain(double f, int n, double sigma0, double alpha, double q,
                       bool literal_form = true);

// Gabor bank with every center frequency divided by 1 + alpha E^beta.
ChannelBank scaled_gabor_bank(const std::vector<double>& base_freqs_cpd, int n_orientations,
                              double eccentricity_dva, const FoveationParams& params,
                              double pitch_dva, int max_side = 127);

// T^t patch: one scalar per channel. Throws on shape mismatch.
std::vector<double> channel_response(const ChannelBank& bank, const std::vector<double>& patch);

// Descriptor JSON at path + ".json" plus raw float32 profile matrix.
void write_bank(const std::string& path, const ChannelBank& bank);
ChannelBank read_bank(const std::string& path);

}  // namespace fovsim
