#pragma once

#include <optional>
#include <vector>

#include "fovsim/channels.hpp"
#include "fovsim/core.hpp"
#include "fovsim/fft.hpp"
#include "fovsim/stimulus.hpp"

namespace fovsim {

enum class ObserverKind { io, npw, npwe, cho_gabor, cho_lg, cho_dog, fcho };

std::string to_string(ObserverKind kind);
ObserverKind observer_kind_from_string(const std::string& s);

// Linear scanning template. Either a finite-support stack of 2D kernels
// (side^2 each, n_slices centered on the signal's central slice) or, for the
// ideal observer, a full-volume frequency response (the prewhitened template
// has unbounded support under 1/f^beta noise).
struct Template {
  ObserverKind kind = ObserverKind::npw;
  int side = 0;      // odd
  int n_slices = 1;  // odd
  std::vector<double> slices;  // n_slices x side^2

  bool spectral = false;
  VolumeGeometry spectral_geom;
  fft::cvec freq_response;  // W(k), DC forced to zero

  double ridge_lambda = 0.0;  // regularization used in the channel solve, if any

  const double* slice_kernel(int n) const {
    return slices.data() + static_cast<std::size_t>(n) * side * side;
  }
};

struct ResponseStats {
  double mu_plus = 0.0;   // E[lambda | signal centered]
  double mu_minus = 0.0;  // E[lambda | absent] (0 for mean-subtracted scans)
  double sigma = 0.0;     // SD of the response, internal noise included
  double dprime() const { return (mu_plus - mu_minus) / sigma; }
};

// Scanned response field. Values outside the valid margin are present but
// flagged invalid (circular wrap region).
struct ScanField {
  VolumeGeometry geom;
  std::vector<double> values;
  int margin_xy = 0;
  int margin_z = 0;

  bool valid(int x, int y, int z) const {
    return x >= margin_xy && x < geom.nx - margin_xy && y >= margin_xy &&
           y < geom.ny - margin_xy && z >= margin_z && z < geom.nz - margin_z;
  }
};

struct DecisionOutcome {
  double statistic = 0.0;  // log decision variable
  bool yes = false;
  VoxelLoc argmax;
};

// Mean 2D power spectrum of a slice of the 3D noise field (marginal over kz).
std::vector<double> slice_power_spectrum(const NoiseSpec& spec, const VolumeGeometry& geom);

// w = K^-1 s via the stationary spectrum, as a full-volume frequency response.
// Spectrum values below 1e-12 * max are clamped before division.
Template io_template(const NoiseSpec& spec, const VolumeGeometry& geom, const SignalProfile& s);

// w = s, cropped/padded to n_slices central slices.
Template npw_template(const SignalProfile& s, int n_slices = 5);

// Radial eye-filter gain xi(rho) = rho^alpha * exp(-beta * rho^gamma).
double eye_filter_gain(double rho, double alpha = 1.4, double beta = 0.013,
                       double gamma = 2.6);

// Per-slice w_n = F^-1(xi^2 F(s_n)), slices stacked; xi is evaluated on the
// radial frequency-index grid (the noise spectrum's axis).
Template npwe_template(const SignalProfile& s, const VolumeGeometry& geom, int n_slices = 5);

// Hybrid 2D-channel / 3D-template Hotelling: per slice v_n = T^t s_n,
// K_v = T^t K_g T (from the stationary slice spectrum), w_n = T K_v^-1 v_n.
Template cho_template(const ChannelBank& bank, const NoiseSpec& spec, const VolumeGeometry& geom,
                      const SignalProfile& s, int n_slices = 5,
                      ObserverKind kind = ObserverKind::cho_gabor);

// Channel covariance from the stationary slice spectrum (channels embedded in
// the geometry's in-plane grid).
std::vector<double> channel_covariance(const ChannelBank& bank, const NoiseSpec& spec,
                                       const VolumeGeometry& geom);

// Sample-covariance estimate from noise patches (validation mode).
std::vector<double> channel_covariance_sampled(const ChannelBank& bank, const NoiseSpec& spec,
                                               const VolumeGeometry& geom, int n_patches,
                                               std::uint64_t seed);

// Solves (A + lambda I) x = b for SPD A (n x n, row-major); escalates lambda
// from zero on Cholesky failure and reports the value used.
std::vector<double> spd_solve(std::vector<double> a, std::vector<double> b, int n,
                              double* ridge_out = nullptr);

// lambda = w (cross-)correlated with (g - mean); FFT-based, circular, with the
// wrap margin flagged invalid for finite-support templates.
ScanField scan_respond(const Template& tmpl, const Volume& vol, double noise_mean);

// Analytic stats under stationarity: mu+ = w.s, mu- = 0,
// sigma^2 = (w^t K w) * (1 + K_int^2).
ResponseStats response_stats(const Template& tmpl, const SignalProfile& s, const NoiseSpec& spec,
                             const VolumeGeometry& geom, double internal_noise_gain = 0.0);

// In-place map to log likelihood ratios: logLR = (mu+ - mu-)(lambda - (mu+ + mu-)/2) / sigma^2.
void loglr_field(ScanField& field, const ResponseStats& stats);

// Analytic d' of the template against this signal/noise.
double analytic_dprime(const Template& tmpl, const SignalProfile& s, const NoiseSpec& spec,
                       const VolumeGeometry& geom, double internal_noise_gain = 0.0);

// IO: log-sum-exp of log-LRs over the valid region; others: max log-LR.
// The argmax voxel is reported either way (ties: lowest linear index).
DecisionOutcome decide(const ScanField& loglr, ObserverKind kind, double log_threshold);

// Export: raw float kernels + JSON descriptor.
void write_template(const std::string& path, const Template& tmpl);

}  // namespace fovsim
