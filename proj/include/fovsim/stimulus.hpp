#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fovsim/core.hpp"
#include "fovsim/rng.hpp"

namespace fovsim {

struct NoiseSpec {
  double exponent = 2.8;  // power-spectrum exponent beta
  double mean = 128.0;    // gray levels
  double sigma = 25.0;    // gray levels
  std::uint64_t seed = 0;
  // The filtered field is rescaled so the sample SD equals sigma. Recorded in
  // volume metadata so downstream consumers can see the convention in use.
  bool renormalize_sigma = true;

  void validate() const;
};

enum class SignalKind { microcalcification, mass };

std::string to_string(SignalKind kind);
SignalKind signal_kind_from_string(const std::string& s);

struct SignalSpec {
  SignalKind kind = SignalKind::microcalcification;
  // Sphere diameter in voxels for the microcalcification, Gaussian sigma in
  // voxels for the mass.
  double size_voxels = 6.0;
  double contrast = 0.45;  // peak amplitude as a fraction of the background mean

  static SignalSpec microcalc(double contrast) {
    return SignalSpec{SignalKind::microcalcification, 6.0, contrast};
  }
  static SignalSpec mass(double contrast) { return SignalSpec{SignalKind::mass, 10.0, contrast}; }
  void validate() const;
};

// Small centered array holding the signal; odd dims, center at (hx, hy, hz).
struct SignalProfile {
  int sx = 0, sy = 0, sz = 0;  // side lengths (odd)
  std::vector<double> values;  // x-fastest
  int hx() const { return sx / 2; }
  int hy() const { return sy / 2; }
  int hz() const { return sz / 2; }
  double at(int x, int y, int z) const {
    return values[(static_cast<std::size_t>(z) * sy + y) * sx + x];
  }
  double peak() const;
};

struct TrialStimulus {
  Volume volume;
  bool present = false;
  std::optional<VoxelLoc> location;
  SignalSpec spec;
};

// Power-law filtered Gaussian noise. Radial frequency is taken over wrapped
// integer frequency indexes; the DC bin carries the mean only.
Volume generate_noise_volume(const NoiseSpec& spec, const VolumeGeometry& geom);

// Expected covariance power spectrum of the generated noise, normalized so
// that (1/N) * sum_k S(k) == sigma^2 (i.e. the per-voxel variance). Same
// layout as an unshifted FFT of the volume.
std::vector<double> noise_power_spectrum(const NoiseSpec& spec, const VolumeGeometry& geom);

// Peak amplitude = contrast * background_mean. The mass profile is truncated
// at 2 sigma per axis, clamped along z so the support fits the stack.
SignalProfile make_signal_profile(const SignalSpec& spec, const VolumeGeometry& geom,
                                  double background_mean);

void embed_signal(Volume& bg, const SignalProfile& s, const VoxelLoc& loc);
void subtract_signal(Volume& bg, const SignalProfile& s, const VoxelLoc& loc);

// Valid placement range for the profile center: [lo, hi] inclusive per axis.
struct PlacementBounds {
  VoxelLoc lo, hi;
};
PlacementBounds placement_bounds(const SignalProfile& s, const VolumeGeometry& geom,
                                 int extra_margin_xy = 0);
VoxelLoc random_location(const PlacementBounds& b, Rng& rng);

// Single-slice stimulus: the signal's central slice when present, else the
// center slice of the stack.
TrialStimulus extract_2d_slice(const TrialStimulus& stim);

// Raw little-endian float32 (x-fastest) plus a JSON sidecar at path + ".json".
void write_volume(const std::string& path, const Volume& vol, const NoiseSpec& spec);
Volume read_volume(const std::string& path);

}  // namespace fovsim
