#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fovsim/channels.hpp"
#include "fovsim/observers.hpp"
#include "fovsim/stimulus.hpp"

namespace fovsim {

struct BandTemplate {
  double eccentricity_dva = 0.0;
  ChannelBank bank;
  Template tmpl;          // FCHO template for this band
  ResponseStats stats;    // sigma includes internal noise
  double sigma_raw = 0.0; // response SD without internal noise
};

// One foveated template per integer eccentricity band. Band 0 is the foveal
// Gabor CHO; eccentricities beyond the last band clamp to it.
struct EccentricityLadder {
  std::vector<BandTemplate> bands;
  FoveationParams params;
  VolumeGeometry geom;
  NoiseSpec noise;
  SignalSpec signal;

  int band_index(double eccentricity_dva) const;
  const BandTemplate& band_for(double eccentricity_dva) const {
    return bands[band_index(eccentricity_dva)];
  }
};

EccentricityLadder build_ladder(const SignalSpec& signal, const NoiseSpec& noise,
                                const VolumeGeometry& geom, const FoveationParams& params,
                                int n_bands = 10, int n_slices = 5, int max_side = 127);

struct EccCurvePoint {
  double eccentricity_dva = 0.0;
  double dprime_analytic = 0.0;
  double dprime_mc = 0.0;
  double dprime_mc_se = 0.0;
};

// Forced-fixation curve: analytic d' per band plus a Monte-Carlo yes/no
// simulation on 2D noise fields (>= 100 trials per band).
std::vector<EccCurvePoint> dprime_vs_eccentricity(const EccentricityLadder& ladder, int trials,
                                                  std::uint64_t seed);

struct EccConditionData {
  SignalKind signal = SignalKind::microcalcification;
  double eccentricity_dva = 0.0;
  int n_present = 0;
  int n_absent = 0;
  int n_hits = 0;
  int n_fa = 0;
};

struct EccentricityDataset {
  std::vector<EccConditionData> conditions;
};

EccentricityDataset read_ecc_dataset(const std::string& path);
void write_ecc_dataset(const std::string& path, const EccentricityDataset& data);

// d' of the foveal-signal detection as a function of the channel frequency
// scaling, precomputed on a log grid and interpolated. Shared by the fit
// objective and the synthetic-dataset generator.
class FovealDetectabilityModel {
 public:
  FovealDetectabilityModel(const SignalSpec& signal, const NoiseSpec& noise,
                           const VolumeGeometry& geom, int n_slices = 1, int grid_points = 25,
                           double max_scaling = 40.0, int max_side = 127);
  // d' before internal-noise inflation.
  double dprime_raw(double scaling) const;

 private:
  std::vector<double> log_scalings_;
  std::vector<double> dprimes_;
};

struct FitResult {
  FoveationParams params;
  double log_likelihood = 0.0;
  bool converged = false;
  int evaluations = 0;
};

// Maximum-likelihood fit of (alpha, beta, K) to yes/no eccentricity data.
// Binomial likelihood with a per-condition criterion profiled out;
// Nelder-Mead in log-parameter space with multi-start.
FitResult fit_foveation_params(
    const EccentricityDataset& data,
    const std::function<double(SignalKind, double /*scaling*/)>& dprime_raw_fn,
    int max_evaluations = 4000);

// Convenience: builds the per-signal detectability models from specs.
FitResult fit_foveation_params(const EccentricityDataset& data, const NoiseSpec& noise,
                               const VolumeGeometry& geom, double contrast,
                               int max_evaluations = 4000);

// Predicted (hit, false-alarm) rates for given d' and criterion.
struct YesNoRates {
  double hit = 0.0;
  double fa = 0.0;
};
YesNoRates yes_no_rates(double dprime, double criterion);

// Synthetic dataset drawn from the model at known parameters (recovery tests).
EccentricityDataset synthesize_ecc_dataset(
    const std::function<double(SignalKind, double)>& dprime_raw_fn, const FoveationParams& truth,
    const std::vector<double>& eccentricities, int trials_per_point, std::uint64_t seed,
    double criterion = 0.0);

}  // namespace fovsim
