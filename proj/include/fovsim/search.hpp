#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fovsim/foveation.hpp"
#include "fovsim/rng.hpp"
#include "fovsim/stimulus.hpp"

namespace fovsim {

struct Fixation {
  int x = 0;
  int y = 0;
  int slice = 0;
  double duration_ms = 0.0;  // replay only
  int ordinal = 0;
};

struct FixationTrace {
  std::vector<Fixation> fixations;
  bool empty_input = false;  // an empty (but well-formed) file was ingested
};

// Trace file: header trial,n,x,y,slice,duration_ms; one row per fixation.
// Fixations shorter than 50 ms are dropped.
FixationTrace ingest_trace(const std::string& path, int trial = 0);
void write_trace(const std::string& path, const FixationTrace& trace, int trial = 0);

struct StoppingRule {
  static constexpr int kMaxFixations = 30;
  std::array<double, kMaxFixations + 1> theta{};  // per-slice fixation-count thresholds
  double final_threshold = 0.0;                   // on log Lambda^FSM
  double coverage_fraction = 0.25;                // explored-volume stop
  double ufov_radius_dva = 2.5;

  // Defaults from the search-task condition: 3D {mcalc 0.25, mass 0.10},
  // 2D {mcalc 0.80, mass 0.60}.
  static double default_coverage(SignalKind kind, bool is3d);
  double theta_for(int n) const { return theta[std::clamp(n, 0, kMaxFixations)]; }
};

struct ScrollPolicy {
  // Scroll (advance a slice) when the fixation's peak log LR falls below this
  // fraction of the expected foveal signal log LR (d0^2 / 2). Referencing the
  // foveal detectability rather than theta_N keeps the policy defined while
  // the stopping thresholds are still being trained.
  double trigger_fraction = 0.35;

  // 0.35 for the microcalcification, 0.7 for the mass.
  static double default_fraction(SignalKind kind);
};

enum class StopReason { threshold, coverage, trace_end, none };
std::string to_string(StopReason reason);

enum class FsmMode { map, replay };

struct FsmStep {
  Fixation fixation;
  double max_lambda = 0.0;       // after the depth-shift max
  int slice_fixation_count = 0;  // N on this slice, this step included
  bool scrolled = false;         // this step was reached by a scroll
};

struct FsmTrialResult {
  bool yes = false;
  double statistic = 0.0;  // log Lambda^FSM
  StopReason stop_reason = StopReason::none;
  VoxelLoc reported_location;
  double explored_fraction = 0.0;
  std::vector<FsmStep> steps;
};

struct FsmConfig {
  StoppingRule rule;
  ScrollPolicy policy;
  bool use_depth_shifts = true;            // lambda_v = max over delta in [-2, 2]
  double inhibition_radius_dva = 1.0;      // prior-fovea truncation disc
  int max_steps = 4000;                    // hard safety stop
};

// Trial-independent band-kernel spectra; compute once and share across the
// trials of an experiment.
struct FsmSharedSpectra {
  VolumeGeometry geom;
  std::vector<std::vector<fft::cvec>> band_kernel_spectra;  // [band][template slice]
};

FsmSharedSpectra precompute_band_spectra(const EccentricityLadder& ladder,
                                         const VolumeGeometry& geom);

// Per-fixation foveated responses, log-domain likelihood integration, MAP
// saccades with inhibition of return, drilling scroll policy and stopping
// rules. Instantiated per trial; exposes the stages for unit tests.
class FsmEngine {
 public:
  FsmEngine(const EccentricityLadder& ladder, const FsmConfig& config, const Volume& volume,
            Rng rng, const FsmSharedSpectra* shared = nullptr);

  // Deterministic template response fields plus fresh internal noise, mapped
  // through the voxel's band to a per-voxel log likelihood ratio on the
  // displayed slice (depth-shift max already applied). Entries outside the
  // scan margin are -inf.
  std::vector<double> process_fixation(const Fixation& fix);

  // Accumulates the log likelihood ratio of this fixation's field into the
  // slice's running log Lambda.
  void integrate_fixation(const Fixation& fix, const std::vector<double>& lambda);

  Fixation map_next_fixation(int slice, const std::vector<double>& lambda) const;
  StopReason should_stop(int slice, double max_lambda) const;

  // true: advance a slice (drilling); false: saccade on the current slice.
  bool scroll_step(int slice, double max_lambda) const;

  FsmTrialResult decide() const;

  FsmTrialResult run_map();
  FsmTrialResult run_replay(const FixationTrace& trace);

  double explored_fraction() const { return explored_fraction_; }
  const std::vector<double>& accumulated_loglr(int slice) const { return accum_loglr_[slice]; }
  int band_at(const Fixation& fix, int x, int y) const;

 private:
  void stamp_coverage(const Fixation& fix);
  void stamp_inhibition(const Fixation& fix);
  const std::vector<double>& band_field(int band, int center_slice);
  const fft::cvec& slice_spectrum(int z);

  const EccentricityLadder& ladder_;
  FsmConfig config_;
  const Volume& volume_;
  Rng rng_;

  int nx_ = 0, ny_ = 0, nz_ = 0;
  int n_bands_ = 0;
  int scroll_dir_ = +1;

  // Slice-kernel spectra per band (n_slices 2D transforms each); owned when
  // no shared set was supplied.
  FsmSharedSpectra owned_spectra_;
  const FsmSharedSpectra* spectra_ = nullptr;
  std::vector<std::optional<fft::cvec>> slice_spectra_;
  // Deterministic correlation field per (band, template-center slice).
  std::vector<std::vector<std::optional<std::vector<double>>>> field_cache_;

  std::vector<std::vector<double>> accum_loglr_;   // per slice
  std::vector<std::vector<char>> coverage_mask_;   // per slice
  std::vector<std::vector<char>> inhibition_mask_; // per slice
  std::vector<int> fixation_count_;                // per slice
  std::size_t covered_voxels_ = 0;
  double explored_fraction_ = 0.0;
  std::vector<FsmStep> steps_;
};

FsmTrialResult run_fsm_trial(const TrialStimulus& stim, const EccentricityLadder& ladder,
                             const FsmConfig& config, FsmMode mode, Rng rng,
                             const FixationTrace* trace = nullptr,
                             const FsmSharedSpectra* shared = nullptr);

// LKE variant: a single fixation at the cued location on the signal's central
// slice; the statistic is the accumulated log LR at the cue.
FsmTrialResult run_fsm_lke_trial(const TrialStimulus& stim, const EccentricityLadder& ladder,
                                 const FsmConfig& config, const VoxelLoc& cue, Rng rng,
                                 const FsmSharedSpectra* shared = nullptr);

struct ThresholdTrainingResult {
  StoppingRule rule;
  double training_pc = 0.0;  // PC of the final-threshold yes/no on the training set
  std::vector<int> bin_counts;  // trials contributing per N
};

// Trains theta_N (per-slice fixation-count stopping thresholds) and the final
// decision threshold on independent trials run with stopping disabled except
// for coverage. Per-N grids search the observed decision-variable quantiles;
// sparse bins are smoothed by isotonic regression across N.
ThresholdTrainingResult train_thresholds(
    const EccentricityLadder& ladder, const FsmConfig& skeleton,
    const std::vector<TrialStimulus>& training_trials, std::uint64_t seed);

}  // namespace fovsim
