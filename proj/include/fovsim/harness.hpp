#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fovsim/foveation.hpp"
#include "fovsim/observers.hpp"
#include "fovsim/search.hpp"
#include "fovsim/stimulus.hpp"

namespace fovsim {

enum class TaskMode { lke, search };
std::string to_string(TaskMode mode);
TaskMode task_mode_from_string(const std::string& s);

struct ExperimentConfig {
  ObserverKind observer = ObserverKind::io;
  SignalSpec signal = SignalSpec::microcalc(0.45);
  NoiseSpec noise;
  VolumeGeometry geom{256, 256, 32, kDefaultPitchDva};
  TaskMode mode = TaskMode::search;
  int n_trials = 300;
  int n_training = 120;  // decision-threshold training trials
  std::uint64_t seed = 1;

  // Foveated observer only.
  FoveationParams fovea;
  std::optional<StoppingRule> stopping;  // trained when absent (search mode)
  int fsm_training_trials = 60;

  void validate() const;
};

enum class ErrorClass { hit, correct_rejection, false_alarm, search_error, recognition_error };
std::string to_string(ErrorClass e);

struct TrialRecord {
  int index = 0;
  bool present = false;
  std::optional<VoxelLoc> location;  // cue/signal center
  double statistic = 0.0;
  bool yes = false;
  VoxelLoc reported;
  int n_fixations = 0;
  double min_signal_distance_dva = 0.0;  // in-plane, over fixations (searching FSM only)
  bool fixated_signal = false;  // within 1 dva in-plane AND the signal's slice extent
  std::string stop_reason;
  std::uint64_t noise_seed = 0;
  // Misses are classifiable only when a fixation trace exists.
  std::optional<ErrorClass> error_class;
};

struct Metrics {
  int n_trials = 0;
  int hits = 0, misses = 0, false_alarms = 0, correct_rejections = 0;
  int search_errors = 0, recognition_errors = 0;
  double pc = 0.0;
  double pc_se = 0.0;
  double dprime = 0.0;
  double threshold = 0.0;  // decision cut applied to the statistic
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialRecord> records;
  Metrics metrics;
  std::optional<StoppingRule> trained_rule;  // foveated search only
};

// Scanning template for the configured linear observer (throws for fcho,
// which is not a single-template observer).
Template build_scanning_template(const ExperimentConfig& config, const SignalProfile& profile);

// 50% prevalence (alternating), per-trial noise substreams, threshold trained
// on an independent substream. LKE scores the statistic at the cued location
// only; search scans the full stack.
ExperimentResult run_experiment(const ExperimentConfig& config);

Metrics compute_metrics(const std::vector<TrialRecord>& records, double threshold);

// eta = (c_io / c_obs)^2 at matched performance.
double statistical_efficiency(double c_io, double c_obs);

struct ContrastMatch {
  double contrast = 0.0;
  double pc = 0.0;
  double pc_se = 0.0;
  bool converged = false;
  int evaluations = 0;
};

// Bisection on contrast until |PC - target| <= pc_tol or the bracket is below
// bracket_tol. Throws std::runtime_error if the target is outside the bracket.
ContrastMatch match_contrast(ExperimentConfig config, double target_pc, double c_lo = 0.0,
                             double c_hi = 2.0, double pc_tol = 0.01, double bracket_tol = 1e-4);

// hit/CR/FA from truth and decision; misses split into search errors (the
// signal was never fixated within 1 dva in-plane and its slice extent) and
// recognition errors (fixated but still missed).
ErrorClass classify_trial(bool present, bool yes, bool fixated_signal);

// One structured-text object per line; deterministic field order.
void write_records_jsonl(const std::string& path, const ExperimentResult& result);

}  // namespace fovsim
