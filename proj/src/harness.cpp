#include "fovsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fovsim/stats.hpp"

namespace fovsim {

using json = nlohmann::json;

std::string to_string(TaskMode mode) { return mode == TaskMode::lke ? "lke" : "search"; }

TaskMode task_mode_from_string(const std::string& s) {
  if (s == "lke") return TaskMode::lke;
  if (s == "search") return TaskMode::search;
  throw std::invalid_argument("task_mode_from_string: unknown mode '" + s + "'");
}

std::string to_string(ErrorClass e) {
  switch (e) {
    case ErrorClass::hit: return "hit";
    case ErrorClass::correct_rejection: return "correct_rejection";
    case ErrorClass::false_alarm: return "false_alarm";
    case ErrorClass::search_error: return "search_error";
    case ErrorClass::recognition_error: return "recognition_error";
  }
  throw std::logic_error("to_string: bad ErrorClass");
}

void ExperimentConfig::validate() const {
  signal.validate();
  noise.validate();
  geom.validate();
  fovea.validate();
  if (n_trials < 1) throw std::invalid_argument("ExperimentConfig: n_trials must be >= 1");
  if (n_training < 0) throw std::invalid_argument("ExperimentConfig: n_training must be >= 0");
  if (fsm_training_trials < 2)
    throw std::invalid_argument("ExperimentConfig: fsm_training_trials must be >= 2");
}

double statistical_efficiency(double c_io, double c_obs) {
  if (!(c_io > 0.0) || !(c_obs > 0.0))
    throw std::invalid_argument("statistical_efficiency: contrasts must be > 0");
  const double r = c_io / c_obs;
  return r * r;
}

ErrorClass classify_trial(bool present, bool yes, bool fixated_signal) {
  if (present && yes) return ErrorClass::hit;
  if (present && !yes)
    return fixated_signal ? ErrorClass::recognition_error : ErrorClass::search_error;
  if (yes) return ErrorClass::false_alarm;
  return ErrorClass::correct_rejection;
}

Metrics compute_metrics(const std::vector<TrialRecord>& records, double threshold) {
  Metrics m;
  m.n_trials = static_cast<int>(records.size());
  m.threshold = threshold;
  for (const auto& r : records) {
    if (r.present) {
      r.yes ? ++m.hits : ++m.misses;
    } else {
      r.yes ? ++m.false_alarms : ++m.correct_rejections;
    }
    if (r.error_class == ErrorClass::search_error) ++m.search_errors;
    if (r.error_class == ErrorClass::recognition_error) ++m.recognition_errors;
  }
  if (m.n_trials > 0) {
    m.pc = static_cast<double>(m.hits + m.correct_rejections) / m.n_trials;
    m.pc_se = binomial_se(m.pc, m.n_trials);
  }
  if (m.hits + m.misses > 0 && m.false_alarms + m.correct_rejections > 0)
    m.dprime = dprime_yesno(m.hits, m.misses, m.false_alarms, m.correct_rejections);
  return m;
}

namespace {

struct TrialSetup {
  TrialStimulus stim;
  VoxelLoc cue;  // signal location when present, a matched draw otherwise
  std::uint64_t noise_seed = 0;
};

// Alternating prevalence keeps present/absent exactly balanced per block.
TrialSetup make_trial(const ExperimentConfig& cfg, const SignalProfile& profile,
                      const PlacementBounds& bounds, const std::string& stream, int index) {
  TrialSetup setup;
  setup.noise_seed = Rng::substream(cfg.seed, stream + "-noise", index).next_u64();
  NoiseSpec ns = cfg.noise;
  ns.seed = setup.noise_seed;
  setup.stim.volume = generate_noise_volume(ns, cfg.geom);
  setup.stim.present = index % 2 == 0;
  setup.stim.spec = cfg.signal;
  Rng loc_rng = Rng::substream(cfg.seed, stream + "-loc", index);
  setup.cue = random_location(bounds, loc_rng);
  if (setup.stim.present) {
    embed_signal(setup.stim.volume, profile, setup.cue);
    setup.stim.location = setup.cue;
  }
  return setup;
}

double best_cut(std::vector<std::pair<double, bool>> labeled) {
  if (labeled.empty()) throw std::invalid_argument("best_cut: no training statistics");
  std::sort(labeled.begin(), labeled.end());
  double cut = labeled.front().first - 1.0;
  int best_correct = -1;
  auto eval = [&](double c) {
    int correct = 0;
    for (const auto& [stat, present] : labeled)
      if ((stat > c) == present) ++correct;
    if (correct > best_correct) {
      best_correct = correct;
      cut = c;
    }
  };
  eval(labeled.front().first - 1.0);
  for (std::size_t i = 0; i + 1 < labeled.size(); ++i)
    eval(0.5 * (labeled[i].first + labeled[i + 1].first));
  eval(labeled.back().first + 1.0);
  return cut;
}

}  // namespace

Template build_scanning_template(const ExperimentConfig& cfg, const SignalProfile& profile) {
  const double pitch = cfg.geom.pitch_dva;
  const int n_slices = cfg.geom.nz > 1 ? std::min(5, cfg.geom.nz) : 1;
  const int cap = std::min(cfg.geom.nx, cfg.geom.ny) / 2;
  const int max_side = std::min(127, cap % 2 == 0 ? cap - 1 : cap);
  switch (cfg.observer) {
    case ObserverKind::io:
      return io_template(cfg.noise, cfg.geom, profile);
    case ObserverKind::npw:
      return npw_template(profile, n_slices);
    case ObserverKind::npwe:
      return npwe_template(profile, cfg.geom, n_slices);
    case ObserverKind::cho_gabor: {
      const auto bank =
          gabor_bank(drop_above_nyquist(cho_frequencies_cpd(), pitch), 8, pitch, max_side);
      return cho_template(bank, cfg.noise, cfg.geom, profile, n_slices, ObserverKind::cho_gabor);
    }
    case ObserverKind::cho_lg:
      return cho_template(laguerre_gauss_bank_default(pitch, max_side), cfg.noise, cfg.geom,
                          profile, n_slices, ObserverKind::cho_lg);
    case ObserverKind::cho_dog:
      return cho_template(dog_bank_default(pitch, max_side), cfg.noise, cfg.geom, profile,
                          n_slices, ObserverKind::cho_dog);
    case ObserverKind::fcho:
      throw std::logic_error("build_scanning_template: fcho is not a linear scanning observer");
  }
  throw std::logic_error("build_scanning_template: bad observer kind");
}

namespace {

ExperimentResult run_linear(const ExperimentConfig& cfg) {
  const SignalProfile profile = make_signal_profile(cfg.signal, cfg.geom, cfg.noise.mean);
  const Template tmpl = build_scanning_template(cfg, profile);
  const ResponseStats stats = response_stats(tmpl, profile, cfg.noise, cfg.geom);
  const int margin = tmpl.spectral ? 0 : tmpl.side / 2;
  const PlacementBounds bounds = placement_bounds(profile, cfg.geom, margin);

  auto score = [&](const TrialSetup& setup, double threshold) {
    ScanField field = scan_respond(tmpl, setup.stim.volume, cfg.noise.mean);
    loglr_field(field, stats);
    TrialRecord rec;
    if (cfg.mode == TaskMode::lke) {
      rec.statistic =
          field.values[cfg.geom.index(setup.cue.x, setup.cue.y, setup.cue.z)];
      rec.yes = rec.statistic > threshold;
      rec.reported = setup.cue;
    } else {
      const DecisionOutcome out = decide(field, cfg.observer, threshold);
      rec.statistic = out.statistic;
      rec.yes = out.yes;
      rec.reported = out.argmax;
    }
    return rec;
  };

  // LKE log LRs are equal-variance Gaussian, so the optimal cut is 0 exactly;
  // the search statistic's optimum is trained empirically.
  double threshold = 0.0;
  if (cfg.mode == TaskMode::search) {
    std::vector<std::pair<double, bool>> labeled;
    for (int i = 0; i < cfg.n_training; ++i) {
      const TrialSetup setup = make_trial(cfg, profile, bounds, "train", i);
      labeled.emplace_back(score(setup, 0.0).statistic, setup.stim.present);
    }
    threshold = best_cut(std::move(labeled));
  }

  ExperimentResult result;
  result.config = cfg;
  for (int i = 0; i < cfg.n_trials; ++i) {
    const TrialSetup setup = make_trial(cfg, profile, bounds, "test", i);
    TrialRecord rec = score(setup, threshold);
    rec.index = i;
    rec.present = setup.stim.present;
    rec.location = setup.stim.present ? std::optional<VoxelLoc>(setup.cue) : std::nullopt;
    rec.noise_seed = setup.noise_seed;
    rec.stop_reason = "scan";
    if (!rec.present || rec.yes)
      rec.error_class = classify_trial(rec.present, rec.yes, false);
    result.records.push_back(rec);
  }
  result.metrics = compute_metrics(result.records, threshold);
  return result;
}

ExperimentResult run_foveated(const ExperimentConfig& cfg) {
  const bool is3d = cfg.geom.nz > 1;
  const int n_slices = is3d ? std::min(5, cfg.geom.nz) : 1;
  const EccentricityLadder ladder =
      build_ladder(cfg.signal, cfg.noise, cfg.geom, cfg.fovea, 10, n_slices);
  const FsmSharedSpectra shared = precompute_band_spectra(ladder, cfg.geom);
  const SignalProfile profile = make_signal_profile(cfg.signal, cfg.geom, cfg.noise.mean);

  int margin = 0;
  for (const auto& band : ladder.bands) margin = std::max(margin, band.tmpl.side / 2);
  const PlacementBounds bounds = placement_bounds(profile, cfg.geom, margin);

  FsmConfig fc;
  fc.policy.trigger_fraction = ScrollPolicy::default_fraction(cfg.signal.kind);
  fc.rule.coverage_fraction = StoppingRule::default_coverage(cfg.signal.kind, is3d);
  fc.use_depth_shifts = is3d;

  ExperimentResult result;
  result.config = cfg;

  if (cfg.mode == TaskMode::search) {
    if (cfg.stopping) {
      fc.rule = *cfg.stopping;
    } else {
      std::vector<TrialStimulus> training;
      for (int i = 0; i < cfg.fsm_training_trials; ++i)
        training.push_back(make_trial(cfg, profile, bounds, "fsm-train", i).stim);
      fc.rule = train_thresholds(ladder, fc, training, cfg.seed).rule;
    }
    result.trained_rule = fc.rule;
  } else {
    // LKE cut trained on independent single-fixation trials.
    std::vector<std::pair<double, bool>> labeled;
    for (int i = 0; i < cfg.n_training; ++i) {
      const TrialSetup setup = make_trial(cfg, profile, bounds, "fsm-lke-train", i);
      const auto out = run_fsm_lke_trial(setup.stim, ladder, fc, setup.cue,
                                         Rng::substream(cfg.seed, "fsm-lke-train-int", i),
                                         &shared);
      labeled.emplace_back(out.statistic, setup.stim.present);
    }
    fc.rule.final_threshold = best_cut(std::move(labeled));
  }

  const double sig_half_z = n_slices / 2;  // slice extent of the scanning template
  for (int i = 0; i < cfg.n_trials; ++i) {
    const TrialSetup setup = make_trial(cfg, profile, bounds, "test", i);
    const Rng trial_rng = Rng::substream(cfg.seed, "fsm-test-int", i);
    FsmTrialResult out;
    if (cfg.mode == TaskMode::lke) {
      out = run_fsm_lke_trial(setup.stim, ladder, fc, setup.cue, trial_rng, &shared);
    } else {
      out = run_fsm_trial(setup.stim, ladder, fc, FsmMode::map, trial_rng, nullptr, &shared);
    }

    TrialRecord rec;
    rec.index = i;
    rec.present = setup.stim.present;
    rec.location = setup.stim.present ? std::optional<VoxelLoc>(setup.cue) : std::nullopt;
    rec.statistic = out.statistic;
    rec.yes = out.yes;
    rec.reported = out.reported_location;
    rec.n_fixations = static_cast<int>(out.steps.size());
    rec.stop_reason = to_string(out.stop_reason);
    rec.noise_seed = setup.noise_seed;
    rec.min_signal_distance_dva = std::numeric_limits<double>::infinity();
    if (rec.present) {
      for (const auto& step : out.steps) {
        const double d = dva_between(cfg.geom, step.fixation.x, step.fixation.y, setup.cue.x,
                                     setup.cue.y);
        rec.min_signal_distance_dva = std::min(rec.min_signal_distance_dva, d);
        const bool on_slice = !is3d || std::abs(step.fixation.slice - setup.cue.z) <= sig_half_z;
        if (d <= 1.0 && on_slice) rec.fixated_signal = true;
      }
    }
    if (cfg.mode == TaskMode::search || !rec.present || rec.yes)
      rec.error_class = classify_trial(rec.present, rec.yes, rec.fixated_signal);
    result.records.push_back(rec);
  }
  result.metrics = compute_metrics(result.records, fc.rule.final_threshold);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.observer == ObserverKind::fcho) return run_foveated(config);
  return run_linear(config);
}

ContrastMatch match_contrast(ExperimentConfig config, double target_pc, double c_lo, double c_hi,
                             double pc_tol, double bracket_tol) {
  if (!(target_pc > 0.5 && target_pc < 1.0))
    throw std::invalid_argument("match_contrast: target PC must be in (0.5, 1)");
  ContrastMatch match;
  auto pc_at = [&](double c) {
    config.signal.contrast = c;
    ++match.evaluations;
    const auto result = run_experiment(config);
    return result.metrics;
  };
  const Metrics hi = pc_at(c_hi);
  if (hi.pc < target_pc)
    throw std::runtime_error("match_contrast: target PC unreachable at the upper bracket");
  double lo = c_lo, hi_c = c_hi;
  Metrics at = hi;
  match.contrast = c_hi;
  while (hi_c - lo > bracket_tol) {
    const double mid = 0.5 * (lo + hi_c);
    at = pc_at(mid);
    match.contrast = mid;
    if (std::abs(at.pc - target_pc) <= pc_tol) break;
    (at.pc < target_pc ? lo : hi_c) = mid;
  }
  match.pc = at.pc;
  match.pc_se = at.pc_se;
  match.converged = std::abs(at.pc - target_pc) <= pc_tol || hi_c - lo <= bracket_tol;
  return match;
}

void write_records_jsonl(const std::string& path, const ExperimentResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_records_jsonl: cannot open " + path);
  for (const auto& r : result.records) {
    json j;
    j["index"] = r.index;
    j["present"] = r.present;
    if (r.location)
      j["location"] = {r.location->x, r.location->y, r.location->z};
    j["statistic"] = r.statistic;
    j["yes"] = r.yes;
    j["reported"] = {r.reported.x, r.reported.y, r.reported.z};
    j["n_fixations"] = r.n_fixations;
    j["stop_reason"] = r.stop_reason;
    j["noise_seed"] = r.noise_seed;
    if (r.error_class) j["error_class"] = to_string(*r.error_class);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write_records_jsonl: write failed for " + path);
}

}  // namespace fovsim
