#include "fovsim/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fovsim/fft.hpp"
#include "fovsim/kernels.hpp"
#include "fovsim/stats.hpp"

namespace fovsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Odd side x side kernel embedded in an nx x ny field with its center wrapped
// to the origin, matching the correlation convention lambda = IFFT(G conj(W)).
std::vector<double> embed_wrapped_2d(const double* kernel, int side, int nx, int ny) {
  std::vector<double> out(static_cast<std::size_t>(nx) * ny, 0.0);
  const int h = side / 2;
  for (int v = 0; v < side; ++v) {
    const int y = ((v - h) % ny + ny) % ny;
    for (int u = 0; u < side; ++u) {
      const int x = ((u - h) % nx + nx) % nx;
      out[static_cast<std::size_t>(y) * nx + x] = kernel[static_cast<std::size_t>(v) * side + u];
    }
  }
  return out;
}

void stamp_disc(std::vector<char>& mask, int nx, int ny, int cx, int cy, double radius_voxels,
                std::size_t* newly_set = nullptr) {
  const int r = static_cast<int>(std::ceil(radius_voxels));
  const double r2 = radius_voxels * radius_voxels;
  for (int y = std::max(0, cy - r); y <= std::min(ny - 1, cy + r); ++y) {
    for (int x = std::max(0, cx - r); x <= std::min(nx - 1, cx + r); ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy > r2) continue;
      char& cell = mask[static_cast<std::size_t>(y) * nx + x];
      if (!cell) {
        cell = 1;
        if (newly_set) ++(*newly_set);
      }
    }
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

double StoppingRule::default_coverage(SignalKind kind, bool is3d) {
  if (is3d) return kind == SignalKind::microcalcification ? 0.25 : 0.10;
  return kind == SignalKind::microcalcification ? 0.80 : 0.60;
}

double ScrollPolicy::default_fraction(SignalKind kind) {
  return kind == SignalKind::microcalcification ? 0.35 : 0.70;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::threshold: return "threshold";
    case StopReason::coverage: return "coverage";
    case StopReason::trace_end: return "trace_end";
    case StopReason::none: return "none";
  }
  throw std::logic_error("to_string: bad StopReason");
}

FixationTrace ingest_trace(const std::string& path, int trial) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_trace: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty file, expected header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "trial,n,x,y,slice,duration_ms")
    throw std::runtime_error(path + ":1: bad header '" + line +
                             "', expected trial,n,x,y,slice,duration_ms");
  FixationTrace trace;
  int line_no = 1;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 6 fields, got " +
                               std::to_string(fields.size()));
    Fixation fix;
    int row_trial = 0;
    try {
      row_trial = std::stoi(fields[0]);
      fix.ordinal = std::stoi(fields[1]);
      fix.x = std::stoi(fields[2]);
      fix.y = std::stoi(fields[3]);
      fix.slice = std::stoi(fields[4]);
      fix.duration_ms = std::stod(fields[5]);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unparsable field in '" +
                               line + "'");
    }
    ++rows;
    if (row_trial != trial) continue;
    if (fix.duration_ms < 50.0) continue;  // blink/saccade residue
    trace.fixations.push_back(fix);
  }
  trace.empty_input = rows == 0;
  return trace;
}

void write_trace(const std::string& path, const FixationTrace& trace, int trial) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace: cannot open " + path);
  out << "trial,n,x,y,slice,duration_ms\n";
  for (const auto& f : trace.fixations) {
    out << trial << ',' << f.ordinal << ',' << f.x << ',' << f.y << ',' << f.slice << ','
        << f.duration_ms << '\n';
  }
  if (!out) throw std::runtime_error("write_trace: write failed for " + path);
}

FsmSharedSpectra precompute_band_spectra(const EccentricityLadder& ladder,
                                         const VolumeGeometry& geom) {
  FsmSharedSpectra shared;
  shared.geom = geom;
  shared.band_kernel_spectra.resize(ladder.bands.size());
  for (std::size_t b = 0; b < ladder.bands.size(); ++b) {
    const Template& t = ladder.bands[b].tmpl;
    shared.band_kernel_spectra[b].reserve(t.n_slices);
    for (int n = 0; n < t.n_slices; ++n) {
      const auto embedded = embed_wrapped_2d(t.slice_kernel(n), t.side, geom.nx, geom.ny);
      shared.band_kernel_spectra[b].push_back(fft::fft2_real(geom.nx, geom.ny, embedded.data()));
    }
  }
  return shared;
}

FsmEngine::FsmEngine(const EccentricityLadder& ladder, const FsmConfig& config,
                     const Volume& volume, Rng rng, const FsmSharedSpectra* shared)
    : ladder_(ladder), config_(config), volume_(volume), rng_(rng) {
  if (ladder_.bands.empty()) throw std::invalid_argument("FsmEngine: empty ladder");
  if (volume_.geom.nx != ladder_.geom.nx || volume_.geom.ny != ladder_.geom.ny)
    throw std::invalid_argument("FsmEngine: volume/ladder geometry mismatch");
  nx_ = volume_.geom.nx;
  ny_ = volume_.geom.ny;
  nz_ = volume_.geom.nz;
  n_bands_ = static_cast<int>(ladder_.bands.size());

  if (shared) {
    if (shared->geom.nx != nx_ || shared->geom.ny != ny_)
      throw std::invalid_argument("FsmEngine: shared spectra geometry mismatch");
    spectra_ = shared;
  } else {
    owned_spectra_ = precompute_band_spectra(ladder_, volume_.geom);
    spectra_ = &owned_spectra_;
  }
  slice_spectra_.resize(nz_);
  field_cache_.assign(n_bands_, std::vector<std::optional<std::vector<double>>>(nz_));

  const std::size_t slice_pixels = static_cast<std::size_t>(nx_) * ny_;
  accum_loglr_.assign(nz_, std::vector<double>(slice_pixels, 0.0));
  coverage_mask_.assign(nz_, std::vector<char>(slice_pixels, 0));
  inhibition_mask_.assign(nz_, std::vector<char>(slice_pixels, 0));
  fixation_count_.assign(nz_, 0);
}

int FsmEngine::band_at(const Fixation& fix, int x, int y) const {
  return ladder_.band_index(dva_between(volume_.geom, fix.x, fix.y, x, y));
}

const fft::cvec& FsmEngine::slice_spectrum(int z) {
  if (!slice_spectra_[z]) {
    std::vector<double> centered(volume_.slice(z),
                                 volume_.slice(z) + static_cast<std::size_t>(nx_) * ny_);
    for (auto& v : centered) v -= ladder_.noise.mean;
    slice_spectra_[z] = fft::fft2_real(nx_, ny_, centered.data());
  }
  return *slice_spectra_[z];
}

const std::vector<double>& FsmEngine::band_field(int band, int center_slice) {
  auto& slot = field_cache_[band][center_slice];
  if (!slot) {
    const Template& t = ladder_.bands[band].tmpl;
    const int h = t.n_slices / 2;
    fft::cvec acc(static_cast<std::size_t>(nx_) * ny_, {0.0, 0.0});
    for (int n = 0; n < t.n_slices; ++n) {
      const int z = center_slice + n - h;
      if (z < 0 || z >= nz_) continue;  // template slices beyond the stack are clipped
      kernels::cmul_conj_acc(slice_spectrum(z).data(),
                             spectra_->band_kernel_spectra[band][n].data(), acc.data(),
                             acc.size());
    }
    slot = fft::ifft2_to_real(nx_, ny_, acc);
  }
  return *slot;
}

std::vector<double> FsmEngine::process_fixation(const Fixation& fix) {
  const std::size_t slice_pixels = static_cast<std::size_t>(nx_) * ny_;
  std::vector<double> loglr(slice_pixels, kNegInf);

  int margin = 0;
  for (const auto& band : ladder_.bands) margin = std::max(margin, band.tmpl.side / 2);

  const int dz_lo = config_.use_depth_shifts ? -2 : 0;
  const int dz_hi = config_.use_depth_shifts ? 2 : 0;
  std::vector<const std::vector<double>*> fields(n_bands_ * (dz_hi - dz_lo + 1), nullptr);
  for (int b = 0; b < n_bands_; ++b) {
    for (int dz = dz_lo; dz <= dz_hi; ++dz) {
      const int cz = std::clamp(fix.slice + dz, 0, nz_ - 1);
      fields[static_cast<std::size_t>(b) * (dz_hi - dz_lo + 1) + (dz - dz_lo)] =
          &band_field(b, cz);
    }
  }

  for (int y = margin; y < ny_ - margin; ++y) {
    for (int x = margin; x < nx_ - margin; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * nx_ + x;
      const int b = band_at(fix, x, y);
      const BandTemplate& band = ladder_.bands[b];
      const double sigma_int = ladder_.params.internal_noise_gain * band.sigma_raw;
      double lam = kNegInf;
      for (int dz = dz_lo; dz <= dz_hi; ++dz) {
        const double det =
            (*fields[static_cast<std::size_t>(b) * (dz_hi - dz_lo + 1) + (dz - dz_lo)])[i];
        lam = std::max(lam, det + sigma_int * rng_.normal());
      }
      const double mu = band.stats.mu_plus;
      const double var = band.stats.sigma * band.stats.sigma;
      loglr[i] = mu * (lam - 0.5 * mu) / var;
    }
  }
  return loglr;
}

void FsmEngine::integrate_fixation(const Fixation& fix, const std::vector<double>& lambda) {
  auto& acc = accum_loglr_[fix.slice];
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (std::isfinite(lambda[i])) acc[i] += lambda[i];
  }
}

Fixation FsmEngine::map_next_fixation(int slice, const std::vector<double>& lambda) const {
  std::vector<double> vals;
  vals.reserve(lambda.size());
  for (const double v : lambda)
    if (std::isfinite(v)) vals.push_back(v);
  if (vals.empty()) throw std::logic_error("map_next_fixation: empty valid region");
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  const double median = vals[mid];

  const auto& inhibited = inhibition_mask_[slice];
  double best = kNegInf;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (!std::isfinite(lambda[i])) continue;
    const double v = inhibited[i] ? std::min(lambda[i], median) : lambda[i];
    if (v > best) {  // strict: ties keep the lowest index
      best = v;
      best_i = i;
    }
  }
  Fixation next;
  next.x = static_cast<int>(best_i % nx_);
  next.y = static_cast<int>(best_i / nx_);
  next.slice = slice;
  return next;
}

StopReason FsmEngine::should_stop(int slice, double max_lambda) const {
  const int n = fixation_count_[slice];
  if (max_lambda > config_.rule.theta_for(n)) return StopReason::threshold;
  if (explored_fraction_ >= config_.rule.coverage_fraction) return StopReason::coverage;
  return StopReason::none;
}

bool FsmEngine::scroll_step(int slice, double max_lambda) const {
  (void)slice;
  if (nz_ == 1) return false;
  const double d0 = ladder_.bands[0].stats.dprime();
  return max_lambda < config_.policy.trigger_fraction * 0.5 * d0 * d0;
}

FsmTrialResult FsmEngine::decide() const {
  int margin = 0;
  for (const auto& band : ladder_.bands) margin = std::max(margin, band.tmpl.side / 2);
  FsmTrialResult result;
  double best = 0.0;  // unexplored voxels carry log LR 0 (likelihood ratio 1)
  VoxelLoc best_loc{margin, margin, 0};
  for (int z = 0; z < nz_; ++z) {
    const auto& acc = accum_loglr_[z];
    for (int y = margin; y < ny_ - margin; ++y) {
      for (int x = margin; x < nx_ - margin; ++x) {
        const double v = acc[static_cast<std::size_t>(y) * nx_ + x];
        if (v > best) {
          best = v;
          best_loc = {x, y, z};
        }
      }
    }
  }
  result.statistic = best;
  result.reported_location = best_loc;
  result.yes = best > config_.rule.final_threshold;
  result.explored_fraction = explored_fraction_;
  return result;
}

void FsmEngine::stamp_coverage(const Fixation& fix) {
  const double radius = config_.rule.ufov_radius_dva / volume_.geom.pitch_dva;
  stamp_disc(coverage_mask_[fix.slice], nx_, ny_, fix.x, fix.y, radius, &covered_voxels_);
  explored_fraction_ =
      static_cast<double>(covered_voxels_) / static_cast<double>(volume_.geom.voxel_count());
}

void FsmEngine::stamp_inhibition(const Fixation& fix) {
  const double radius = config_.inhibition_radius_dva / volume_.geom.pitch_dva;
  stamp_disc(inhibition_mask_[fix.slice], nx_, ny_, fix.x, fix.y, radius);
}

FsmTrialResult FsmEngine::run_map() {
  Fixation fix;
  fix.x = nx_ / 2;
  fix.y = ny_ / 2;
  fix.slice = 0;
  bool scrolled = false;
  StopReason reason = StopReason::none;

  for (int step = 0; step < config_.max_steps; ++step) {
    fix.ordinal = step;
    const auto lambda = process_fixation(fix);
    integrate_fixation(fix, lambda);
    stamp_coverage(fix);
    stamp_inhibition(fix);
    ++fixation_count_[fix.slice];

    double max_lambda = kNegInf;
    for (const double v : lambda)
      if (std::isfinite(v)) max_lambda = std::max(max_lambda, v);

    steps_.push_back({fix, max_lambda, fixation_count_[fix.slice], scrolled});

    reason = should_stop(fix.slice, max_lambda);
    if (reason != StopReason::none) break;

    if (scroll_step(fix.slice, max_lambda)) {
      int next = fix.slice + scroll_dir_;
      if (next < 0 || next >= nz_) {  // reverse the drilling direction at the ends
        scroll_dir_ = -scroll_dir_;
        next = fix.slice + scroll_dir_;
      }
      fix.slice = next;
      scrolled = true;
    } else {
      fix = map_next_fixation(fix.slice, lambda);
      scrolled = false;
    }
  }
  if (reason == StopReason::none) reason = StopReason::coverage;  // safety cap

  FsmTrialResult result = decide();
  result.stop_reason = reason;
  result.steps = steps_;
  return result;
}

FsmTrialResult FsmEngine::run_replay(const FixationTrace& trace) {
  for (std::size_t k = 0; k < trace.fixations.size(); ++k) {
    Fixation fix = trace.fixations[k];
    if (!volume_.geom.contains(fix.x, fix.y, fix.slice))
      throw std::invalid_argument("run_replay: fixation outside the volume");
    const auto lambda = process_fixation(fix);
    integrate_fixation(fix, lambda);
    stamp_coverage(fix);
    stamp_inhibition(fix);
    ++fixation_count_[fix.slice];
    double max_lambda = kNegInf;
    for (const double v : lambda)
      if (std::isfinite(v)) max_lambda = std::max(max_lambda, v);
    steps_.push_back({fix, max_lambda, fixation_count_[fix.slice], false});
  }
  FsmTrialResult result = decide();
  result.stop_reason = StopReason::trace_end;
  result.steps = steps_;
  return result;
}

FsmTrialResult run_fsm_trial(const TrialStimulus& stim, const EccentricityLadder& ladder,
                             const FsmConfig& config, FsmMode mode, Rng rng,
                             const FixationTrace* trace, const FsmSharedSpectra* shared) {
  FsmEngine engine(ladder, config, stim.volume, rng, shared);
  if (mode == FsmMode::replay) {
    if (!trace) throw std::invalid_argument("run_fsm_trial: replay mode needs a trace");
    return engine.run_replay(*trace);
  }
  return engine.run_map();
}

FsmTrialResult run_fsm_lke_trial(const TrialStimulus& stim, const EccentricityLadder& ladder,
                                 const FsmConfig& config, const VoxelLoc& cue, Rng rng,
                                 const FsmSharedSpectra* shared) {
  FsmEngine engine(ladder, config, stim.volume, rng, shared);
  Fixation fix{cue.x, cue.y, cue.z, 0.0, 0};
  const auto lambda = engine.process_fixation(fix);
  engine.integrate_fixation(fix, lambda);

  FsmTrialResult result;
  const std::size_t i = static_cast<std::size_t>(cue.y) * stim.volume.geom.nx + cue.x;
  result.statistic = engine.accumulated_loglr(cue.z)[i];
  result.yes = result.statistic > config.rule.final_threshold;
  result.stop_reason = StopReason::trace_end;
  result.reported_location = cue;
  result.steps.push_back({fix, result.statistic, 1, false});
  return result;
}

namespace {

struct TrainingTrial {
  bool present = false;
  double final_statistic = 0.0;
  // Per fixation-count bin: max over this trial's steps with that N of the
  // step's peak log LR (-inf when the bin never occurred).
  std::array<double, StoppingRule::kMaxFixations + 1> bin_max;
};

double training_pc(const std::vector<TrainingTrial>& trials,
                   const std::array<double, StoppingRule::kMaxFixations + 1>& theta) {
  int correct = 0;
  for (const auto& t : trials) {
    bool yes = false;
    for (int n = 0; n <= StoppingRule::kMaxFixations && !yes; ++n)
      yes = t.bin_max[n] > theta[n];
    if (yes == t.present) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(trials.size());
}

// Pool-adjacent-violators for a non-increasing sequence.
std::array<double, StoppingRule::kMaxFixations + 1> isotonic_nonincreasing(
    const std::array<double, StoppingRule::kMaxFixations + 1>& theta) {
  constexpr int n = StoppingRule::kMaxFixations + 1;
  std::vector<double> level;
  std::vector<int> weight;
  for (int i = 0; i < n; ++i) {
    level.push_back(theta[i]);
    weight.push_back(1);
    while (level.size() >= 2 && level[level.size() - 2] < level.back()) {
      const double merged = (level[level.size() - 2] * weight[weight.size() - 2] +
                             level.back() * weight.back()) /
                            (weight[weight.size() - 2] + weight.back());
      weight[weight.size() - 2] += weight.back();
      level[level.size() - 2] = merged;
      level.pop_back();
      weight.pop_back();
    }
  }
  std::array<double, n> out{};
  int i = 0;
  for (std::size_t blk = 0; blk < level.size(); ++blk)
    for (int k = 0; k < weight[blk]; ++k) out[i++] = level[blk];
  return out;
}

}  // namespace

ThresholdTrainingResult train_thresholds(const EccentricityLadder& ladder,
                                         const FsmConfig& skeleton,
                                         const std::vector<TrialStimulus>& training_trials,
                                         std::uint64_t seed) {
  if (training_trials.empty()) throw std::invalid_argument("train_thresholds: no trials");

  constexpr int nbins = StoppingRule::kMaxFixations + 1;
  FsmConfig open = skeleton;
  open.rule.theta.fill(std::numeric_limits<double>::infinity());
  open.rule.final_threshold = 0.0;

  std::vector<TrainingTrial> trials;
  trials.reserve(training_trials.size());
  std::vector<int> bin_counts(nbins, 0);
  const FsmSharedSpectra shared =
      precompute_band_spectra(ladder, training_trials.front().volume.geom);

  for (std::size_t t = 0; t < training_trials.size(); ++t) {
    const auto result = run_fsm_trial(training_trials[t], ladder, open, FsmMode::map,
                                      Rng::substream(seed, "threshold-train", t), nullptr,
                                      &shared);
    TrainingTrial tt;
    tt.present = training_trials[t].present;
    tt.final_statistic = result.statistic;
    tt.bin_max.fill(kNegInf);
    for (const auto& step : result.steps) {
      const int n = std::clamp(step.slice_fixation_count, 0, StoppingRule::kMaxFixations);
      if (!(step.max_lambda > tt.bin_max[n])) continue;
      tt.bin_max[n] = step.max_lambda;
    }
    for (int n = 0; n < nbins; ++n)
      if (std::isfinite(tt.bin_max[n])) ++bin_counts[n];
    trials.push_back(tt);
  }

  // Coordinate ascent over per-bin thresholds, each bin searched on the
  // quantile grid of its observed peak values (plus "never stop").
  std::array<double, nbins> theta;
  theta.fill(std::numeric_limits<double>::infinity());
  double pc = training_pc(trials, theta);
  for (int pass = 0; pass < 3; ++pass) {
    for (int n = 0; n < nbins; ++n) {
      std::vector<double> observed;
      for (const auto& t : trials)
        if (std::isfinite(t.bin_max[n])) observed.push_back(t.bin_max[n]);
      if (observed.empty()) continue;
      std::sort(observed.begin(), observed.end());
      std::vector<double> candidates{std::numeric_limits<double>::infinity(),
                                     observed.front() - 1.0};
      const int grid = std::min<int>(199, static_cast<int>(observed.size()));
      for (int g = 0; g < grid; ++g) {
        const std::size_t i =
            static_cast<std::size_t>((g + 0.5) / grid * (observed.size() - 1) + 0.5);
        candidates.push_back(std::nextafter(observed[i], std::numeric_limits<double>::infinity()));
      }
      for (const double cand : candidates) {
        const double saved = theta[n];
        theta[n] = cand;
        const double trial_pc = training_pc(trials, theta);
        if (trial_pc > pc) {
          pc = trial_pc;
        } else {
          theta[n] = saved;
        }
      }
    }
  }

  // Empty bins inherit from the nearest trained neighbor.
  for (int n = 0; n < nbins; ++n) {
    if (bin_counts[n] > 0) continue;
    for (int d = 1; d < nbins; ++d) {
      if (n - d >= 0 && bin_counts[n - d] > 0) { theta[n] = theta[n - d]; break; }
      if (n + d < nbins && bin_counts[n + d] > 0) { theta[n] = theta[n + d]; break; }
    }
  }

  // Thresholds should loosen with dwell time; smooth unless it costs real PC.
  const auto smoothed = isotonic_nonincreasing(theta);
  if (training_pc(trials, smoothed) >= pc - 0.009) {
    theta = smoothed;
    pc = training_pc(trials, theta);
  }

  // Final decision threshold on the trial statistic, trained independently.
  std::vector<double> stats;
  for (const auto& t : trials) stats.push_back(t.final_statistic);
  std::sort(stats.begin(), stats.end());
  double best_cut = stats.front() - 1.0;
  int best_correct = -1;
  auto eval_cut = [&](double cut) {
    int correct = 0;
    for (const auto& t : trials)
      if ((t.final_statistic > cut) == t.present) ++correct;
    if (correct > best_correct) {
      best_correct = correct;
      best_cut = cut;
    }
  };
  eval_cut(stats.front() - 1.0);
  for (std::size_t i = 0; i + 1 < stats.size(); ++i) eval_cut(0.5 * (stats[i] + stats[i + 1]));
  eval_cut(stats.back() + 1.0);

  ThresholdTrainingResult out;
  out.rule = skeleton.rule;
  out.rule.theta = theta;
  out.rule.final_threshold = best_cut;
  out.training_pc = static_cast<double>(best_correct) / static_cast<double>(trials.size());
  out.bin_counts = bin_counts;
  return out;
}

}  // namespace fovsim
