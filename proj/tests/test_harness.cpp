#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fovsim/harness.hpp"
#include "fovsim/stats.hpp"

using namespace fovsim;

namespace {

ExperimentConfig small_linear_config() {
  ExperimentConfig cfg;
  cfg.observer = ObserverKind::npw;
  cfg.signal = SignalSpec::microcalc(0.45);
  cfg.geom = VolumeGeometry{48, 48, 8, kDefaultPitchDva};
  cfg.mode = TaskMode::lke;
  cfg.n_trials = 60;
  cfg.n_training = 20;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("task modes round-trip through their names") {
  CHECK(to_string(TaskMode::lke) == "lke");
  CHECK(to_string(TaskMode::search) == "search");
  CHECK(task_mode_from_string("lke") == TaskMode::lke);
  CHECK(task_mode_from_string("search") == TaskMode::search);
  CHECK_THROWS_AS(task_mode_from_string("browse"), std::invalid_argument);
}

TEST_CASE("statistical efficiency is the squared contrast ratio") {
  CHECK(statistical_efficiency(0.3, 0.3) == doctest::Approx(1.0));
  CHECK(statistical_efficiency(2.0, 3.0) == doctest::Approx(4.0 / 9.0));
  CHECK(statistical_efficiency(0.1, 0.05) == doctest::Approx(4.0));
  CHECK_THROWS_AS(statistical_efficiency(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(statistical_efficiency(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("trial classification covers the full outcome table") {
  CHECK(classify_trial(true, true, true) == ErrorClass::hit);
  CHECK(classify_trial(true, true, false) == ErrorClass::hit);
  CHECK(classify_trial(true, false, false) == ErrorClass::search_error);
  CHECK(classify_trial(true, false, true) == ErrorClass::recognition_error);
  CHECK(classify_trial(false, true, false) == ErrorClass::false_alarm);
  CHECK(classify_trial(false, false, false) == ErrorClass::correct_rejection);
}

TEST_CASE("yes/no d' matches the z-score difference with clamped rates") {
  // Symmetric 84% rates: d' = 2 z(0.84).
  CHECK(dprime_yesno(84, 16, 16, 84) ==
        doctest::Approx(2.0 * normal_quantile(0.84)).epsilon(1e-12));
  // Perfect performance clamps to 1 - 1/(2n) per rate.
  CHECK(dprime_yesno(10, 0, 0, 10) ==
        doctest::Approx(2.0 * normal_quantile(0.95)).epsilon(1e-12));
  CHECK_THROWS_AS(dprime_yesno(0, 0, 5, 5), std::invalid_argument);
}

TEST_CASE("binomial standard error follows sqrt(p(1-p)/n)") {
  CHECK(binomial_se(0.5, 100) == doctest::Approx(0.05));
  CHECK(binomial_se(0.8, 400) == doctest::Approx(std::sqrt(0.16 / 400)));
  CHECK_THROWS_AS(binomial_se(0.5, 0), std::invalid_argument);
}

TEST_CASE("metrics count the confusion table and error split exactly") {
  std::vector<TrialRecord> records;
  auto add = [&](bool present, bool yes, std::optional<ErrorClass> cls) {
    TrialRecord r;
    r.present = present;
    r.yes = yes;
    r.error_class = cls;
    records.push_back(r);
  };
  add(true, true, ErrorClass::hit);
  add(true, true, ErrorClass::hit);
  add(true, false, ErrorClass::search_error);
  add(true, false, ErrorClass::recognition_error);
  add(false, false, ErrorClass::correct_rejection);
  add(false, false, ErrorClass::correct_rejection);
  add(false, false, ErrorClass::correct_rejection);
  add(false, true, ErrorClass::false_alarm);

  const Metrics m = compute_metrics(records, 1.5);
  CHECK(m.n_trials == 8);
  CHECK(m.hits == 2);
  CHECK(m.misses == 2);
  CHECK(m.false_alarms == 1);
  CHECK(m.correct_rejections == 3);
  CHECK(m.search_errors == 1);
  CHECK(m.recognition_errors == 1);
  CHECK(m.pc == doctest::Approx(5.0 / 8.0));
  CHECK(m.pc_se == doctest::Approx(binomial_se(5.0 / 8.0, 8)));
  CHECK(m.dprime == doctest::Approx(dprime_yesno(2, 2, 1, 3)));
  CHECK(m.threshold == 1.5);
}

TEST_CASE("near-zero contrast experiments sit at chance") {
  // Exactly zero contrast degenerates the matched template, so probe just
  // above it where d' is still numerically indistinguishable from 0.
  ExperimentConfig cfg = small_linear_config();
  cfg.signal.contrast = 1e-4;
  cfg.mode = TaskMode::search;
  const ExperimentResult r = run_experiment(cfg);
  // The statistic carries no signal information; training can at best latch
  // onto noise, so PC stays near 0.5.
  CHECK(r.metrics.pc >= 0.3);
  CHECK(r.metrics.pc <= 0.7);
}

TEST_CASE("prevalence is exactly 50% and alternating") {
  const ExperimentConfig cfg = small_linear_config();
  const ExperimentResult r = run_experiment(cfg);
  REQUIRE(static_cast<int>(r.records.size()) == cfg.n_trials);
  int present = 0;
  for (const auto& rec : r.records) {
    CHECK(rec.present == (rec.index % 2 == 0));
    present += rec.present;
  }
  CHECK(present == cfg.n_trials / 2);
  CHECK(r.metrics.hits + r.metrics.misses == present);
  CHECK(r.metrics.false_alarms + r.metrics.correct_rejections == cfg.n_trials - present);
  // PC is exactly the correct-trial fraction.
  CHECK(r.metrics.pc ==
        doctest::Approx(static_cast<double>(r.metrics.hits + r.metrics.correct_rejections) /
                        cfg.n_trials));
}

TEST_CASE("experiments are deterministic in the master seed") {
  const ExperimentConfig cfg = small_linear_config();
  const ExperimentResult a = run_experiment(cfg);
  const ExperimentResult b = run_experiment(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].statistic == b.records[i].statistic);
    CHECK(a.records[i].yes == b.records[i].yes);
    CHECK(a.records[i].noise_seed == b.records[i].noise_seed);
  }
  CHECK(a.metrics.pc == b.metrics.pc);
  CHECK(a.metrics.threshold == b.metrics.threshold);
}

TEST_CASE("an easy cued detection is near ceiling for the ideal observer") {
  ExperimentConfig cfg = small_linear_config();
  cfg.observer = ObserverKind::io;
  cfg.signal.contrast = 1.2;
  const ExperimentResult r = run_experiment(cfg);
  CHECK(r.metrics.pc > 0.9);
  CHECK(r.metrics.dprime > 2.0);
}

TEST_CASE("search mode scans and reports a location inside the stack") {
  ExperimentConfig cfg = small_linear_config();
  cfg.mode = TaskMode::search;
  cfg.signal.contrast = 1.0;
  const ExperimentResult r = run_experiment(cfg);
  for (const auto& rec : r.records) {
    CHECK(cfg.geom.contains(rec.reported.x, rec.reported.y, rec.reported.z));
    CHECK(rec.stop_reason == "scan");
    // Scanning observers never produce fixation-based miss classes.
    if (rec.error_class) {
      CHECK(*rec.error_class != ErrorClass::recognition_error);
    }
  }
  // Misses of non-foveated scanners stay unclassified rather than mislabeled.
  for (const auto& rec : r.records)
    if (rec.present && !rec.yes) CHECK_FALSE(rec.error_class.has_value());
}

TEST_CASE("the template builder rejects the foveated observer") {
  ExperimentConfig cfg = small_linear_config();
  const SignalProfile profile = make_signal_profile(cfg.signal, cfg.geom, cfg.noise.mean);
  cfg.observer = ObserverKind::fcho;
  CHECK_THROWS_AS(build_scanning_template(cfg, profile), std::logic_error);
}

TEST_CASE("config validation rejects nonsense trial counts") {
  ExperimentConfig cfg = small_linear_config();
  cfg.n_trials = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_linear_config();
  cfg.n_training = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_linear_config();
  cfg.fsm_training_trials = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("records serialize one object per line with stable fields") {
  ExperimentConfig cfg = small_linear_config();
  cfg.n_trials = 10;
  const ExperimentResult r = run_experiment(cfg);
  const std::string path = "test_records.jsonl";
  write_records_jsonl(path, r);

  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["index"] == lines);
    CHECK(j.contains("present"));
    CHECK(j.contains("statistic"));
    CHECK(j.contains("yes"));
    CHECK(j.contains("noise_seed"));
    if (j["present"].get<bool>()) CHECK(j.contains("location"));
    ++lines;
  }
  CHECK(lines == cfg.n_trials);
  std::remove(path.c_str());
}

TEST_CASE("foveated cued trials train a decision cut and stay deterministic") {
  ExperimentConfig cfg;
  cfg.observer = ObserverKind::fcho;
  cfg.signal = SignalSpec::microcalc(1.0);
  cfg.geom = VolumeGeometry{64, 64, 8, kDefaultPitchDva};
  cfg.mode = TaskMode::lke;
  cfg.n_trials = 12;
  cfg.n_training = 12;
  cfg.seed = 31;
  const ExperimentResult a = run_experiment(cfg);
  CHECK_FALSE(a.trained_rule.has_value());
  REQUIRE(static_cast<int>(a.records.size()) == cfg.n_trials);
  for (const auto& rec : a.records) CHECK(rec.n_fixations == 1);
  const ExperimentResult b = run_experiment(cfg);
  for (std::size_t i = 0; i < a.records.size(); ++i)
    CHECK(a.records[i].statistic == b.records[i].statistic);
}

TEST_CASE("foveated search trains stopping thresholds and tags misses") {
  ExperimentConfig cfg;
  cfg.observer = ObserverKind::fcho;
  cfg.signal = SignalSpec::microcalc(0.6);
  cfg.geom = VolumeGeometry{64, 64, 8, kDefaultPitchDva};
  cfg.mode = TaskMode::search;
  cfg.n_trials = 8;
  cfg.fsm_training_trials = 6;
  cfg.seed = 32;
  const ExperimentResult r = run_experiment(cfg);
  REQUIRE(r.trained_rule.has_value());
  CHECK(std::isfinite(r.trained_rule->final_threshold));
  for (const auto& rec : r.records) {
    CHECK(rec.n_fixations >= 1);
    REQUIRE(rec.error_class.has_value());
    CHECK(*rec.error_class ==
          classify_trial(rec.present, rec.yes, rec.fixated_signal));
    if (rec.present) CHECK(std::isfinite(rec.min_signal_distance_dva));
  }
}

TEST_CASE("contrast matching converges onto the target percent correct") {
  ExperimentConfig cfg;
  cfg.observer = ObserverKind::npw;
  cfg.signal = SignalSpec::microcalc(0.45);
  cfg.geom = VolumeGeometry{48, 48, 1, kDefaultPitchDva};
  cfg.mode = TaskMode::lke;
  cfg.n_trials = 200;
  cfg.n_training = 0;
  cfg.seed = 17;
  const ContrastMatch match = match_contrast(cfg, 0.85, 0.0, 2.0, 0.02);
  CHECK(match.converged);
  CHECK(match.contrast > 0.0);
  CHECK(match.contrast < 2.0);
  CHECK(std::abs(match.pc - 0.85) <= 0.02 + 3.0 * match.pc_se);
  CHECK(match.evaluations > 1);

  // An unreachable target must be reported, not silently clipped.
  ExperimentConfig weak = cfg;
  CHECK_THROWS_AS(match_contrast(weak, 0.99, 0.0, 1e-4), std::runtime_error);
}
