#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "fovsim/config.hpp"

using namespace fovsim;
using nlohmann::json;

namespace {

bool has_error_at(const NormalizedConfig& cfg, const std::string& path) {
  for (const auto& e : cfg.errors)
    if (e.path == path) return true;
  return false;
}

}  // namespace

TEST_CASE("an empty document normalizes to the full default schema") {
  const NormalizedConfig cfg = normalize_config(json::object());
  REQUIRE(cfg.ok());
  const json& v = cfg.values;
  CHECK(v["noise"]["exponent"] == 2.8);
  CHECK(v["noise"]["mean"] == 128.0);
  CHECK(v["noise"]["sigma"] == 25.0);
  CHECK(v["signal"]["kind"] == "microcalcification");
  CHECK(v["signal"]["size_voxels"] == 6.0);
  CHECK(v["signal"]["contrast"] == 0.45);
  CHECK(v["geometry"]["nx"] == 256);
  CHECK(v["geometry"]["ny"] == 256);
  CHECK(v["geometry"]["nz"] == 32);
  CHECK(v["observer"] == "io");
  CHECK(v["mode"] == "search");
  CHECK(v["trials"] == 300);
  CHECK(v["foveation"]["alpha"] == 0.7063);
  CHECK(v["foveation"]["beta"] == 1.6953);
  CHECK(v["foveation"]["internal_noise_gain"] == 2.7813);
  CHECK(v["stopping"]["ufov_radius_dva"] == 2.5);
  CHECK(v["npwe"]["alpha"] == 1.4);
  CHECK(v["npwe"]["beta"] == 0.013);
  CHECK(v["npwe"]["gamma"] == 2.6);
  CHECK(v["eccentricities"].size() == 10);
}

TEST_CASE("signal-dependent defaults resolve against the chosen condition") {
  // 3D microcalcification: sparse coverage, eager scrolling.
  const NormalizedConfig mc3 = normalize_config(json::object());
  CHECK(mc3.values["stopping"]["coverage_fraction"] == 0.25);
  CHECK(mc3.values["scroll"]["trigger_fraction"] == 0.35);

  const NormalizedConfig ms3 = normalize_config({{"signal", {{"kind", "mass"}}}});
  REQUIRE(ms3.ok());
  CHECK(ms3.values["signal"]["contrast"] == 0.65);
  CHECK(ms3.values["signal"]["size_voxels"] == 10.0);
  CHECK(ms3.values["stopping"]["coverage_fraction"] == 0.10);
  CHECK(ms3.values["scroll"]["trigger_fraction"] == 0.70);

  // 2D slices demand much fuller coverage before giving up.
  const NormalizedConfig mc2 = normalize_config({{"geometry", {{"nz", 1}}}});
  CHECK(mc2.values["stopping"]["coverage_fraction"] == 0.80);
  const NormalizedConfig ms2 =
      normalize_config({{"geometry", {{"nz", 1}}}, {"signal", {{"kind", "mass"}}}});
  CHECK(ms2.values["stopping"]["coverage_fraction"] == 0.60);
}

TEST_CASE("out-of-range values are rejected with their json path") {
  const NormalizedConfig a = normalize_config({{"noise", {{"exponent", -1.0}}}});
  CHECK_FALSE(a.ok());
  CHECK(has_error_at(a, "/noise/exponent"));
  // The fallback is kept so downstream code can still read a full schema.
  CHECK(a.values["noise"]["exponent"] == 2.8);

  const NormalizedConfig b = normalize_config({{"noise", {{"sigma", 0.0}}}});
  CHECK(has_error_at(b, "/noise/sigma"));

  const NormalizedConfig c = normalize_config({{"trials", 0}});
  CHECK(has_error_at(c, "/trials"));

  const NormalizedConfig d = normalize_config({{"target_pc", 0.4}});
  CHECK(has_error_at(d, "/target_pc"));

  const NormalizedConfig e = normalize_config({{"geometry", {{"pitch_dva", 0.0}}}});
  CHECK(has_error_at(e, "/geometry/pitch_dva"));
}

TEST_CASE("type mismatches are flagged rather than coerced") {
  const NormalizedConfig a = normalize_config({{"noise", {{"exponent", "steep"}}}});
  CHECK(has_error_at(a, "/noise/exponent"));
  const NormalizedConfig b = normalize_config({{"trials", 12.5}});
  CHECK(has_error_at(b, "/trials"));
  const NormalizedConfig c = normalize_config({{"observer", 3}});
  CHECK(has_error_at(c, "/observer"));
  const NormalizedConfig d = normalize_config({{"noise", {{"renormalize_sigma", "yes"}}}});
  CHECK(has_error_at(d, "/noise/renormalize_sigma"));
  const NormalizedConfig e = normalize_config({{"noise", 7}});
  CHECK(has_error_at(e, "/noise"));
}

TEST_CASE("unknown keys are rejected at every level") {
  const NormalizedConfig a = normalize_config({{"observerr", "io"}});
  CHECK(has_error_at(a, "/observerr"));
  const NormalizedConfig b = normalize_config({{"noise", {{"sigma2", 25.0}}}});
  CHECK(has_error_at(b, "/noise/sigma2"));
  const NormalizedConfig c = normalize_config({{"stopping", {{"theta0", 1.0}}}});
  CHECK(has_error_at(c, "/stopping/theta0"));
}

TEST_CASE("unknown enum strings name the offending path") {
  const NormalizedConfig a = normalize_config({{"observer", "chx"}});
  CHECK(has_error_at(a, "/observer"));
  const NormalizedConfig b = normalize_config({{"mode", "browse"}});
  CHECK(has_error_at(b, "/mode"));
  const NormalizedConfig c = normalize_config({{"signal", {{"kind", "nodule"}}}});
  CHECK(has_error_at(c, "/signal/kind"));
}

TEST_CASE("normalization is idempotent") {
  json in;
  in["signal"]["kind"] = "mass";
  in["geometry"]["nz"] = 1;
  in["observer"] = "npwe";
  in["seed"] = 42;
  const NormalizedConfig once = normalize_config(in);
  REQUIRE(once.ok());
  const NormalizedConfig twice = normalize_config(once.values);
  REQUIRE(twice.ok());
  CHECK(once.values == twice.values);
}

TEST_CASE("eccentricity lists validate elementwise") {
  const NormalizedConfig good = normalize_config({{"eccentricities", {0.0, 2.5, 9.0}}});
  REQUIRE(good.ok());
  CHECK(good.values["eccentricities"].size() == 3);
  const NormalizedConfig neg = normalize_config({{"eccentricities", {0.0, -1.0}}});
  CHECK(has_error_at(neg, "/eccentricities/1"));
  const NormalizedConfig scalar = normalize_config({{"eccentricities", 3.0}});
  CHECK(has_error_at(scalar, "/eccentricities"));
}

TEST_CASE("stopping thresholds round-trip as a 31-entry array") {
  json in;
  json theta = json::array();
  for (int i = 0; i <= StoppingRule::kMaxFixations; ++i) theta.push_back(30.0 - i);
  in["stopping"]["theta"] = theta;
  const NormalizedConfig cfg = normalize_config(in);
  REQUIRE(cfg.ok());
  const StoppingRule rule = stopping_from_config(cfg.values);
  for (int i = 0; i <= StoppingRule::kMaxFixations; ++i) CHECK(rule.theta[i] == 30.0 - i);

  json bad;
  bad["stopping"]["theta"] = {1.0, 2.0};
  CHECK(has_error_at(normalize_config(bad), "/stopping/theta"));
}

TEST_CASE("untrained documents leave the stopping thresholds open") {
  const NormalizedConfig cfg = normalize_config(json::object());
  const StoppingRule rule = stopping_from_config(cfg.values);
  for (int i = 0; i <= StoppingRule::kMaxFixations; ++i)
    CHECK(rule.theta[i] == std::numeric_limits<double>::infinity());
  const ExperimentConfig exp = experiment_from_config(cfg.values);
  CHECK_FALSE(exp.stopping.has_value());
}

TEST_CASE("the experiment builder mirrors the normalized document") {
  json in;
  in["observer"] = "cho_lg";
  in["mode"] = "lke";
  in["signal"]["kind"] = "mass";
  in["signal"]["contrast"] = 0.3;
  in["geometry"] = {{"nx", 128}, {"ny", 96}, {"nz", 16}, {"pitch_dva", 0.02}};
  in["trials"] = 500;
  in["training_trials"] = 50;
  in["seed"] = 77;
  in["foveation"]["alpha"] = 0.5;
  const NormalizedConfig cfg = normalize_config(in);
  REQUIRE(cfg.ok());
  const ExperimentConfig exp = experiment_from_config(cfg.values);
  CHECK(exp.observer == ObserverKind::cho_lg);
  CHECK(exp.mode == TaskMode::lke);
  CHECK(exp.signal.kind == SignalKind::mass);
  CHECK(exp.signal.contrast == 0.3);
  CHECK(exp.geom.nx == 128);
  CHECK(exp.geom.ny == 96);
  CHECK(exp.geom.nz == 16);
  CHECK(exp.geom.pitch_dva == 0.02);
  CHECK(exp.n_trials == 500);
  CHECK(exp.n_training == 50);
  CHECK(exp.seed == 77);
  CHECK(exp.fovea.alpha == 0.5);
  CHECK(exp.fovea.beta == 1.6953);

  const FsmConfig fc = fsm_from_config(cfg.values);
  CHECK(fc.policy.trigger_fraction == 0.70);
  CHECK(fc.use_depth_shifts);
  CHECK(fc.rule.coverage_fraction == 0.10);
}

TEST_CASE("config files load, and broken ones throw with the path") {
  const std::string path = "test_config_ok.json";
  {
    std::ofstream f(path);
    f << R"({"observer": "npw", "trials": 25})";
  }
  const NormalizedConfig cfg = load_config(path);
  REQUIRE(cfg.ok());
  CHECK(cfg.values["observer"] == "npw");
  CHECK(cfg.values["trials"] == 25);
  {
    std::ofstream f(path);
    f << "{not json";
  }
  CHECK_THROWS_AS(load_config(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_config("no_such_config.json"), std::runtime_error);
}
