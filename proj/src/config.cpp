#include "fovsim/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fovsim {

using json = nlohmann::json;

namespace {

class Normalizer {
 public:
  explicit Normalizer(NormalizedConfig& out) : out_(out) {}

  void error(const std::string& path, const std::string& message) {
    out_.errors.push_back({path, message});
  }

  double number(const json& obj, const std::string& section, const std::string& key,
                double fallback, double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity(), bool lo_open = false) {
    const std::string path = section + "/" + key;
    double v = fallback;
    if (obj.contains(key)) {
      if (!obj[key].is_number()) {
        error(path, "expected a number");
        return fallback;
      }
      v = obj[key].get<double>();
    }
    if (v < lo || v > hi || (lo_open && v == lo)) {
      error(path, "out of range");
      return fallback;
    }
    return v;
  }

  std::int64_t integer(const json& obj, const std::string& section, const std::string& key,
                       std::int64_t fallback, std::int64_t lo, std::int64_t hi) {
    const std::string path = section + "/" + key;
    std::int64_t v = fallback;
    if (obj.contains(key)) {
      if (!obj[key].is_number_integer() && !obj[key].is_number_unsigned()) {
        error(path, "expected an integer");
        return fallback;
      }
      v = obj[key].get<std::int64_t>();
    }
    if (v < lo || v > hi) {
      error(path, "out of range");
      return fallback;
    }
    return v;
  }

  std::uint64_t uinteger(const json& obj, const std::string& section, const std::string& key,
                         std::uint64_t fallback) {
    const std::string path = section + "/" + key;
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_unsigned() && !(obj[key].is_number_integer() &&
                                            obj[key].get<std::int64_t>() >= 0)) {
      error(path, "expected a nonnegative integer");
      return fallback;
    }
    return obj[key].get<std::uint64_t>();
  }

  std::string choice(const json& obj, const std::string& section, const std::string& key,
                     const std::string& fallback, const std::vector<std::string>& allowed) {
    const std::string path = section + "/" + key;
    std::string v = fallback;
    if (obj.contains(key)) {
      if (!obj[key].is_string()) {
        error(path, "expected a string");
        return fallback;
      }
      v = obj[key].get<std::string>();
    }
    for (const auto& a : allowed)
      if (v == a) return v;
    error(path, "must be one of the documented values");
    return fallback;
  }

  void reject_unknown(const json& obj, const std::string& section,
                      const std::vector<std::string>& known) {
    if (!obj.is_object()) return;
    for (const auto& [key, value] : obj.items()) {
      bool found = false;
      for (const auto& k : known) found = found || k == key;
      if (!found) error(section + "/" + key, "unknown key");
    }
  }

  const json& section(const json& in, const std::string& name) {
    static const json empty = json::object();
    if (!in.contains(name)) return empty;
    if (!in[name].is_object()) {
      error("/" + name, "expected an object");
      return empty;
    }
    return in[name];
  }

 private:
  NormalizedConfig& out_;
};

}  // namespace

NormalizedConfig normalize_config(const json& in) {
  NormalizedConfig out;
  Normalizer n(out);
  if (!in.is_object()) {
    n.error("", "config root must be an object");
    out.values = json::object();
    return out;
  }

  n.reject_unknown(in, "",
                   {"noise", "signal", "geometry", "observer", "mode", "trials",
                    "training_trials", "fsm_training_trials", "seed", "foveation", "stopping",
                    "scroll", "npwe", "target_pc", "eccentricities", "ecc_trials"});

  json& v = out.values;

  const json& noise = n.section(in, "noise");
  n.reject_unknown(noise, "/noise", {"exponent", "mean", "sigma", "seed", "renormalize_sigma"});
  v["noise"]["exponent"] = n.number(noise, "/noise", "exponent", 2.8, 0.0, 10.0, true);
  v["noise"]["mean"] = n.number(noise, "/noise", "mean", 128.0);
  v["noise"]["sigma"] = n.number(noise, "/noise", "sigma", 25.0, 0.0, 1e9, true);
  v["noise"]["seed"] = n.uinteger(noise, "/noise", "seed", 0);
  v["noise"]["renormalize_sigma"] =
      noise.contains("renormalize_sigma") && noise["renormalize_sigma"].is_boolean()
          ? noise["renormalize_sigma"].get<bool>()
          : true;
  if (noise.contains("renormalize_sigma") && !noise["renormalize_sigma"].is_boolean())
    n.error("/noise/renormalize_sigma", "expected a boolean");

  const json& signal = n.section(in, "signal");
  n.reject_unknown(signal, "/signal", {"kind", "size_voxels", "contrast"});
  const std::string kind =
      n.choice(signal, "/signal", "kind", "microcalcification", {"microcalcification", "mass"});
  v["signal"]["kind"] = kind;
  v["signal"]["size_voxels"] = n.number(signal, "/signal", "size_voxels",
                                        kind == "mass" ? 10.0 : 6.0, 0.0, 1e6, true);
  // Peak-contrast defaults per condition table: 0.45 (mcalc), 0.65 (mass).
  v["signal"]["contrast"] =
      n.number(signal, "/signal", "contrast", kind == "mass" ? 0.65 : 0.45, 0.0, 100.0);

  const json& geom = n.section(in, "geometry");
  n.reject_unknown(geom, "/geometry", {"nx", "ny", "nz", "pitch_dva"});
  v["geometry"]["nx"] = n.integer(geom, "/geometry", "nx", 256, 1, 1 << 14);
  v["geometry"]["ny"] = n.integer(geom, "/geometry", "ny", 256, 1, 1 << 14);
  v["geometry"]["nz"] = n.integer(geom, "/geometry", "nz", 32, 1, 1 << 14);
  v["geometry"]["pitch_dva"] =
      n.number(geom, "/geometry", "pitch_dva", kDefaultPitchDva, 0.0, 10.0, true);

  v["observer"] = n.choice(in, "", "observer", "io",
                           {"io", "npw", "npwe", "cho_gabor", "cho_lg", "cho_dog", "fcho"});
  v["mode"] = n.choice(in, "", "mode", "search", {"lke", "search"});
  v["trials"] = n.integer(in, "", "trials", 300, 1, 100000000);
  v["training_trials"] = n.integer(in, "", "training_trials", 120, 0, 100000000);
  v["fsm_training_trials"] = n.integer(in, "", "fsm_training_trials", 60, 2, 100000000);
  v["seed"] = n.uinteger(in, "", "seed", 1);
  v["target_pc"] = n.number(in, "", "target_pc", 0.75, 0.5, 1.0, true);
  if (v["target_pc"].get<double>() >= 1.0) n.error("/target_pc", "out of range");

  const json& fov = n.section(in, "foveation");
  n.reject_unknown(fov, "/foveation", {"alpha", "beta", "internal_noise_gain"});
  v["foveation"]["alpha"] = n.number(fov, "/foveation", "alpha", 0.7063, 0.0, 1e6);
  v["foveation"]["beta"] = n.number(fov, "/foveation", "beta", 1.6953, 0.0, 1e6, true);
  v["foveation"]["internal_noise_gain"] =
      n.number(fov, "/foveation", "internal_noise_gain", 2.7813, 0.0, 1e6);

  const bool is3d = v["geometry"]["nz"].get<int>() > 1;
  const bool is_mass = kind == "mass";
  const json& stopping = n.section(in, "stopping");
  n.reject_unknown(stopping, "/stopping",
                   {"coverage_fraction", "ufov_radius_dva", "final_threshold", "theta"});
  const double cov_default =
      StoppingRule::default_coverage(is_mass ? SignalKind::mass : SignalKind::microcalcification,
                                     is3d);
  v["stopping"]["coverage_fraction"] =
      n.number(stopping, "/stopping", "coverage_fraction", cov_default, 0.0, 1.0, true);
  v["stopping"]["ufov_radius_dva"] =
      n.number(stopping, "/stopping", "ufov_radius_dva", 2.5, 0.0, 100.0, true);
  v["stopping"]["final_threshold"] =
      n.number(stopping, "/stopping", "final_threshold", 0.0);
  if (stopping.contains("theta")) {
    if (!stopping["theta"].is_array() ||
        stopping["theta"].size() != StoppingRule::kMaxFixations + 1) {
      n.error("/stopping/theta", "expected an array of 31 numbers");
    } else {
      v["stopping"]["theta"] = stopping["theta"];
    }
  }

  const json& scroll = n.section(in, "scroll");
  n.reject_unknown(scroll, "/scroll", {"trigger_fraction"});
  v["scroll"]["trigger_fraction"] = n.number(
      scroll, "/scroll", "trigger_fraction",
      ScrollPolicy::default_fraction(is_mass ? SignalKind::mass
                                             : SignalKind::microcalcification),
      0.0, 100.0);

  const json& npwe = n.section(in, "npwe");
  n.reject_unknown(npwe, "/npwe", {"alpha", "beta", "gamma"});
  v["npwe"]["alpha"] = n.number(npwe, "/npwe", "alpha", 1.4, 0.0, 100.0);
  v["npwe"]["beta"] = n.number(npwe, "/npwe", "beta", 0.013, 0.0, 100.0);
  v["npwe"]["gamma"] = n.number(npwe, "/npwe", "gamma", 2.6, 0.0, 100.0);

  if (in.contains("eccentricities")) {
    if (!in["eccentricities"].is_array()) {
      n.error("/eccentricities", "expected an array of numbers");
    } else {
      for (std::size_t i = 0; i < in["eccentricities"].size(); ++i) {
        const auto& e = in["eccentricities"][i];
        if (!e.is_number() || e.get<double>() < 0.0)
          n.error("/eccentricities/" + std::to_string(i), "expected a nonnegative number");
      }
      if (out.errors.empty()) v["eccentricities"] = in["eccentricities"];
    }
  }
  if (!v.contains("eccentricities")) v["eccentricities"] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  v["ecc_trials"] = n.integer(in, "", "ecc_trials", 2000, 1, 100000000);

  return out;
}

NormalizedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json parsed;
  try {
    parsed = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  return normalize_config(parsed);
}

ExperimentConfig experiment_from_config(const json& v) {
  ExperimentConfig cfg;
  cfg.observer = observer_kind_from_string(v["observer"].get<std::string>());
  cfg.signal.kind = signal_kind_from_string(v["signal"]["kind"].get<std::string>());
  cfg.signal.size_voxels = v["signal"]["size_voxels"].get<double>();
  cfg.signal.contrast = v["signal"]["contrast"].get<double>();
  cfg.noise.exponent = v["noise"]["exponent"].get<double>();
  cfg.noise.mean = v["noise"]["mean"].get<double>();
  cfg.noise.sigma = v["noise"]["sigma"].get<double>();
  cfg.noise.seed = v["noise"]["seed"].get<std::uint64_t>();
  cfg.noise.renormalize_sigma = v["noise"]["renormalize_sigma"].get<bool>();
  cfg.geom.nx = v["geometry"]["nx"].get<int>();
  cfg.geom.ny = v["geometry"]["ny"].get<int>();
  cfg.geom.nz = v["geometry"]["nz"].get<int>();
  cfg.geom.pitch_dva = v["geometry"]["pitch_dva"].get<double>();
  cfg.mode = task_mode_from_string(v["mode"].get<std::string>());
  cfg.n_trials = v["trials"].get<int>();
  cfg.n_training = v["training_trials"].get<int>();
  cfg.fsm_training_trials = v["fsm_training_trials"].get<int>();
  cfg.seed = v["seed"].get<std::uint64_t>();
  cfg.fovea.alpha = v["foveation"]["alpha"].get<double>();
  cfg.fovea.beta = v["foveation"]["beta"].get<double>();
  cfg.fovea.internal_noise_gain = v["foveation"]["internal_noise_gain"].get<double>();
  if (v["stopping"].contains("theta")) cfg.stopping = stopping_from_config(v);
  return cfg;
}

StoppingRule stopping_from_config(const json& v) {
  StoppingRule rule;
  rule.coverage_fraction = v["stopping"]["coverage_fraction"].get<double>();
  rule.ufov_radius_dva = v["stopping"]["ufov_radius_dva"].get<double>();
  rule.final_threshold = v["stopping"]["final_threshold"].get<double>();
  if (v["stopping"].contains("theta")) {
    const auto& theta = v["stopping"]["theta"];
    for (int i = 0; i <= StoppingRule::kMaxFixations; ++i) rule.theta[i] = theta[i].get<double>();
  } else {
    rule.theta.fill(std::numeric_limits<double>::infinity());
  }
  return rule;
}

FsmConfig fsm_from_config(const json& v) {
  FsmConfig fc;
  fc.rule = stopping_from_config(v);
  fc.policy.trigger_fraction = v["scroll"]["trigger_fraction"].get<double>();
  fc.use_depth_shifts = v["geometry"]["nz"].get<int>() > 1;
  return fc;
}

}  // namespace fovsim
