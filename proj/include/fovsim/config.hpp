#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fovsim/harness.hpp"

namespace fovsim {

struct ConfigError {
  std::string path;  // JSON-pointer-ish, e.g. "/noise/exponent"
  std::string message;
};

struct NormalizedConfig {
  nlohmann::json values;  // full schema with every default filled in
  std::vector<ConfigError> errors;
  bool ok() const { return errors.empty(); }
};

// Fills defaults, range-checks everything, rejects unknown keys (each error
// carries its path). Signal-dependent defaults (stopping coverage, scroll
// trigger) are resolved against the normalized signal/geometry, so the
// function is idempotent: normalize(normalize(x).values) == normalize(x).
NormalizedConfig normalize_config(const nlohmann::json& in);

// Parse + normalize; throws std::runtime_error naming the path when the file
// is missing or unparsable.
NormalizedConfig load_config(const std::string& path);

// Builds the harness config from a normalized document.
ExperimentConfig experiment_from_config(const nlohmann::json& normalized);
StoppingRule stopping_from_config(const nlohmann::json& normalized);
FsmConfig fsm_from_config(const nlohmann::json& normalized);

}  // namespace fovsim
