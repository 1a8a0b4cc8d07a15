#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "caplab/attacks.hpp"
#include "caplab/cap_train.hpp"
#include "caplab/config.hpp"
#include "caplab/data.hpp"
#include "caplab/polytope.hpp"

namespace caplab {

struct PreparedData {
  Dataset train;
  Dataset test;
};

// Generates or loads the dataset described by `spec` and splits it; both
// steps are pure functions of (spec, seed).
PreparedData prepare_data(const DataSpec& spec, std::uint64_t seed);

MlpModel init_model(const ModelSpec& spec, std::size_t input_dim, std::size_t classes, std::uint64_t seed);

struct AttackResult {
  AttackConfig config;
  double accuracy = 0.0;
};

struct EvalSummary {
  std::size_t n_samples = 0;
  double clean_accuracy = 0.0;
  std::vector<AttackResult> attacks;
  double mean_diameter = 0.0;
};

// Clean accuracy, robust accuracy per attack and the mean corner-search
// diameter over `test`. Attack and corner-search seeds derive from `seed`.
EvalSummary evaluate(const MlpModel& model, const Dataset& test, const std::vector<AttackConfig>& attacks,
                     const CornerSearchConfig& polytope, std::uint64_t seed, std::size_t threads,
                     bool with_diameter = true);

// {attack, epsilon, steps, accuracy, n_samples, seed}
nlohmann::json attack_result_json(const AttackResult& r, std::size_t n_samples);

struct RunOutcome {
  PreparedData data;
  TrainResult trained;
};

RunOutcome run_training(const RunConfig& cfg);

// Fixed-point text used in the comparison table and logs.
std::string format_fixed(double value, int decimals);

}  // namespace caplab
