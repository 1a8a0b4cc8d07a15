#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "caplab/attacks.hpp"
#include "caplab/cap_train.hpp"
#include "caplab/data.hpp"
#include "caplab/mlp.hpp"

namespace caplab {

struct DataSpec {
  std::string kind = "blobs";  // blobs | moons | csv
  std::size_t n_per_class = 100;
  std::vector<std::vector<double>> centers{{0.0, 0.0}, {1.0, 0.0}, {0.5, 0.8660254037844386}};
  double sigma = 0.3;
  double noise = 0.1;
  std::string path;
  std::string label_column;
  bool header = true;
  FeatureScaling scaling = FeatureScaling::none;
  std::optional<std::size_t> classes;
  double train_fraction = 0.5;
  std::optional<InputClip> input_clip;

  friend bool operator==(const DataSpec&, const DataSpec&) = default;
};

struct ModelSpec {
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::relu;
};

// Everything a run needs. All randomness is derived from `seed`.
struct RunConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  std::size_t threads = 1;
  DataSpec data;
  ModelSpec model;
  TrainConfig train;
  std::vector<AttackConfig> attacks;
  std::filesystem::path source;
};

// Strict INI-style parser: `key = value` lines, `[section]` headers, `#`
// comments. Unknown sections or keys, duplicates and out-of-range values are
// ParseErrors carrying the line number. See README for the key reference.
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

// Accepts plain decimals and simple ratios such as "2/255".
std::optional<double> parse_number(std::string_view text);

}  // namespace caplab
