#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caplab/polytope.hpp"

namespace caplab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

// Samples come from the test split of a run config, or from a CSV file.
struct DataSource {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> csv;
  std::string label_column;
  bool header = true;
  bool minmax = false;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  DataSource data;
  // "fgsm", "pgd-20", "pgd-100"; empty means the config's attack list.
  std::vector<std::string> attacks;
  std::optional<double> epsilon;
  double step_size = 2.0 / 255.0;
  bool random_start = true;
  std::optional<InputClip> clip;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  std::optional<std::size_t> threads;
};

struct CornersOptions {
  std::filesystem::path checkpoint;
  DataSource data;
  std::optional<std::size_t> index;
  std::optional<std::vector<double>> input;
  std::optional<double> epsilon;
  std::optional<std::size_t> particles;
  std::optional<std::size_t> steps;
  std::optional<double> eta;
  std::optional<InputClip> clip;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  std::optional<std::size_t> threads;
};

struct CompareOptions {
  std::filesystem::path config_a;
  std::filesystem::path config_b;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

// Each command returns an exit code: 0 success, 2 user/config error,
// 3 numeric failure. Diagnostics go to `err`, progress to `out`.
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_corners(const CornersOptions& opts, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);

nlohmann::json estimate_to_json(const CornerSearchResult& result, const CornerSearchConfig& cfg);

// Thread count from CAP_LAB_THREADS, if set and valid.
std::optional<std::size_t> threads_from_env();

}  // namespace caplab::cli
