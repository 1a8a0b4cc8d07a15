#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "caplab/tensor.hpp"

namespace caplab {

enum class FeatureScaling { none, minmax_to_unit };

// Per-column range of the raw features and, when min-max scaling was
// applied, the (min, max) used to map each column onto [0, 1].
struct FeatureRange {
  std::vector<double> min;
  std::vector<double> max;
  bool scaled = false;

  friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

struct Dataset {
  Tensor features;  // [n x d]
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;
  FeatureRange feature_range;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  Tensor sample(std::size_t i) const;

  // Throws ContractViolation if the invariants (n >= 1, labels < c, finite
  // features, shape agreement) do not hold.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Builds a dataset from rows; records the per-column range.
Dataset make_dataset(Tensor features, std::vector<std::size_t> labels, std::size_t class_count);

// Isotropic Gaussian clouds, one per center, n_per_class points each, laid
// out class by class.
Dataset gen_blobs(std::uint64_t seed, std::size_t n_per_class, const std::vector<std::vector<double>>& centers,
                  double sigma);

// Two interleaved half circles of radius 1: class 0 on (cos t, sin t), class 1
// on (1 - cos t, 0.5 - sin t), t evenly spaced on [0, pi], plus Gaussian noise.
Dataset gen_moons(std::uint64_t seed, std::size_t n_per_class, double noise);

struct CsvSchema {
  // Either a header name or a zero-based column index (as text, e.g. "4").
  // Empty means the last column.
  std::string label_column;
  bool has_header = true;
  FeatureScaling scaling = FeatureScaling::none;
  // Labels must be < class_count when given; otherwise c = max label + 1.
  std::optional<std::size_t> class_count;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
Dataset parse_csv(const std::string& text, const CsvSchema& schema, const std::string& source = "csv");

// Header x0..x{d-1},label; values with 17 significant digits.
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string to_csv(const Dataset& data);

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Seeded shuffle, then the first round(fraction * n) samples form the train
// part. Both parts must be nonempty.
SplitResult split(const Dataset& data, double fraction, std::uint64_t seed);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

// Fisher-Yates permutation of [0, n) driven by a counter-based stream.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace caplab
