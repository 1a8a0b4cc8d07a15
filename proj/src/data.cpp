#include "caplab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "caplab/errors.hpp"
#include "caplab/random.hpp"

namespace caplab {

Tensor Dataset::sample(std::size_t i) const {
  const auto r = features.row(i);
  return Tensor::vector({r.begin(), r.end()});
}

void Dataset::validate() const {
  if (labels.empty()) throw ContractViolation("dataset is empty");
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw ContractViolation("dataset features " + shape_string(features.shape()) + " do not match " +
                            std::to_string(labels.size()) + " labels");
  }
  if (class_count < 1) throw ContractViolation("dataset needs at least one class");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw ContractViolation("sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                              " >= class count " + std::to_string(class_count));
    }
  }
  if (!features.all_finite()) throw ContractViolation("dataset contains non-finite features");
}

namespace {

FeatureRange column_range(const Tensor& features) {
  const std::size_t d = features.cols();
  FeatureRange range{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0), false};
  for (std::size_t j = 0; j < d; ++j) {
    double lo = features(0, j);
    double hi = lo;
    for (std::size_t i = 1; i < features.rows(); ++i) {
      lo = std::min(lo, features(i, j));
      hi = std::max(hi, features(i, j));
    }
    range.min[j] = lo;
    range.max[j] = hi;
  }
  return range;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Dataset make_dataset(Tensor features, std::vector<std::size_t> labels, std::size_t class_count) {
  Dataset data{std::move(features), std::move(labels), class_count, {}};
  data.validate();
  data.feature_range = column_range(data.features);
  return data;
}

Dataset gen_blobs(std::uint64_t seed, std::size_t n_per_class, const std::vector<std::vector<double>>& centers,
                  double sigma) {
  if (centers.size() < 2) throw ContractViolation("gen_blobs needs at least two centers");
  if (!(sigma > 0.0)) throw ContractViolation("gen_blobs needs sigma > 0");
  if (n_per_class == 0) throw ContractViolation("gen_blobs needs n_per_class >= 1");
  const std::size_t d = centers.front().size();
  if (d == 0) throw ContractViolation("gen_blobs: centers must have positive dimension");
  for (const auto& c : centers) {
    if (c.size() != d) throw ContractViolation("gen_blobs: centers have different dimensions");
  }
  const std::size_t n = n_per_class * centers.size();
  Tensor features({n, d});
  std::vector<std::size_t> labels(n);
  CounterRng rng(derive_seed(seed, {seed_tag::data}));
  for (std::size_t k = 0; k < centers.size(); ++k) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t r = k * n_per_class + i;
      labels[r] = k;
      for (std::size_t j = 0; j < d; ++j) features(r, j) = centers[k][j] + sigma * rng.normal();
    }
  }
  return make_dataset(std::move(features), std::move(labels), centers.size());
}

Dataset gen_moons(std::uint64_t seed, std::size_t n_per_class, double noise) {
  if (!(noise >= 0.0)) throw ContractViolation("gen_moons needs noise >= 0");
  if (n_per_class == 0) throw ContractViolation("gen_moons needs n_per_class >= 1");
  const std::size_t n = 2 * n_per_class;
  Tensor features({n, 2});
  std::vector<std::size_t> labels(n);
  CounterRng rng(derive_seed(seed, {seed_tag::data}));
  for (std::size_t i = 0; i < n_per_class; ++i) {
    const double t = n_per_class == 1 ? 0.0 : std::numbers::pi * static_cast<double>(i) /
                                                   static_cast<double>(n_per_class - 1);
    features(i, 0) = std::cos(t);
    features(i, 1) = std::sin(t);
    features(n_per_class + i, 0) = 1.0 - std::cos(t);
    features(n_per_class + i, 1) = 0.5 - std::sin(t);
    labels[n_per_class + i] = 1;
  }
  if (noise > 0.0) {
    for (double& v : features.values()) v += noise * rng.normal();
  }
  return make_dataset(std::move(features), std::move(labels), 2);
}

Dataset parse_csv(const std::string& text, const CsvSchema& schema, const std::string& source) {
  std::vector<std::vector<std::string_view>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string_view> header;

  std::string_view rest(text);
  std::size_t line_no = 0;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (schema.has_header && header.empty() && rows.empty()) {
      header = std::move(fields);
      continue;
    }
    const std::size_t expected = !header.empty() ? header.size() : (rows.empty() ? fields.size() : rows[0].size());
    if (fields.size() != expected) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError(source, 0, "no data rows");
  const std::size_t width = rows[0].size();
  if (width < 2) throw ParseError(source, line_numbers[0], "need at least one feature column and a label column");

  std::size_t label_col = width - 1;
  if (!schema.label_column.empty()) {
    const auto it = std::find(header.begin(), header.end(), std::string_view(schema.label_column));
    if (it != header.end()) {
      label_col = static_cast<std::size_t>(it - header.begin());
    } else {
      std::size_t idx = 0;
      const auto& name = schema.label_column;
      const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
      if (ec != std::errc() || ptr != name.data() + name.size() || idx >= width) {
        throw ParseError(source, 0, "label column '" + name + "' not found");
      }
      label_col = idx;
    }
  }

  const std::size_t n = rows.size();
  const std::size_t d = width - 1;
  Tensor features({n, d});
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t out_col = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const auto value = parse_double(rows[i][j]);
      if (!value) {
        throw ParseError(source, line_numbers[i],
                         "column " + std::to_string(j + 1) + ": '" + std::string(rows[i][j]) + "' is not a number");
      }
      if (j == label_col) {
        const double v = *value;
        if (v < 0.0 || v != std::floor(v) || (schema.class_count && v >= static_cast<double>(*schema.class_count)) ||
            v > 1e9) {
          throw ParseError(source, line_numbers[i], "unknown label '" + std::string(rows[i][j]) + "'");
        }
        labels[i] = static_cast<std::size_t>(v);
      } else {
        features(i, out_col++) = *value;
      }
    }
  }

  const std::size_t classes = schema.class_count ? *schema.class_count
                                                 : *std::max_element(labels.begin(), labels.end()) + 1;
  Dataset data = make_dataset(std::move(features), std::move(labels), classes);
  if (schema.scaling == FeatureScaling::minmax_to_unit) {
    for (std::size_t j = 0; j < d; ++j) {
      const double lo = data.feature_range.min[j];
      const double span = data.feature_range.max[j] - lo;
      for (std::size_t i = 0; i < n; ++i) {
        data.features(i, j) = span > 0.0 ? (data.features(i, j) - lo) / span : 0.0;
      }
    }
    data.feature_range.scaled = true;
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema, path.string());
}

std::string to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.dim(); ++j) out += "x" + std::to_string(j) + ",";
  out += "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", data.features(i, j));
      out += buf;
    }
    out += std::to_string(data.labels[i]) + "\n";
  }
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv(data);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  CounterRng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  const std::size_t d = data.dim();
  Tensor features({indices.size(), d});
  std::vector<std::size_t> labels;
  labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = data.features.row(indices[r]);
    std::copy(src.begin(), src.end(), features.row(r).begin());
    labels.push_back(data.labels[indices[r]]);
  }
  Dataset out{std::move(features), std::move(labels), data.class_count, data.feature_range};
  out.validate();
  return out;
}

SplitResult split(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ContractViolation("split fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw ContractViolation("split of " + std::to_string(n) + " samples at fraction " + std::to_string(fraction) +
                            " leaves one side empty");
  }
  auto perm = seeded_permutation(n, derive_seed(seed, {seed_tag::split}));
  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  SplitResult result{subset(data, train_idx), subset(data, test_idx), std::move(train_idx), std::move(test_idx)};
  return result;
}

}  // namespace caplab
