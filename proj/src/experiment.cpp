#include "caplab/experiment.hpp"

#include <cstdio>

#include "caplab/errors.hpp"
#include "caplab/random.hpp"

namespace caplab {

PreparedData prepare_data(const DataSpec& spec, std::uint64_t seed) {
  Dataset all;
  if (spec.kind == "blobs") {
    all = gen_blobs(seed, spec.n_per_class, spec.centers, spec.sigma);
  } else if (spec.kind == "moons") {
    all = gen_moons(seed, spec.n_per_class, spec.noise);
  } else if (spec.kind == "csv") {
    all = load_csv(spec.path, CsvSchema{spec.label_column, spec.header, spec.scaling, spec.classes});
  } else {
    throw ContractViolation("unknown data kind '" + spec.kind + "'");
  }
  SplitResult parts = split(all, spec.train_fraction, seed);
  return {std::move(parts.train), std::move(parts.test)};
}

MlpModel init_model(const ModelSpec& spec, std::size_t input_dim, std::size_t classes, std::uint64_t seed) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(classes);
  return MlpModel::random(dims, spec.activation, derive_seed(seed, {seed_tag::init}));
}

EvalSummary evaluate(const MlpModel& model, const Dataset& test, const std::vector<AttackConfig>& attacks,
                     const CornerSearchConfig& polytope, std::uint64_t seed, std::size_t threads,
                     bool with_diameter) {
  EvalSummary summary;
  summary.n_samples = test.size();
  summary.clean_accuracy = clean_accuracy(model, test);
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    AttackConfig cfg = attacks[i];
    cfg.seed = derive_seed(seed, {seed_tag::eval_attack, i});
    summary.attacks.push_back({cfg, robust_accuracy(model, test, cfg, threads)});
  }
  if (with_diameter) {
    summary.mean_diameter = mean_diameter(model, test, polytope, seed, seed_tag::eval_polytope, threads);
  }
  return summary;
}

nlohmann::json attack_result_json(const AttackResult& r, std::size_t n_samples) {
  return {{"attack", r.config.label()},
          {"epsilon", r.config.epsilon},
          {"steps", r.config.kind == AttackKind::fgsm ? std::size_t{1} : r.config.steps},
          {"accuracy", r.accuracy},
          {"n_samples", n_samples},
          {"seed", r.config.seed}};
}

RunOutcome run_training(const RunConfig& cfg) {
  PreparedData data = prepare_data(cfg.data, cfg.seed);
  MlpModel model = init_model(cfg.model, data.train.dim(), data.train.class_count, cfg.seed);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;
  train_cfg.threads = cfg.threads;
  TrainResult trained = train(std::move(model), data.train, train_cfg);
  return {std::move(data), std::move(trained)};
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

}  // namespace caplab
