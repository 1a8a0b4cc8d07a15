#include "caplab/cap_train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "caplab/errors.hpp"
#include "caplab/parallel.hpp"
#include "caplab/random.hpp"

namespace caplab {

std::string_view to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::cap:
      return "cap";
    case TrainerKind::clean:
      return "clean";
    case TrainerKind::vanilla_at:
      return "vanilla_at";
  }
  return "unknown";
}

TrainerKind parse_trainer_kind(std::string_view name) {
  if (name == "cap") return TrainerKind::cap;
  if (name == "clean") return TrainerKind::clean;
  if (name == "vanilla_at") return TrainerKind::vanilla_at;
  throw ContractViolation("unknown trainer '" + std::string(name) + "' (expected cap, clean or vanilla_at)");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractViolation("lambda must be finite and >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractViolation("lr must be > 0");
  if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractViolation("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ContractViolation("weight_decay must be >= 0");
  for (std::size_t i = 0; i < lr_drops.size(); ++i) {
    if (!(lr_drops[i].divisor > 0.0)) throw ContractViolation("lr drop divisors must be > 0");
    if (i > 0 && lr_drops[i].epoch <= lr_drops[i - 1].epoch) {
      throw ContractViolation("lr drop epochs must be strictly increasing");
    }
  }
  polytope.validate();
  if (trainer == TrainerKind::vanilla_at) attack.validate();
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double rate = lr;
  for (const LrDrop& drop : lr_drops) {
    if (drop.epoch <= epoch) rate /= drop.divisor;
  }
  return rate;
}

OptimizerState OptimizerState::for_model(const MlpModel& model, double lr) {
  return {zero_gradients(model), lr, 0};
}

void sgd_step(MlpModel& model, const Gradients& grads, OptimizerState& state, double momentum, double weight_decay) {
  if (grads.size() != model.layer_count() || state.velocity.size() != model.layer_count()) {
    throw ShapeError("sgd_step: gradient or momentum buffers do not match the model");
  }
  auto update = [&](std::span<double> param, std::span<const double> grad, std::span<double> vel) {
    if (param.size() != grad.size() || param.size() != vel.size()) throw ShapeError("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
      vel[i] = momentum * vel[i] + (grad[i] + weight_decay * param[i]);
      param[i] -= state.lr * vel[i];
    }
  };
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    DenseLayer& layer = model.mutable_layer(k);
    update(layer.weight.values(), grads[k].weight.values(), state.velocity[k].weight.values());
    update(layer.bias.values(), grads[k].bias.values(), state.velocity[k].bias.values());
  }
}

CapLossResult clean_loss(const MlpModel& model, const Tensor& x, std::size_t label) {
  const ForwardResult eval = forward(model, x);
  const Tensor probs = softmax(eval.logits);
  CapLossResult result;
  result.ce = cross_entropy(probs, label);
  result.loss = result.ce;
  result.grads = zero_gradients(model);
  backward(model, eval.trace, cross_entropy_logit_grad(probs, label), &result.grads, nullptr);
  return result;
}

CapLossResult cap_loss(const MlpModel& model, const Tensor& x, std::size_t label, const ParticleSet& corners,
                       const Tensor& center, double lambda) {
  if (center.size() != model.output_dim()) {
    throw ContractViolation("cap_loss: center has length " + std::to_string(center.size()) + ", model has " +
                            std::to_string(model.output_dim()) + " outputs");
  }
  if (!(lambda >= 0.0)) throw ContractViolation("cap_loss: lambda must be >= 0");
  CapLossResult result = clean_loss(model, x, label);
  Tensor cotangent(center.shape());
  for (const Tensor& p : corners.particles) {
    if (p.size() != x.size()) throw ShapeError("cap_loss: particle length does not match sample");
    Tensor shifted = x;
    for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] += p[j];
    const ForwardResult eval = forward(model, shifted);
    double sq = 0.0;
    for (std::size_t k = 0; k < center.size(); ++k) {
      const double d = eval.logits[k] - center[k];
      sq += d * d;
      cotangent[k] = 2.0 * lambda * d;
    }
    result.regularizer += sq;
    if (lambda != 0.0) backward(model, eval.trace, cotangent, &result.grads, nullptr);
  }
  result.loss = result.ce + lambda * result.regularizer;
  return result;
}

double mean_diameter(const MlpModel& model, const Dataset& data, const CornerSearchConfig& cfg, std::uint64_t seed,
                     std::uint64_t tag, std::size_t threads) {
  std::vector<double> diameters(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    CornerSearchConfig sample_cfg = cfg;
    sample_cfg.seed = derive_seed(seed, {tag, i});
    sample_cfg.threads = 1;
    diameters[i] = find_corners(model, data.sample(i), sample_cfg).estimate.diameter;
  });
  double total = 0.0;
  for (double d : diameters) total += d;
  return total / static_cast<double>(data.size());
}

namespace {

CapLossResult sample_objective(const MlpModel& model, const Dataset& data, std::size_t sample, std::size_t epoch,
                               const TrainConfig& cfg) {
  const Tensor x = data.sample(sample);
  const std::size_t y = data.labels[sample];
  switch (cfg.trainer) {
    case TrainerKind::clean:
      return clean_loss(model, x, y);
    case TrainerKind::vanilla_at: {
      AttackConfig attack_cfg = cfg.attack;
      attack_cfg.seed = derive_seed(cfg.seed, {seed_tag::train_attack, epoch, sample});
      return clean_loss(model, attack(model, x, y, attack_cfg), y);
    }
    case TrainerKind::cap: {
      CornerSearchConfig search = cfg.polytope;
      search.seed = derive_seed(cfg.seed, {seed_tag::particles, epoch, sample});
      search.threads = 1;
      const CornerSearchResult corners = find_corners(model, x, search);
      return cap_loss(model, x, y, corners.particles, corners.estimate.center, cfg.lambda);
    }
  }
  throw ContractViolation("unknown trainer");
}

}  // namespace

TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.dim() != model.input_dim() || data.class_count != model.output_dim()) {
    throw ShapeError("dataset [" + std::to_string(data.dim()) + " features, " + std::to_string(data.class_count) +
                     " classes] does not fit model " + shape_string(model.dims()));
  }

  TrainReport report;
  report.config = cfg;
  const std::size_t n = data.size();
  const std::size_t threads = resolve_threads(cfg.threads);

  std::vector<std::size_t> probe_idx;
  for (std::size_t i = 0; i < std::min(cfg.probe_size, n); ++i) probe_idx.push_back(i);
  const Dataset probe = probe_idx.empty() ? Dataset{} : subset(data, probe_idx);

  OptimizerState state = OptimizerState::for_model(model, cfg.lr);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    state.epoch = epoch;
    state.lr = cfg.lr_at(epoch);
    const auto order = seeded_permutation(n, derive_seed(cfg.seed, {seed_tag::shuffle, epoch}));

    double ce_sum = 0.0;
    double reg_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t m = std::min(cfg.batch_size, n - start);
      std::vector<CapLossResult> parts(m);
      parallel_for(m, threads, [&](std::size_t i) {
        parts[i] = sample_objective(model, data, order[start + i], epoch, cfg);
      });

      Gradients grads = zero_gradients(model);
      double batch_loss = 0.0;
      for (const CapLossResult& part : parts) {
        add_scaled(grads, part.grads, 1.0);
        batch_loss += part.loss;
        ce_sum += part.ce;
        reg_sum += part.regularizer;
      }
      scale(grads, 1.0 / static_cast<double>(m));
      batch_loss /= static_cast<double>(m);
      if (!std::isfinite(batch_loss) || !all_finite(grads)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1));
      }
      sgd_step(model, grads, state, cfg.momentum, cfg.weight_decay);
      for (std::size_t k = 0; k < model.layer_count(); ++k) {
        if (!model.layer(k).weight.all_finite() || !model.layer(k).bias.all_finite()) {
          throw NumericError("non-finite parameters after the update at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch_index + 1));
        }
      }
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.clean_acc = clean_accuracy(model, data);
    record.ce_term = ce_sum / static_cast<double>(n);
    record.reg_term = reg_sum / static_cast<double>(n);
    record.mean_diameter =
        probe_idx.empty() ? 0.0 : mean_diameter(model, probe, cfg.polytope, cfg.seed, seed_tag::probe, threads);
    record.lr = state.lr;
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.history.push_back(record);
  }
  return {std::move(model), std::move(report)};
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json drops = nlohmann::json::array();
  for (const LrDrop& d : cfg.lr_drops) drops.push_back({{"epoch", d.epoch}, {"divisor", d.divisor}});
  nlohmann::json budget = {{"epsilon", cfg.polytope.budget.epsilon}, {"norm", "linf"}};
  if (cfg.polytope.budget.input_clip) {
    budget["input_clip"] = {cfg.polytope.budget.input_clip->lo, cfg.polytope.budget.input_clip->hi};
  } else {
    budget["input_clip"] = nullptr;
  }
  return {{"trainer", to_string(cfg.trainer)},
          {"lambda", cfg.lambda},
          {"polytope",
           {{"n_particles", cfg.polytope.n_particles},
            {"steps", cfg.polytope.steps},
            {"eta", cfg.polytope.eta},
            {"budget", budget}}},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"lr_drops", drops},
          {"momentum", cfg.momentum},
          {"weight_decay", cfg.weight_decay},
          {"attack",
           {{"kind", to_string(cfg.attack.kind)},
            {"epsilon", cfg.attack.epsilon},
            {"step_size", cfg.attack.step_size},
            {"steps", cfg.attack.steps},
            {"random_start", cfg.attack.random_start}}},
          {"seed", cfg.seed},
          {"probe_size", cfg.probe_size}};
}

nlohmann::json report_to_json(const TrainReport& report) {
  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& r : report.history) {
    history.push_back({{"epoch", r.epoch},
                       {"clean_acc", r.clean_acc},
                       {"ce_term", r.ce_term},
                       {"reg_term", r.reg_term},
                       {"mean_diameter", r.mean_diameter},
                       {"lr", r.lr}});
  }
  return {{"config", config_to_json(report.config)},
          {"seed", report.config.seed},
          {"checkpoint", report.checkpoint},
          {"epochs_completed", report.history.size()},
          {"history", history}};
}

std::string history_csv(const TrainReport& report) {
  std::string out = "epoch,clean_acc,ce_term,reg_term,mean_diameter,lr\n";
  char buf[160];
  for (const EpochRecord& r : report.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.clean_acc, r.ce_term,
                  r.reg_term, r.mean_diameter, r.lr);
    out += buf;
  }
  return out;
}

}  // namespace caplab
