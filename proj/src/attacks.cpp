#include "caplab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "caplab/errors.hpp"
#include "caplab/parallel.hpp"
#include "caplab/random.hpp"

namespace caplab {

std::string_view to_string(AttackKind kind) { return kind == AttackKind::fgsm ? "fgsm" : "pgd"; }

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "pgd") return AttackKind::pgd;
  throw ContractViolation("unknown attack kind '" + std::string(name) + "' (expected fgsm or pgd)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ContractViolation("attack epsilon must be finite and >= 0");
  if (kind == AttackKind::pgd) {
    if (steps < 1) throw ContractViolation("pgd needs at least one step");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ContractViolation("pgd step size must be > 0");
  }
  if (input_clip && !(input_clip->lo < input_clip->hi)) throw ContractViolation("input clip requires lo < hi");
}

std::string AttackConfig::label() const {
  return kind == AttackKind::fgsm ? std::string("fgsm") : "pgd-" + std::to_string(steps);
}

Tensor input_loss_gradient(const MlpModel& model, const Tensor& x, std::size_t label) {
  const ForwardResult eval = forward(model, x);
  const Tensor g = grad_input(model, eval.trace, cross_entropy_logit_grad(softmax(eval.logits), label));
  if (!g.all_finite()) throw NumericError("attack: non-finite input gradient");
  return g;
}

double sample_loss(const MlpModel& model, const Tensor& x, std::size_t label) {
  return cross_entropy(softmax(predict_logits(model, x)), label);
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Box around the clean sample intersected with the input clip.
void clamp_to_threat(Tensor& adv, const Tensor& x, double eps, const std::optional<InputClip>& clip) {
  for (std::size_t j = 0; j < adv.size(); ++j) {
    double v = std::clamp(adv[j], x[j] - eps, x[j] + eps);
    if (clip) v = std::clamp(v, clip->lo, clip->hi);
    adv[j] = v;
  }
}

void check_shapes(const MlpModel& model, const Tensor& x, std::size_t label) {
  if (x.size() != model.input_dim()) throw ShapeError("attack: sample length does not match model input");
  if (label >= model.output_dim()) throw ContractViolation("attack: label out of range");
}

}  // namespace

Tensor fgsm(const MlpModel& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  cfg.validate();
  check_shapes(model, x, label);
  if (cfg.epsilon == 0.0) return x;
  const Tensor g = input_loss_gradient(model, x, label);
  Tensor adv = x;
  for (std::size_t j = 0; j < adv.size(); ++j) adv[j] += cfg.epsilon * sign(g[j]);
  clamp_to_threat(adv, x, cfg.epsilon, cfg.input_clip);
  return adv;
}

Tensor pgd(const MlpModel& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  cfg.validate();
  check_shapes(model, x, label);
  if (cfg.epsilon == 0.0) return x;
  Tensor adv = x;
  if (cfg.random_start) {
    CounterRng rng(cfg.seed);
    for (std::size_t j = 0; j < adv.size(); ++j) adv[j] += rng.uniform(-cfg.epsilon, cfg.epsilon);
    clamp_to_threat(adv, x, cfg.epsilon, cfg.input_clip);
  }
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const Tensor g = input_loss_gradient(model, adv, label);
    for (std::size_t j = 0; j < adv.size(); ++j) adv[j] += cfg.step_size * sign(g[j]);
    clamp_to_threat(adv, x, cfg.epsilon, cfg.input_clip);
  }
  return adv;
}

Tensor attack(const MlpModel& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  return cfg.kind == AttackKind::fgsm ? fgsm(model, x, label, cfg) : pgd(model, x, label, cfg);
}

std::size_t predict_class(const MlpModel& model, const Tensor& x) {
  return argmax(predict_logits(model, x).values());
}

double clean_accuracy(const MlpModel& model, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict_class(model, data.sample(i)) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double robust_accuracy(const MlpModel& model, const Dataset& data, const AttackConfig& cfg, std::size_t threads) {
  cfg.validate();
  data.validate();
  std::vector<char> robust(data.size(), 0);
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const Tensor x = data.sample(i);
    const std::size_t y = data.labels[i];
    if (predict_class(model, x) != y) return;
    AttackConfig sample_cfg = cfg;
    sample_cfg.seed = derive_seed(cfg.seed, {i});
    robust[i] = predict_class(model, attack(model, x, y, sample_cfg)) == y;
  });
  const auto count = static_cast<std::size_t>(std::count(robust.begin(), robust.end(), char{1}));
  return static_cast<double>(count) / static_cast<double>(data.size());
}

}  // namespace caplab
