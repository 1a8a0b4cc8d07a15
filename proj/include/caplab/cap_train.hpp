#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "caplab/attacks.hpp"
#include "caplab/data.hpp"
#include "caplab/mlp.hpp"
#include "caplab/polytope.hpp"

namespace caplab {

enum class TrainerKind { cap, clean, vanilla_at };

std::string_view to_string(TrainerKind kind);
TrainerKind parse_trainer_kind(std::string_view name);

// Learning rate is divided by `divisor` from the (0-based) epoch `epoch` on.
struct LrDrop {
  std::size_t epoch = 0;
  double divisor = 10.0;
  friend bool operator==(const LrDrop&, const LrDrop&) = default;
};

struct TrainConfig {
  TrainerKind trainer = TrainerKind::cap;
  double lambda = 0.6;
  // Corner search per visited sample. `seed` is ignored here: each visit gets
  // derive_seed(seed, {particles, epoch, sample}).
  CornerSearchConfig polytope{};
  std::size_t epochs = 120;
  std::size_t batch_size = 128;
  double lr = 0.1;
  std::vector<LrDrop> lr_drops{{80, 10.0}, {100, 10.0}};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Inner maximization for vanilla_at.
  AttackConfig attack{AttackKind::pgd, 8.0 / 255.0, 2.0 / 255.0, 10, true, std::nullopt, 0};
  std::uint64_t seed = 0;
  // First `probe_size` training samples, used for the per-epoch diameter.
  std::size_t probe_size = 32;
  // Workers for per-sample work inside a batch; never changes results.
  std::size_t threads = 1;

  void validate() const;
  double lr_at(std::size_t epoch) const;
};

struct OptimizerState {
  Gradients velocity;
  double lr = 0.0;
  std::size_t epoch = 0;

  static OptimizerState for_model(const MlpModel& model, double lr);
};

// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
void sgd_step(MlpModel& model, const Gradients& grads, OptimizerState& state, double momentum, double weight_decay);

struct CapLossResult {
  double loss = 0.0;
  double ce = 0.0;
  double regularizer = 0.0;  // sum over particles, before lambda
  Gradients grads;
};

// CE(softmax(f(x)), y) + lambda * sum_n ||f(x + eps_n) - center||^2 with the
// particles and center held constant. With lambda == 0 the regularizer does
// not touch the gradient at all, so the result equals the clean loss bit for
// bit.
CapLossResult cap_loss(const MlpModel& model, const Tensor& x, std::size_t label, const ParticleSet& corners,
                       const Tensor& center, double lambda);

// Cross-entropy at x and its parameter gradient.
CapLossResult clean_loss(const MlpModel& model, const Tensor& x, std::size_t label);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double clean_acc = 0.0;
  double ce_term = 0.0;
  double reg_term = 0.0;
  double mean_diameter = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  TrainConfig config;
  std::string checkpoint;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

// Minibatch SGD over the chosen objective; see TrainerKind. Throws
// NumericError naming epoch and batch if the loss stops being finite.
TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& cfg);

// Mean estimated diameter over the given samples; sample i uses corner-search
// seed derive_seed(seed, {tag, i}).
double mean_diameter(const MlpModel& model, const Dataset& data, const CornerSearchConfig& cfg, std::uint64_t seed,
                     std::uint64_t tag, std::size_t threads = 1);

nlohmann::json config_to_json(const TrainConfig& cfg);
// Deterministic content only; wall-clock times are left out.
nlohmann::json report_to_json(const TrainReport& report);
// epoch,clean_acc,ce_term,reg_term,mean_diameter,lr
std::string history_csv(const TrainReport& report);

}  // namespace caplab
