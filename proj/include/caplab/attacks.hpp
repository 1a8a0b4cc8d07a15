#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "caplab/data.hpp"
#include "caplab/mlp.hpp"
#include "caplab/polytope.hpp"

namespace caplab {

enum class AttackKind { fgsm, pgd };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  std::size_t steps = 20;
  bool random_start = true;
  std::optional<InputClip> input_clip;
  // Random-start stream; robust_accuracy derives one stream per sample.
  std::uint64_t seed = 0;

  void validate() const;
  // "fgsm", "pgd-20", ...
  std::string label() const;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

// Gradient of CE(softmax(f(x)), label) with respect to x.
Tensor input_loss_gradient(const MlpModel& model, const Tensor& x, std::size_t label);

double sample_loss(const MlpModel& model, const Tensor& x, std::size_t label);

// x' = clip(x + eps * sign(grad)), sign(0) = 0.
Tensor fgsm(const MlpModel& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

// Optional uniform start in the eps-box, then `steps` signed-gradient steps,
// each followed by projection onto the eps-box around x and the input clip.
Tensor pgd(const MlpModel& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

// Dispatches on cfg.kind.
Tensor attack(const MlpModel& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

std::size_t predict_class(const MlpModel& model, const Tensor& x);

double clean_accuracy(const MlpModel& model, const Dataset& data);

// A sample counts as robust when both its clean and its attacked prediction
// are correct. Sample i is attacked with seed derive_seed(cfg.seed, {i}).
double robust_accuracy(const MlpModel& model, const Dataset& data, const AttackConfig& cfg, std::size_t threads = 1);

}  // namespace caplab
