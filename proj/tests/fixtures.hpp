#pragma once
// Small shared datasets and configs for the training-level tests.

#include <cmath>
#include <vector>

#include "caplab/cap_train.hpp"
#include "caplab/data.hpp"

namespace fixture {

// Three Gaussian classes on an equilateral triangle with side 0.7.
inline const std::vector<std::vector<double>>& triangle_centers() {
  static const std::vector<std::vector<double>> centers{{0.0, 0.0}, {0.7, 0.0}, {0.35, 0.35 * std::sqrt(3.0)}};
  return centers;
}

inline caplab::Dataset blobs(std::uint64_t seed, std::size_t n_per_class = 100, double sigma = 0.15) {
  return caplab::gen_blobs(seed, n_per_class, triangle_centers(), sigma);
}

inline caplab::TrainConfig short_config(caplab::TrainerKind kind, std::uint64_t seed, std::size_t epochs) {
  caplab::TrainConfig cfg;
  cfg.trainer = kind;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  cfg.lr_drops.clear();
  cfg.polytope.n_particles = 10;
  cfg.polytope.steps = 10;
  cfg.polytope.eta = 0.02;
  cfg.polytope.budget.epsilon = 0.1;
  cfg.attack = {caplab::AttackKind::pgd, 0.1, 0.025, 10, true, std::nullopt, 0};
  cfg.probe_size = 16;
  return cfg;
}

}  // namespace fixture
