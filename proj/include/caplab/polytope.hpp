#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "caplab/mlp.hpp"
#include "caplab/tensor.hpp"

namespace caplab {

enum class NormKind { linf };

// Valid input domain; perturbed inputs are clamped into [lo, hi].
struct InputClip {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const InputClip&, const InputClip&) = default;
};

// The constraint set for perturbations: the l-infinity ball of radius
// epsilon, optionally intersected with the input domain around a sample.
struct PerturbationBudget {
  double epsilon = 0.0;
  NormKind norm = NormKind::linf;
  std::optional<InputClip> input_clip;

  void validate() const;
  friend bool operator==(const PerturbationBudget&, const PerturbationBudget&) = default;
};

struct ParticleSet {
  std::vector<Tensor> particles;
  PerturbationBudget budget;
  std::uint64_t seed = 0;

  std::size_t size() const { return particles.size(); }
};

struct PolytopeEstimate {
  std::vector<Tensor> corners;  // f(x + eps_n)
  Tensor center;                // mean of corners
  std::vector<double> distances;
  double diameter = 0.0;
  std::vector<double> objective_history;  // mean squared distance after each outer iteration
};

struct CornerSearchConfig {
  std::size_t n_particles = 10;
  std::size_t steps = 40;
  double eta = 2.0 / 255.0;
  PerturbationBudget budget{8.0 / 255.0, NormKind::linf, std::nullopt};
  std::uint64_t seed = 0;
  // Worker threads for the per-particle sweep; never changes the result.
  std::size_t threads = 1;

  void validate() const;
};

struct CornerSearchResult {
  ParticleSet particles;
  PolytopeEstimate estimate;
};

// Entries i.i.d. U(-epsilon, epsilon); entry (n, j) is draw n*dim + j of the
// counter-based stream keyed by `seed`.
ParticleSet init_particles(std::uint64_t seed, std::size_t n_particles, std::size_t dim,
                           const PerturbationBudget& budget);

// Euclidean projection onto the feasible box around x: each coordinate is
// clamped to [-eps, eps] and, with an input clip, to [lo - x, hi - x]. The
// result satisfies lo <= x + p <= hi exactly in floating point.
Tensor project(const Tensor& perturbation, const PerturbationBudget& budget, const Tensor& x);

// Mean of f(x + eps_n), summed in particle order.
Tensor empirical_center(const MlpModel& model, const Tensor& x, const ParticleSet& particles);

// One projected ascent step on ||f(x + p) - center||^2 with a fixed center.
Tensor ascend_step(const MlpModel& model, const Tensor& x, const Tensor& particle, const Tensor& center, double eta,
                   const PerturbationBudget& budget, std::size_t particle_index = 0);

// The particle search for corner points of the output set reachable from x:
// T outer iterations, each moving every particle once against the center
// fixed at the start of the iteration, then refreshing the center.
CornerSearchResult find_corners(const MlpModel& model, const Tensor& x, const CornerSearchConfig& cfg);

// Largest pairwise l2 distance between corners; 0 for a single corner.
double diameter(std::span<const Tensor> corners);
double diameter(const PolytopeEstimate& estimate);

}  // namespace caplab
