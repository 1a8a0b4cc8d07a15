#include "caplab/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "caplab/errors.hpp"
#include "caplab/parallel.hpp"
#include "caplab/random.hpp"

namespace caplab {

void PerturbationBudget::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ContractViolation("epsilon must be finite and >= 0");
  if (input_clip && !(input_clip->lo < input_clip->hi)) throw ContractViolation("input clip requires lo < hi");
}

void CornerSearchConfig::validate() const {
  if (n_particles < 1) throw ContractViolation("corner search needs at least one particle");
  if (steps < 1) throw ContractViolation("corner search needs at least one outer iteration");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ContractViolation("step size eta must be finite and >= 0");
  budget.validate();
}

ParticleSet init_particles(std::uint64_t seed, std::size_t n_particles, std::size_t dim,
                           const PerturbationBudget& budget) {
  if (n_particles == 0) throw ContractViolation("init_particles: need at least one particle");
  if (dim == 0) throw ContractViolation("init_particles: dimension must be positive");
  budget.validate();
  ParticleSet set{{}, budget, seed};
  set.particles.reserve(n_particles);
  const double eps = budget.epsilon;
  for (std::size_t n = 0; n < n_particles; ++n) {
    Tensor p({dim});
    for (std::size_t j = 0; j < dim; ++j) {
      const double u = CounterRng::unit_at(seed, n * dim + j);
      p[j] = eps == 0.0 ? 0.0 : std::clamp(-eps + 2.0 * eps * u, -eps, eps);
    }
    set.particles.push_back(std::move(p));
  }
  return set;
}

Tensor project(const Tensor& perturbation, const PerturbationBudget& budget, const Tensor& x) {
  if (perturbation.size() != x.size()) throw ShapeError("project: perturbation and sample lengths differ");
  const double eps = budget.epsilon;
  Tensor out(perturbation.shape());
  for (std::size_t j = 0; j < perturbation.size(); ++j) {
    double lo = -eps;
    double hi = eps;
    if (budget.input_clip) {
      lo = std::max(lo, budget.input_clip->lo - x[j]);
      hi = std::min(hi, budget.input_clip->hi - x[j]);
      if (lo > hi) {
        throw ContractViolation("project: coordinate " + std::to_string(j) +
                                " of the sample is farther than epsilon from the input domain");
      }
    }
    double v = std::clamp(perturbation[j], lo, hi);
    if (budget.input_clip) {
      // lo - x and hi - x are rounded; walk inward until x + v is inside.
      constexpr double inf = std::numeric_limits<double>::infinity();
      while (x[j] + v > budget.input_clip->hi && v > -eps) v = std::nextafter(v, -inf);
      while (x[j] + v < budget.input_clip->lo && v < eps) v = std::nextafter(v, inf);
    }
    out[j] = v;
  }
  return out;
}

namespace {

Tensor shifted(const Tensor& x, const Tensor& p) {
  if (x.size() != p.size()) throw ShapeError("perturbation length does not match sample length");
  Tensor out = x;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += p[j];
  return out;
}

// Accumulated as offsets from the first output, in index order, so that N
// identical outputs give a center equal to them bit for bit.
Tensor mean_of(std::span<const Tensor> outputs) {
  const Tensor& first = outputs.front();
  Tensor offset(first.shape());
  for (const Tensor& o : outputs) {
    for (std::size_t k = 0; k < o.size(); ++k) offset[k] += o[k] - first[k];
  }
  const double n = static_cast<double>(outputs.size());
  Tensor center = first;
  for (std::size_t k = 0; k < center.size(); ++k) center[k] += offset[k] / n;
  return center;
}

// Ascent step given the forward pass at x + particle.
Tensor step_from_trace(const MlpModel& model, const Tensor& x, const Tensor& particle, const ForwardResult& eval,
                       const Tensor& center, double eta, const PerturbationBudget& budget, std::size_t index) {
  if (center.size() != eval.logits.size()) throw ShapeError("center length does not match model outputs");
  Tensor cotangent(eval.logits.shape());
  for (std::size_t k = 0; k < cotangent.size(); ++k) cotangent[k] = 2.0 * (eval.logits[k] - center[k]);
  const Tensor g = grad_input(model, eval.trace, cotangent);
  if (!g.all_finite()) {
    throw NumericError("corner search: non-finite gradient for particle " + std::to_string(index));
  }
  Tensor moved = particle;
  for (std::size_t j = 0; j < moved.size(); ++j) moved[j] += eta * g[j];
  return project(moved, budget, x);
}

}  // namespace

Tensor empirical_center(const MlpModel& model, const Tensor& x, const ParticleSet& particles) {
  if (particles.size() == 0) throw ContractViolation("empirical_center: empty particle set");
  std::vector<Tensor> outputs;
  outputs.reserve(particles.size());
  for (const Tensor& p : particles.particles) outputs.push_back(predict_logits(model, shifted(x, p)));
  return mean_of(outputs);
}

Tensor ascend_step(const MlpModel& model, const Tensor& x, const Tensor& particle, const Tensor& center, double eta,
                   const PerturbationBudget& budget, std::size_t particle_index) {
  const ForwardResult eval = forward(model, shifted(x, particle));
  return step_from_trace(model, x, particle, eval, center, eta, budget, particle_index);
}

CornerSearchResult find_corners(const MlpModel& model, const Tensor& x, const CornerSearchConfig& cfg) {
  cfg.validate();
  if (x.rank() != 1 || x.size() != model.input_dim()) {
    throw ShapeError("find_corners: sample length " + std::to_string(x.size()) + " does not match model input " +
                     std::to_string(model.input_dim()));
  }
  const std::size_t n = cfg.n_particles;
  ParticleSet set = init_particles(cfg.seed, n, x.size(), cfg.budget);
  for (Tensor& p : set.particles) p = project(p, cfg.budget, x);

  // evals[i] always holds the forward pass at the current particle i; the
  // trace is reused by the next ascent step.
  std::vector<ForwardResult> evals(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) { evals[i] = forward(model, shifted(x, set.particles[i])); });

  std::vector<Tensor> outputs(n);
  auto refresh_center = [&] {
    for (std::size_t i = 0; i < n; ++i) outputs[i] = evals[i].logits;
    return mean_of(outputs);
  };
  Tensor center = refresh_center();

  std::vector<double> history;
  history.reserve(cfg.steps);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      set.particles[i] = step_from_trace(model, x, set.particles[i], evals[i], center, cfg.eta, cfg.budget, i);
      evals[i] = forward(model, shifted(x, set.particles[i]));
    });
    center = refresh_center();
    double total = 0.0;
    for (const Tensor& o : outputs) total += squared_distance(o.values(), center.values());
    history.push_back(total / static_cast<double>(n));
  }

  PolytopeEstimate est;
  est.corners = std::move(outputs);
  est.center = std::move(center);
  est.distances.reserve(n);
  for (const Tensor& c : est.corners) est.distances.push_back(distance(c.values(), est.center.values()));
  est.diameter = diameter(est.corners);
  est.objective_history = std::move(history);
  return {std::move(set), std::move(est)};
}

double diameter(std::span<const Tensor> corners) {
  if (corners.empty()) throw ContractViolation("diameter of an empty corner set");
  double best = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    for (std::size_t j = i + 1; j < corners.size(); ++j) {
      best = std::max(best, squared_distance(corners[i].values(), corners[j].values()));
    }
  }
  return std::sqrt(best);
}

double diameter(const PolytopeEstimate& estimate) { return diameter(estimate.corners); }

}  // namespace caplab
