#include <cmath>

#include <doctest.h>

#include "caplab/attacks.hpp"
#include "caplab/cap_train.hpp"
#include "caplab/errors.hpp"
#include "caplab/random.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace caplab;

namespace {

MlpModel net(std::uint64_t seed, std::vector<std::size_t> dims = {2, 16, 16, 3}) {
  return MlpModel::random(dims, Activation::relu, derive_seed(seed, {seed_tag::init}));
}

double mean_ce(const MlpModel& model, const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += sample_loss(model, data.sample(i), data.labels[i]);
  return total / static_cast<double>(data.size());
}

// Full objective evaluated with a plain forward pass, particles and center fixed.
double objective(const MlpModel& model, const Tensor& x, std::size_t y, const ParticleSet& set, const Tensor& center,
                 double lambda) {
  double reg = 0.0;
  for (const Tensor& p : set.particles) {
    const auto out = oracle::naive_forward(model, oracle::add(oracle::to_vec(x), oracle::to_vec(p)));
    reg += squared_distance(out, center.values());
  }
  return oracle::ce_from_logits(oracle::naive_forward(model, oracle::to_vec(x)), y) + lambda * reg;
}

}  // namespace

TEST_CASE("cap_loss: lambda = 0 is exactly the clean loss") {
  const MlpModel model = net(1);
  const Tensor x = Tensor::vector({0.3, 0.2});
  CornerSearchConfig cfg;
  cfg.budget.epsilon = 0.1;
  const auto corners = find_corners(model, x, cfg);
  const CapLossResult cap = cap_loss(model, x, 2, corners.particles, corners.estimate.center, 0.0);
  const CapLossResult clean = clean_loss(model, x, 2);
  CHECK(cap.loss == clean.loss);
  CHECK(cap.loss == cross_entropy(softmax(forward(model, x).logits), 2));
  CHECK(flatten(cap.grads) == flatten(clean.grads));
  CHECK(cap.regularizer > 0.0);
}

TEST_CASE("cap_loss: zero budget gives a zero regularizer") {
  const MlpModel model = net(2);
  const Tensor x = Tensor::vector({0.1, -0.4});
  CornerSearchConfig cfg;
  cfg.budget.epsilon = 0.0;
  const auto corners = find_corners(model, x, cfg);
  const CapLossResult cap = cap_loss(model, x, 0, corners.particles, corners.estimate.center, 0.6);
  CHECK(cap.regularizer == 0.0);
  CHECK(cap.loss == clean_loss(model, x, 0).loss);
}

TEST_CASE("cap_loss: gradient matches finite differences of the frozen objective") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MlpModel model = net(seed, {3, 6, 5, 3});
    CounterRng rng(seed + 70);
    const Tensor x = Tensor::vector({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const std::size_t y = rng.below(3);
    CornerSearchConfig cfg;
    cfg.budget.epsilon = 0.2;
    cfg.steps = 5;
    cfg.seed = seed;
    const auto corners = find_corners(model, x, cfg);
    const double lambda = 0.6;
    const CapLossResult res = cap_loss(model, x, y, corners.particles, corners.estimate.center, lambda);
    CHECK(res.loss == doctest::Approx(objective(model, x, y, corners.particles, corners.estimate.center, lambda))
                          .epsilon(1e-12));

    const auto analytic = flatten(res.grads);
    std::vector<double> fd(analytic.size());
    for (std::size_t k = 0; k < fd.size(); ++k) {
      double& p = model.parameter(k);
      const double saved = p;
      fd[k] = oracle::central_difference(
          [&](double v) {
            p = v;
            return objective(model, x, y, corners.particles, corners.estimate.center, lambda);
          },
          saved, 1e-5);
      p = saved;
    }
    CHECK(oracle::max_relative_error(analytic, fd) < 1e-6);
  }
}

TEST_CASE("cap_loss: rejects a center of the wrong length") {
  const MlpModel model = net(3);
  const Tensor x = Tensor::vector({0, 0});
  const ParticleSet set = init_particles(1, 2, 2, {0.1, NormKind::linf, std::nullopt});
  CHECK_THROWS_AS(cap_loss(model, x, 0, set, Tensor::vector({0, 0}), 0.6), ContractViolation);
}

TEST_CASE("sgd_step: closed-form updates") {
  const MlpModel start = oracle::linear_model({{1.0, -2.0}}, {0.5});
  Gradients g = zero_gradients(start);
  g[0].weight = Tensor::matrix(1, 2, {0.25, -0.5});
  g[0].bias = Tensor::vector({1.0});

  SUBCASE("plain gradient descent") {
    MlpModel m = start;
    OptimizerState s = OptimizerState::for_model(m, 0.1);
    sgd_step(m, g, s, 0.0, 0.0);
    CHECK(m.layer(0).weight[0] == 1.0 - 0.1 * 0.25);
    CHECK(m.layer(0).weight[1] == -2.0 + 0.1 * 0.5);
    CHECK(m.layer(0).bias[0] == 0.5 - 0.1);
  }
  SUBCASE("two momentum steps move by -lr * g * (2 + mu)") {
    MlpModel m = start;
    OptimizerState s = OptimizerState::for_model(m, 0.1);
    sgd_step(m, g, s, 0.9, 0.0);
    sgd_step(m, g, s, 0.9, 0.0);
    CHECK(m.layer(0).weight[0] - 1.0 == doctest::Approx(-0.1 * 0.25 * 2.9).epsilon(1e-14));
    CHECK(m.layer(0).bias[0] - 0.5 == doctest::Approx(-0.1 * 1.0 * 2.9).epsilon(1e-14));
  }
  SUBCASE("zero gradient only decays the buffers") {
    MlpModel m = start;
    OptimizerState s = OptimizerState::for_model(m, 0.1);
    s.velocity[0].bias[0] = 0.0;
    sgd_step(m, zero_gradients(m), s, 0.9, 0.0);
    CHECK(m == start);
    s.velocity[0].weight = Tensor::matrix(1, 2, {1.0, -1.0});
    const double vw = s.velocity[0].weight[0];
    MlpModel moved = m;
    sgd_step(moved, zero_gradients(m), s, 0.9, 0.0);
    CHECK(s.velocity[0].weight[0] == 0.9 * vw);
  }
  SUBCASE("weight decay is added to the gradient") {
    MlpModel m = start;
    OptimizerState s = OptimizerState::for_model(m, 0.1);
    sgd_step(m, zero_gradients(m), s, 0.0, 0.5);
    CHECK(m.layer(0).weight[0] == 1.0 - 0.1 * 0.5 * 1.0);
  }
}

TEST_CASE("TrainConfig: schedule and validation") {
  TrainConfig cfg;
  cfg.lr = 1.0;
  cfg.lr_drops = {{2, 10.0}, {4, 10.0}};
  CHECK(cfg.lr_at(0) == 1.0);
  CHECK(cfg.lr_at(1) == 1.0);
  CHECK(cfg.lr_at(2) == 0.1);
  CHECK(cfg.lr_at(4) == doctest::Approx(0.01));
  cfg.lr_drops = {{4, 10.0}, {4, 10.0}};
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.lambda = 0.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("train: zero epochs returns the model unchanged") {
  const Dataset data = fixture::blobs(1, 20);
  const MlpModel model = net(1);
  const TrainResult res = train(model, data, fixture::short_config(TrainerKind::cap, 1, 0));
  CHECK(res.model == model);
  CHECK(res.report.history.empty());
}

TEST_CASE("train: clean training separates linearly separable blobs") {
  // Two blobs 4 units apart with sigma 0.1: every point lies within 1 unit of
  // its center, so the perpendicular bisector separates them.
  const Dataset data = gen_blobs(5, 50, {{-2.0, 0.0}, {2.0, 0.0}}, 0.1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    REQUIRE((data.features(i, 0) < 0.0) == (data.labels[i] == 0));
  }
  TrainConfig cfg = fixture::short_config(TrainerKind::clean, 5, 200);
  cfg.probe_size = 0;
  const TrainResult res = train(MlpModel::random(std::vector<std::size_t>{2, 8, 2}, Activation::relu, 5), data, cfg);
  bool reached = false;
  for (const EpochRecord& r : res.report.history) reached = reached || r.clean_acc == 1.0;
  CHECK(reached);
  CHECK(res.report.history.size() == 200);
}

TEST_CASE("train: cap with lambda = 0 follows the clean trajectory exactly") {
  const Dataset data = fixture::blobs(2, 40);
  TrainConfig cap = fixture::short_config(TrainerKind::cap, 2, 3);
  cap.lambda = 0.0;
  cap.polytope.steps = 3;
  TrainConfig clean = cap;
  clean.trainer = TrainerKind::clean;
  MlpModel a = net(2);
  MlpModel b = a;
  for (int epoch = 0; epoch < 3; ++epoch) {
    // Re-running from scratch with more epochs replays the same prefix, so
    // comparing after each epoch count compares the whole trajectory.
    cap.epochs = clean.epochs = static_cast<std::size_t>(epoch + 1);
    CHECK(train(a, data, cap).model == train(b, data, clean).model);
  }
  const auto rc = train(a, data, cap).report;
  const auto rk = train(b, data, clean).report;
  for (std::size_t e = 0; e < rc.history.size(); ++e) {
    CHECK(rc.history[e].ce_term == rk.history[e].ce_term);
    CHECK(rc.history[e].clean_acc == rk.history[e].clean_acc);
  }
}

TEST_CASE("train: first epoch lowers the loss (3 seeds)") {
  double before = 0.0;
  double after = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Dataset data = fixture::blobs(seed);
    TrainConfig cfg = fixture::short_config(TrainerKind::cap, seed, 1);
    cfg.lr = 0.01;
    const MlpModel model = net(seed);
    before += mean_ce(model, data);
    after += mean_ce(train(model, data, cfg).model, data);
  }
  CHECK(after < before);
}

TEST_CASE("train: results do not depend on the thread count") {
  const Dataset data = fixture::blobs(4, 30);
  for (TrainerKind kind : {TrainerKind::cap, TrainerKind::vanilla_at}) {
    TrainConfig cfg = fixture::short_config(kind, 4, 2);
    const MlpModel model = net(4);
    const TrainResult one = train(model, data, cfg);
    cfg.threads = 4;
    const TrainResult four = train(model, data, cfg);
    CHECK(one.model == four.model);
    CHECK(history_csv(one.report) == history_csv(four.report));
    CHECK(report_to_json(one.report) == report_to_json(four.report));
  }
}

TEST_CASE("train: regularizer stays nonnegative and CAP confines the polytopes") {
  const Dataset data = fixture::blobs(6, 60);
  const MlpModel model = net(6);
  const TrainResult cap = train(model, data, fixture::short_config(TrainerKind::cap, 6, 40));
  const TrainResult clean = train(model, data, fixture::short_config(TrainerKind::clean, 6, 40));
  for (const EpochRecord& r : cap.report.history) CHECK(r.reg_term >= 0.0);
  CHECK(cap.report.history.back().mean_diameter < clean.report.history.back().mean_diameter);
}

TEST_CASE("train: non-finite loss is reported with epoch and batch") {
  const Dataset data = fixture::blobs(7, 10);
  TrainConfig cfg = fixture::short_config(TrainerKind::clean, 7, 5);
  cfg.lr = 1e200;
  cfg.momentum = 0.0;
  CHECK_THROWS_WITH_AS(train(net(7), data, cfg), doctest::Contains("epoch"), NumericError);
}

TEST_CASE("history_csv: header and one row per epoch") {
  const Dataset data = fixture::blobs(8, 10);
  const TrainResult res = train(net(8), data, fixture::short_config(TrainerKind::clean, 8, 2));
  const std::string csv = history_csv(res.report);
  CHECK(csv.rfind("epoch,clean_acc,ce_term,reg_term,mean_diameter,lr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(report_to_json(res.report)["history"].size() == 2);
}
