// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Usage: acceptance <configs dir> <caplab binary>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "caplab/attacks.hpp"
#include "caplab/cap_train.hpp"
#include "caplab/config.hpp"
#include "caplab/experiment.hpp"
#include "caplab/model_io.hpp"
#include "caplab/polytope.hpp"
#include "caplab/random.hpp"
#include "oracles.hpp"

using namespace caplab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
  // Time spent on this criterion's work outside its own body (shared runs).
  double shared_seconds = 0.0;
};

int g_failures = 0;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Runs one criterion, adds the wall-clock limit to its verdict and prints
// the result line.
void criterion(int id, const std::string& name, double limit_seconds, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() + v.shared_seconds;
  const bool in_time = secs < limit_seconds;
  const bool pass = v.pass && in_time;
  if (!pass) ++g_failures;
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << v.detail << "; " << fmt("%.1f", secs)
            << " s (limit " << fmt("%.0f", limit_seconds) << " s" << (in_time ? "" : ", exceeded") << ")"
            << std::endl;
}

Tensor random_vector(std::size_t n, CounterRng& rng, double lo, double hi) {
  Tensor v({n});
  for (double& x : v.values()) x = rng.uniform(lo, hi);
  return v;
}

// ---------------------------------------------------------------------------
// 1. Every coordinate of grad_params and grad_input against central
// differences (h = 1e-5) on 20 random MLPs, widths <= 16, 1 to 3 hidden
// layers. Relative error is |a - b| / max(|a|, |b|, 1e-3).
Verdict gradient_fidelity() {
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t net = 0; net < 20; ++net) {
    CounterRng rng(derive_seed(2024, {net}));
    std::vector<std::size_t> dims{1 + rng.below(16)};
    const std::size_t hidden = 1 + net % 3;
    for (std::size_t k = 0; k < hidden; ++k) dims.push_back(1 + rng.below(16));
    dims.push_back(2 + rng.below(15));
    const MlpModel model = MlpModel::random(dims, Activation::relu, derive_seed(2024, {net, 1}));
    const Tensor x = random_vector(dims.front(), rng, -1, 1);
    const Tensor cot = random_vector(dims.back(), rng, -1, 1);
    const auto eval = forward(model, x);
    const auto gp = flatten(grad_params(model, eval.trace, cot));
    const auto gi = oracle::to_vec(grad_input(model, eval.trace, cot));
    const auto fp = oracle::fd_param_gradient(model, oracle::to_vec(x), oracle::to_vec(cot), 1e-5);
    const auto fi = oracle::fd_input_gradient(model, oracle::to_vec(x), oracle::to_vec(cot), 1e-5);
    worst = std::max({worst, oracle::max_relative_error(gp, fp), oracle::max_relative_error(gi, fi)});
    coords += gp.size() + gi.size();
  }
  return {worst < 1e-6, "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(coords) +
                            " coordinates of 20 nets (limit 1e-6)"};
}

// ---------------------------------------------------------------------------
// 2. Corner search on linear models. ||W(x + p) - C||^2 is convex in p, so
// each particle is pushed to a vertex of the box; the oracle enumerates the
// 2^d vertex images. W is square and diagonally dominant (full rank) so no
// direction of the box is invisible to the objective.
Verdict corner_oracle() {
  double worst_coord = 0.0;
  double worst_image = 0.0;
  std::size_t fixtures = 0;
  for (std::size_t d : {2u, 6u}) {
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
      CounterRng rng(derive_seed(77, {d, rep}));
      const MlpModel lin = oracle::linear_model(oracle::dominant_matrix(d, 3.0, derive_seed(78, {d, rep})),
                                                oracle::to_vec(random_vector(d, rng, -0.5, 0.5)));
      const Tensor x = random_vector(d, rng, -1, 1);
      CornerSearchConfig cfg;
      cfg.n_particles = 8;
      cfg.steps = 40;
      cfg.eta = 0.02;
      cfg.budget = {0.1, NormKind::linf, std::nullopt};
      cfg.seed = derive_seed(79, {d, rep});
      const auto res = find_corners(lin, x, cfg);
      std::vector<std::vector<double>> images;
      for (const auto& v : oracle::box_vertices(d, 0.1)) {
        images.push_back(oracle::naive_forward(lin, oracle::add(oracle::to_vec(x), v)));
      }
      for (std::size_t n = 0; n < cfg.n_particles; ++n) {
        for (double v : res.particles.particles[n].values()) worst_coord = std::max(worst_coord, std::abs(std::abs(v) - 0.1));
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& img : images) nearest = std::min(nearest, oracle::l2(img, oracle::to_vec(res.estimate.corners[n])));
        worst_image = std::max(worst_image, nearest);
      }
      ++fixtures;
    }
  }
  return {worst_coord <= 1e-3 && worst_image <= 1e-6,
          std::to_string(fixtures) + " fixtures (d=2 c=2, d=6 c=6): max |abs(p)-eps| " + fmt("%.2e", worst_coord) +
              " (limit 1e-3), max distance to a vertex image " + fmt("%.2e", worst_image) + " (limit 1e-6)"};
}

// ---------------------------------------------------------------------------
// 3. Feasibility over 1000 randomized searches, then thread independence on
// 50 seeded runs, both through the library and through the `corners` CLI.
Verdict feasibility_and_determinism(const fs::path& binary, const fs::path& scratch) {
  std::size_t violations = 0;
  for (std::uint64_t run = 0; run < 1000; ++run) {
    CounterRng rng(derive_seed(31, {run}));
    const std::size_t d = 1 + rng.below(8);
    const std::vector<std::size_t> dims{d, 1 + rng.below(16), 2 + rng.below(5)};
    const MlpModel model = MlpModel::random(dims, Activation::relu, run);
    const Tensor x = random_vector(d, rng, 0.0, 1.0);
    CornerSearchConfig cfg;
    cfg.n_particles = 1 + rng.below(10);
    cfg.steps = 1 + rng.below(20);
    cfg.eta = rng.uniform(0.0, 1.0);
    cfg.budget = {rng.uniform(0.0, 0.5), NormKind::linf, std::nullopt};
    if (run % 2 == 0) cfg.budget.input_clip = InputClip{0.0, 1.0};
    cfg.seed = run;
    const auto res = find_corners(model, x, cfg);
    for (const Tensor& p : res.particles.particles) {
      for (std::size_t j = 0; j < d; ++j) {
        bool ok = std::abs(p[j]) <= cfg.budget.epsilon;
        if (cfg.budget.input_clip) ok = ok && x[j] + p[j] >= 0.0 && x[j] + p[j] <= 1.0;
        if (!ok) ++violations;
      }
    }
  }

  std::size_t lib_mismatch = 0;
  std::size_t cli_mismatch = 0;
  fs::create_directories(scratch);
  for (std::uint64_t run = 0; run < 50; ++run) {
    CounterRng rng(derive_seed(32, {run}));
    const std::size_t d = 2 + rng.below(6);
    const MlpModel model =
        MlpModel::random(std::vector<std::size_t>{d, 16, 16, 3}, Activation::relu, derive_seed(33, {run}));
    const Tensor x = random_vector(d, rng, -1, 1);
    CornerSearchConfig cfg;
    cfg.n_particles = 10;
    cfg.steps = 10;
    cfg.eta = 0.05;
    cfg.budget = {0.1, NormKind::linf, std::nullopt};
    cfg.seed = run;
    cfg.threads = 1;
    const auto one = find_corners(model, x, cfg);
    cfg.threads = 8;
    const auto eight = find_corners(model, x, cfg);
    if (one.particles.particles != eight.particles.particles || one.estimate.corners != eight.estimate.corners ||
        one.estimate.center != eight.estimate.center) {
      ++lib_mismatch;
    }

    const fs::path ckpt = scratch / "model.json";
    save_model(model, ckpt);
    std::string input;
    for (std::size_t j = 0; j < d; ++j) input += (j ? "," : "") + fmt("%.17g", x[j]);
    std::string outputs[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = scratch / (k == 0 ? "t1" : "t8");
      const std::string cmd = "\"" + binary.string() + "\" corners --checkpoint \"" + ckpt.string() + "\" --input=" + input +
                              " --epsilon 0.1 --particles 10 --steps 10 --eta 0.05 --seed " + std::to_string(run) +
                              " --threads " + (k == 0 ? "1" : "8") + " --out \"" + out.string() + "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "corners command failed: " + cmd};
      std::ifstream in(out / "estimate.json");
      std::ostringstream ss;
      ss << in.rdbuf();
      outputs[k] = ss.str();
    }
    if (outputs[0].empty() || outputs[0] != outputs[1]) ++cli_mismatch;
  }
  return {violations == 0 && lib_mismatch == 0 && cli_mismatch == 0,
          "1000 runs, " + std::to_string(violations) + " feasibility violations; 50 runs threads 1 vs 8: " +
              std::to_string(lib_mismatch) + " library and " + std::to_string(cli_mismatch) +
              " CLI estimate mismatches (all must be 0)"};
}

// ---------------------------------------------------------------------------
// 4. lambda = 0 CAP against clean training on the shipped blobs fixture:
// parameters compared after every epoch 1..5 (each run replays the same
// prefix, so this is the epoch-level trajectory).
Verdict lambda_zero(const RunConfig& preset) {
  std::size_t mismatched = 0;
  for (std::size_t epochs = 1; epochs <= 5; ++epochs) {
    RunConfig cap = preset;
    cap.train.trainer = TrainerKind::cap;
    cap.train.lambda = 0.0;
    cap.train.epochs = epochs;
    RunConfig clean = cap;
    clean.train.trainer = TrainerKind::clean;
    if (!(run_training(cap).trained.model == run_training(clean).trained.model)) ++mismatched;
  }
  return {mismatched == 0, std::to_string(mismatched) + " of 5 epoch checkpoints differ (must be 0, bit-exact)"};
}

// ---------------------------------------------------------------------------
// 5 and 6 share one set of trained models: the blobs presets with seeds 1..3.
struct SeedResult {
  double clean_acc[3] = {};
  double pgd20[3] = {};
  double diameter[3] = {};
  double train_seconds[3] = {};
};

enum Trainer { kCap = 0, kClean = 1, kAt = 2 };

// Trains trainer `t` for seeds 1..3 into `results` and evaluates it on the
// test split: PGD-20 (alpha 0.02, random start) and the mean diameter.
void run_fixture(const RunConfig presets[3], int t, std::vector<SeedResult>& results) {
  results.resize(3);
  const AttackConfig pgd20{AttackKind::pgd, 0.1, 0.02, 20, true, std::nullopt, 0};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SeedResult& r = results[seed - 1];
    RunConfig cfg = presets[t];
    cfg.seed = seed;
    cfg.train.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    const RunOutcome run = run_training(cfg);
    const EvalSummary s = evaluate(run.trained.model, run.data.test, {pgd20}, presets[0].train.polytope, seed, 1);
    r.train_seconds[t] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.clean_acc[t] = s.clean_accuracy;
    r.pgd20[t] = s.attacks[0].accuracy;
    r.diameter[t] = s.mean_diameter;
  }
}

double mean_of(const std::vector<SeedResult>& rs, double (SeedResult::*field)[3], int t) {
  double s = 0.0;
  for (const SeedResult& r : rs) s += (r.*field)[t];
  return s / static_cast<double>(rs.size());
}

std::string pct(double v) { return fmt("%.2f", 100.0 * v); }

// ---------------------------------------------------------------------------
// 8. `caplab compare` on the shipped presets, twice; every output file except
// run.log must match byte for byte.
Verdict cli_compare(const fs::path& binary, const fs::path& configs, const fs::path& scratch) {
  fs::create_directories(scratch);
  for (int k = 0; k < 2; ++k) {
    const fs::path out = scratch / (k == 0 ? "first" : "second");
    fs::remove_all(out);
    const std::string cmd = "\"" + binary.string() + "\" compare \"" + (configs / "blobs_cap.cfg").string() +
                            "\" \"" + (configs / "blobs_clean.cfg").string() + "\" --out \"" + out.string() +
                            "\" > \"" + (scratch / "stdout.txt").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status != 0) return {false, "compare exited with status " + std::to_string(status)};
  }
  std::size_t files = 0;
  std::size_t differing = 0;
  const fs::path first = scratch / "first";
  for (const auto& entry : fs::recursive_directory_iterator(first)) {
    if (!entry.is_regular_file() || entry.path().filename() == "run.log") continue;
    const fs::path rel = fs::relative(entry.path(), first);
    auto read = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    ++files;
    if (!fs::exists(scratch / "second" / rel) || read(entry.path()) != read(scratch / "second" / rel)) ++differing;
  }
  const auto doc = nlohmann::json::parse(std::ifstream(first / "compare.json"));
  const double cap_diam = doc["columns"][0]["mean_diameter"].get<double>();
  const double clean_diam = doc["columns"][1]["mean_diameter"].get<double>();
  const bool table = fs::exists(first / "compare.md") && fs::file_size(first / "compare.md") > 0;
  return {table && files >= 8 && differing == 0 && cap_diam < clean_diam,
          "exit 0 twice, " + std::to_string(files) + " output files, " + std::to_string(differing) +
              " differ (must be 0); table written; cap diameter " + fmt("%.3f", cap_diam) + " < clean " +
              fmt("%.3f", clean_diam)};
}

// ---------------------------------------------------------------------------
// 7. For a two-class linear model, CE(x') = softplus((w_o - w_y).x' + b_o -
// b_y) is convex in x', so its maximum over the l-infinity box is attained at
// a vertex, and the signed gradient is the same at every point of the box.
// PGD therefore walks to the maximizing vertex once steps * alpha >= 2 eps.
Verdict attack_oracle() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t d = 1; d <= 10; ++d) {
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
      CounterRng rng(derive_seed(55, {d, rep}));
      oracle::Matrix w(2, std::vector<double>(d));
      for (auto& row : w)
        for (double& v : row) v = rng.uniform(-2, 2);
      const MlpModel lin = oracle::linear_model(w, {rng.uniform(-1, 1), rng.uniform(-1, 1)});
      const Tensor x = random_vector(d, rng, -1, 1);
      const std::size_t y = rng.below(2);
      const AttackConfig cfg{AttackKind::pgd, 0.1, 0.02, 20, true, std::nullopt, derive_seed(56, {d, rep})};
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& v : oracle::box_vertices(d, cfg.epsilon)) {
        best = std::max(best, oracle::ce_from_logits(oracle::naive_forward(lin, oracle::add(oracle::to_vec(x), v)), y));
      }
      worst = std::max(worst, std::abs(sample_loss(lin, pgd(lin, x, y, cfg), y) - best));
      ++cases;
    }
  }
  return {worst <= 1e-9, std::to_string(cases) + " linear models, d=1..10: max |CE(pgd) - max vertex CE| " +
                             fmt("%.2e", worst) + " (limit 1e-9)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <configs dir> <caplab binary>\n";
    return 2;
  }
  const fs::path configs = argv[1];
  const fs::path binary = fs::absolute(argv[2]);
  const fs::path scratch = fs::temp_directory_path() / "caplab_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const RunConfig presets[3] = {load_run_config(configs / "blobs_cap.cfg"),
                                load_run_config(configs / "blobs_clean.cfg"),
                                load_run_config(configs / "blobs_vanilla_at.cfg")};

  criterion(1, "gradient fidelity", 30, gradient_fidelity);
  criterion(2, "corner search vertex oracle", 10, corner_oracle);
  criterion(3, "feasibility and thread determinism", 600,
            [&] { return feasibility_and_determinism(binary, scratch / "corners"); });
  criterion(4, "lambda=0 reduces to clean training", 600, [&] { return lambda_zero(presets[0]); });

  std::vector<SeedResult> fixture;
  criterion(5, "confinement (diameter CAP < 0.7 x clean)", 300, [&] {
    run_fixture(presets, kCap, fixture);
    run_fixture(presets, kClean, fixture);
    const double cap = mean_of(fixture, &SeedResult::diameter, kCap);
    const double clean = mean_of(fixture, &SeedResult::diameter, kClean);
    return Verdict{cap < 0.7 * clean, "seed-averaged test diameter CAP " + fmt("%.4f", cap) + " vs clean " +
                                          fmt("%.4f", clean) + ", ratio " + fmt("%.3f", cap / clean) +
                                          " (limit < 0.7)"};
  });

  criterion(6, "robustness ordering under PGD-20", 600, [&] {
    // Reuses the CAP and clean runs of criterion 5 (same seeds and presets)
    // and adds vanilla AT; the shared runs still count toward the limit.
    std::vector<SeedResult>& full = fixture;
    run_fixture(presets, kAt, full);
    double shared = 0.0;
    for (const SeedResult& r : full) shared += r.train_seconds[kCap] + r.train_seconds[kClean];
    const double cap_rob = mean_of(full, &SeedResult::pgd20, kCap);
    const double clean_rob = mean_of(full, &SeedResult::pgd20, kClean);
    const double at_rob = mean_of(full, &SeedResult::pgd20, kAt);
    const double cap_acc = mean_of(full, &SeedResult::clean_acc, kCap);
    const double clean_acc = mean_of(full, &SeedResult::clean_acc, kClean);
    const double at_acc = mean_of(full, &SeedResult::clean_acc, kAt);
    const bool beats_clean = cap_rob - clean_rob >= 0.10;
    const bool matches_at = cap_rob >= at_rob && std::abs(cap_acc - at_acc) <= 0.02;
    const bool tradeoff = std::abs(cap_acc - clean_acc) <= 0.03;
    return Verdict{beats_clean && matches_at && tradeoff,
                   "PGD-20 robust % CAP " + pct(cap_rob) + " / clean " + pct(clean_rob) + " / vanilla AT " +
                       pct(at_rob) + "; clean % " + pct(cap_acc) + " / " + pct(clean_acc) + " / " + pct(at_acc) +
                       "; CAP - clean = " + fmt("%+.2f", 100 * (cap_rob - clean_rob)) + " pts (need >= +10) " +
                       (beats_clean ? "ok" : "MISSED") + ", CAP - AT = " + fmt("%+.2f", 100 * (cap_rob - at_rob)) +
                       " pts at clean gap " + fmt("%.2f", 100 * std::abs(cap_acc - at_acc)) + " (need >= 0 at <= 2) " +
                       (matches_at ? "ok" : "MISSED") + ", clean-accuracy gap " +
                       fmt("%.2f", 100 * std::abs(cap_acc - clean_acc)) + " pts (need <= 3) " +
                       (tradeoff ? "ok" : "MISSED"),
                   shared};
  });

  criterion(7, "PGD reaches the vertex-maximal loss on linear models", 10, attack_oracle);
  criterion(8, "end-to-end compare is reproducible", 600,
            [&] { return cli_compare(binary, configs, scratch / "compare"); });

  fs::remove_all(scratch);
  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
