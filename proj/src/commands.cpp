#include "caplab/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "caplab/errors.hpp"
#include "caplab/experiment.hpp"
#include "caplab/model_io.hpp"
#include "caplab/random.hpp"
#include "caplab/svg.hpp"

namespace caplab::cli {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Sidecar for everything that varies between identical runs.
class RunLog {
 public:
  explicit RunLog(const fs::path& path) : out_(path, std::ios::app) {}
  void line(const std::string& text) {
    if (out_) out_ << timestamp() << ' ' << text << '\n';
  }

 private:
  std::ofstream out_;
};

std::size_t pick_threads(std::optional<std::size_t> flag, std::size_t fallback) {
  if (flag) return *flag;
  if (auto env = threads_from_env()) return *env;
  return fallback;
}

RunConfig with_overrides(RunConfig cfg, std::optional<std::uint64_t> seed, std::optional<std::size_t> threads) {
  if (seed) cfg.seed = *seed;
  cfg.threads = pick_threads(threads, cfg.threads);
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  return cfg;
}

void write_training_outputs(const fs::path& dir, TrainResult& trained, RunLog& log) {
  fs::create_directories(dir);
  const fs::path checkpoint = dir / "model.json";
  trained.report.checkpoint = "model.json";
  save_model(trained.model, checkpoint);
  write_text(dir / "report.json", report_to_json(trained.report).dump(2) + "\n");
  write_text(dir / "history.csv", history_csv(trained.report));
  for (const EpochRecord& r : trained.report.history) {
    log.line(dir.string() + " epoch " + std::to_string(r.epoch) + " wall_seconds " + format_fixed(r.wall_seconds, 3));
  }
}

Dataset load_source(const DataSource& src, std::optional<std::uint64_t> seed, RunConfig* cfg_out) {
  if (src.config && src.csv) throw ContractViolation("give either --config or --data, not both");
  if (src.config) {
    RunConfig cfg = load_run_config(*src.config);
    if (seed) cfg.seed = *seed;
    PreparedData data = prepare_data(cfg.data, cfg.seed);
    if (cfg_out) *cfg_out = cfg;
    return std::move(data.test);
  }
  if (src.csv) {
    return load_csv(*src.csv, CsvSchema{src.label_column, src.header,
                                        src.minmax ? FeatureScaling::minmax_to_unit : FeatureScaling::none,
                                        std::nullopt});
  }
  throw ContractViolation("no samples given: use --config or --data");
}

MlpModel load_checkpoint(const fs::path& path) { return load_model(path); }

AttackConfig parse_attack_flag(const std::string& spec, const EvalOptions& opts, double default_eps) {
  AttackConfig a;
  a.epsilon = opts.epsilon.value_or(default_eps);
  a.step_size = opts.step_size;
  a.random_start = opts.random_start;
  a.input_clip = opts.clip;
  if (spec == "fgsm") {
    a.kind = AttackKind::fgsm;
    a.steps = 1;
  } else if (spec.rfind("pgd-", 0) == 0 || spec == "pgd") {
    a.kind = AttackKind::pgd;
    a.steps = 20;
    if (spec != "pgd") {
      const std::string count = spec.substr(4);
      if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos) {
        throw ContractViolation("bad attack '" + spec + "' (expected fgsm or pgd-<steps>)");
      }
      a.steps = std::stoul(count);
    }
  } else {
    throw ContractViolation("unknown attack '" + spec + "' (expected fgsm or pgd-<steps>)");
  }
  a.validate();
  return a;
}

}  // namespace

std::optional<std::size_t> threads_from_env() {
  const char* value = std::getenv("CAP_LAB_THREADS");
  if (!value || !*value) return std::nullopt;
  char* end = nullptr;
  const unsigned long n = std::strtoul(value, &end, 10);
  if (*end != '\0') return std::nullopt;
  return static_cast<std::size_t>(n);
}

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = with_overrides(load_run_config(opts.config), opts.seed, opts.threads);
    const fs::path dir = opts.out.value_or(cfg.out);
    fs::create_directories(dir);
    RunLog log(dir / "run.log");
    log.line("train " + opts.config.string() + " seed " + std::to_string(cfg.seed));

    RunOutcome outcome = run_training(cfg);
    write_training_outputs(dir, outcome.trained, log);
    const auto& history = outcome.trained.report.history;
    out << "trained " << cfg.name << " (" << to_string(cfg.train.trainer) << ") for " << history.size()
        << " epochs";
    if (!history.empty()) out << ", final train accuracy " << format_fixed(100.0 * history.back().clean_acc, 2) << "%";
    out << "\nwrote " << (dir / "model.json").string() << ", " << (dir / "report.json").string() << ", "
        << (dir / "history.csv").string() << '\n';
    log.line("done");
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const MlpModel model = load_checkpoint(opts.checkpoint);
    RunConfig cfg;
    cfg.seed = 0;
    const bool from_config = opts.data.config.has_value();
    const Dataset data = load_source(opts.data, opts.seed, from_config ? &cfg : nullptr);
    if (data.dim() != model.input_dim() || data.class_count > model.output_dim()) {
      throw ContractViolation("dataset does not fit the checkpoint's input/output sizes");
    }
    const std::uint64_t seed = opts.seed.value_or(cfg.seed);

    std::vector<AttackConfig> attacks;
    if (opts.attacks.empty()) {
      if (!from_config) throw ContractViolation("no attacks given: use --attack or a config with [attack] sections");
      attacks = cfg.attacks;
      for (AttackConfig& a : attacks) {
        if (opts.epsilon) a.epsilon = *opts.epsilon;
        if (opts.clip) a.input_clip = opts.clip;
      }
    } else {
      const double default_eps = from_config ? cfg.train.polytope.budget.epsilon : 8.0 / 255.0;
      for (const std::string& spec : opts.attacks) attacks.push_back(parse_attack_flag(spec, opts, default_eps));
    }

    const std::size_t threads = pick_threads(opts.threads, from_config ? cfg.threads : 1);
    const EvalSummary summary = evaluate(model, data, attacks, CornerSearchConfig{}, seed, threads, false);

    nlohmann::json results = nlohmann::json::array();
    for (const AttackResult& r : summary.attacks) results.push_back(attack_result_json(r, summary.n_samples));
    const nlohmann::json doc = {{"checkpoint", opts.checkpoint.string()},
                                {"n_samples", summary.n_samples},
                                {"clean_accuracy", summary.clean_accuracy},
                                {"seed", seed},
                                {"results", results}};
    fs::create_directories(opts.out);
    write_text(opts.out / "eval.json", doc.dump(2) + "\n");

    out << "clean      " << format_fixed(100.0 * summary.clean_accuracy, 2) << "%  (" << summary.n_samples
        << " samples)\n";
    for (const AttackResult& r : summary.attacks) {
      out << std::left << std::setw(10) << r.config.label() << " " << format_fixed(100.0 * r.accuracy, 2)
          << "%  eps=" << r.config.epsilon << '\n';
    }
    out << "wrote " << (opts.out / "eval.json").string() << '\n';
    return kExitOk;
  });
}

nlohmann::json estimate_to_json(const CornerSearchResult& result, const CornerSearchConfig& cfg) {
  auto vec = [](const Tensor& t) { return std::vector<double>(t.values().begin(), t.values().end()); };
  nlohmann::json particles = nlohmann::json::array();
  nlohmann::json corners = nlohmann::json::array();
  for (const Tensor& p : result.particles.particles) particles.push_back(vec(p));
  for (const Tensor& c : result.estimate.corners) corners.push_back(vec(c));
  const auto& est = result.estimate;
  nlohmann::json clip = nullptr;
  if (cfg.budget.input_clip) clip = {cfg.budget.input_clip->lo, cfg.budget.input_clip->hi};
  return {{"epsilon", cfg.budget.epsilon},
          {"norm", "linf"},
          {"input_clip", clip},
          {"n_particles", cfg.n_particles},
          {"steps", cfg.steps},
          {"eta", cfg.eta},
          {"seed", cfg.seed},
          {"particles", particles},
          {"corners", corners},
          {"center", vec(est.center)},
          {"distances", est.distances},
          {"diameter", est.diameter},
          {"objective_history", est.objective_history}};
}

int cmd_corners(const CornersOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const MlpModel model = load_checkpoint(opts.checkpoint);

    RunConfig cfg;
    CornerSearchConfig search;
    Tensor x;
    nlohmann::json origin;
    if (opts.input) {
      if (opts.data.config || opts.data.csv) throw ContractViolation("give either --input or a data source");
      x = Tensor::vector(*opts.input);
      origin = {{"input", *opts.input}};
    } else {
      const bool from_config = opts.data.config.has_value();
      const Dataset data = load_source(opts.data, opts.seed, from_config ? &cfg : nullptr);
      if (from_config) search = cfg.train.polytope;
      const std::size_t index = opts.index.value_or(0);
      if (index >= data.size()) {
        throw ContractViolation("sample index " + std::to_string(index) + " out of range (dataset has " +
                                std::to_string(data.size()) + " samples)");
      }
      x = data.sample(index);
      origin = {{"sample_index", index}, {"label", data.labels[index]}};
    }
    if (x.size() != model.input_dim()) {
      throw ContractViolation("sample has " + std::to_string(x.size()) + " features, checkpoint expects " +
                              std::to_string(model.input_dim()));
    }
    if (opts.epsilon) search.budget.epsilon = *opts.epsilon;
    if (opts.particles) search.n_particles = *opts.particles;
    if (opts.steps) search.steps = *opts.steps;
    if (opts.eta) search.eta = *opts.eta;
    if (opts.clip) search.budget.input_clip = opts.clip;
    search.seed = opts.seed.value_or(cfg.seed);
    search.threads = pick_threads(opts.threads, opts.data.config ? cfg.threads : 1);

    const CornerSearchResult result = find_corners(model, x, search);
    nlohmann::json doc = estimate_to_json(result, search);
    doc["sample"] = origin;
    doc["x"] = std::vector<double>(x.values().begin(), x.values().end());
    fs::create_directories(opts.out);
    write_text(opts.out / "estimate.json", doc.dump(2) + "\n");
    out << "diameter " << result.estimate.diameter << " over " << search.n_particles << " corners\n";
    out << "wrote " << (opts.out / "estimate.json").string() << '\n';

    const std::size_t classes = model.output_dim();
    if (classes == 2 || classes == 3) {
      const std::string note =
          classes == 3 ? "3 logits: projected onto the first two logit axes" : std::string();
      write_text(opts.out / "corners.svg", corners_svg(result.estimate, note));
      out << "wrote " << (opts.out / "corners.svg").string() << '\n';
    } else {
      err << "warning: " << classes << " logits; scatter plot is only written for 2 or 3 classes\n";
    }
    return kExitOk;
  });
}

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig a = with_overrides(load_run_config(opts.config_a), opts.seed, opts.threads);
    RunConfig b = load_run_config(opts.config_b);
    b = with_overrides(std::move(b), a.seed, a.threads);
    if (!(a.data == b.data)) {
      throw ContractViolation("configs describe different datasets; compare needs identical [data] sections");
    }
    const fs::path dir = opts.out.value_or(a.out);
    fs::create_directories(dir);
    RunLog log(dir / "run.log");
    log.line("compare " + opts.config_a.string() + " vs " + opts.config_b.string() + " seed " +
             std::to_string(a.seed));

    const PreparedData data = prepare_data(a.data, a.seed);
    struct Column {
      const RunConfig* cfg;
      std::string subdir;
      bool complete = false;
      std::string error;
      EvalSummary summary;
    };
    std::vector<Column> columns(2);
    columns[0].cfg = &a;
    columns[0].subdir = "a";
    columns[1].cfg = &b;
    columns[1].subdir = "b";
    for (Column& col : columns) {
      try {
        RunOutcome outcome = run_training(*col.cfg);
        write_training_outputs(dir / col.subdir, outcome.trained, log);
        col.summary = evaluate(outcome.trained.model, data.test, a.attacks, a.train.polytope, a.seed, a.threads);
        col.complete = true;
      } catch (const NumericError& e) {
        col.error = e.what();
        err << "numeric failure in " << col.cfg->name << ": " << e.what() << '\n';
      }
    }

    std::string md = "| metric |";
    std::string rule = "|---|";
    for (const Column& col : columns) {
      md += " " + col.cfg->name + " |";
      rule += "---|";
    }
    md += "\n" + rule + "\n";
    auto row = [&](const std::string& label, auto&& cell) {
      md += "| " + label + " |";
      for (const Column& col : columns) md += " " + (col.complete ? cell(col) : std::string("incomplete")) + " |";
      md += "\n";
    };
    row("trainer", [](const Column& c) { return std::string(to_string(c.cfg->train.trainer)); });
    row("clean accuracy (%)", [](const Column& c) { return format_fixed(100.0 * c.summary.clean_accuracy, 2); });
    for (std::size_t i = 0; i < a.attacks.size(); ++i) {
      row(a.attacks[i].label() + " accuracy (%)",
          [i](const Column& c) { return format_fixed(100.0 * c.summary.attacks[i].accuracy, 2); });
    }
    row("mean diameter", [](const Column& c) { return format_fixed(c.summary.mean_diameter, 4); });
    md += "\nShared seed " + std::to_string(a.seed) + "; " + std::to_string(data.test.size()) +
          " test samples; attacks at epsilon " + format_fixed(a.train.polytope.budget.epsilon, 4) +
          "; corner search N=" + std::to_string(a.train.polytope.n_particles) +
          ", T=" + std::to_string(a.train.polytope.steps) + ".\n";

    nlohmann::json jcols = nlohmann::json::array();
    for (const Column& col : columns) {
      nlohmann::json jc = {{"name", col.cfg->name},
                           {"config", col.cfg->source.string()},
                           {"trainer", to_string(col.cfg->train.trainer)},
                           {"status", col.complete ? "complete" : "incomplete"},
                           {"output_dir", col.subdir}};
      if (col.complete) {
        nlohmann::json results = nlohmann::json::array();
        for (const AttackResult& r : col.summary.attacks) results.push_back(attack_result_json(r, col.summary.n_samples));
        jc["clean_accuracy"] = col.summary.clean_accuracy;
        jc["attacks"] = results;
        jc["mean_diameter"] = col.summary.mean_diameter;
      } else {
        jc["error"] = col.error;
      }
      jcols.push_back(jc);
    }
    const nlohmann::json doc = {{"seed", a.seed}, {"n_test", data.test.size()}, {"columns", jcols}};
    write_text(dir / "compare.md", md);
    write_text(dir / "compare.json", doc.dump(2) + "\n");
    out << md << "wrote " << (dir / "compare.md").string() << " and " << (dir / "compare.json").string() << '\n';
    log.line("done");

    const bool all_complete = columns[0].complete && columns[1].complete;
    return all_complete ? kExitOk : kExitNumeric;
  });
}

}  // namespace caplab::cli
