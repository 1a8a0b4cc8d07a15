#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caplab/commands.hpp"

namespace {

std::optional<caplab::InputClip> clip_from(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return caplab::InputClip{values[0], values[1]};
}

void add_data_source(CLI::App* cmd, caplab::cli::DataSource& src) {
  cmd->add_option("--config", src.config, "Run config; samples come from its test split");
  cmd->add_option("--data", src.csv, "CSV file with samples");
  cmd->add_option("--label-column", src.label_column, "CSV label column (name or index; default last)");
  cmd->add_flag("!--no-header", src.header, "CSV has no header row");
  cmd->add_flag("--minmax", src.minmax, "Min-max scale CSV features to [0, 1]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caplab: corner-confined adversarial training on small networks"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the global seed");
    cmd->add_option("--threads", threads, "Worker threads (0 = auto); never changes results");
  };

  caplab::cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  train_cmd->add_option("--config", train.config, "Run config")->required();
  train_cmd->add_option("--out", train.out, "Output directory (default: config 'out')");
  common(train_cmd);

  caplab::cli::EvalOptions eval;
  std::vector<double> eval_clip;
  bool eval_no_random_start = false;
  auto* eval_cmd = app.add_subcommand("eval", "Clean and robust accuracy of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint JSON")->required();
  add_data_source(eval_cmd, eval.data);
  eval_cmd->add_option("--attack", eval.attacks, "fgsm, pgd-<steps> (repeatable)");
  eval_cmd->add_option("--epsilon", eval.epsilon, "Perturbation budget (l-inf)");
  eval_cmd->add_option("--alpha", eval.step_size, "PGD step size");
  eval_cmd->add_flag("--no-random-start", eval_no_random_start, "Start PGD at the clean sample");
  eval_cmd->add_option("--clip", eval_clip, "Input domain lo hi")->expected(2);
  eval_cmd->add_option("--out", eval.out, "Output directory");
  common(eval_cmd);

  caplab::cli::CornersOptions corners;
  std::vector<double> corners_clip;
  auto* corners_cmd = app.add_subcommand("corners", "Estimate polytope corners for one sample");
  corners_cmd->add_option("--checkpoint", corners.checkpoint, "Model checkpoint JSON")->required();
  add_data_source(corners_cmd, corners.data);
  corners_cmd->add_option("--index", corners.index, "Sample index in the data source");
  corners_cmd->add_option("--input", corners.input, "Explicit sample values")->delimiter(',');
  corners_cmd->add_option("--epsilon", corners.epsilon, "Perturbation budget (l-inf)");
  corners_cmd->add_option("--particles", corners.particles, "Number of particles N");
  corners_cmd->add_option("--steps", corners.steps, "Outer iterations T");
  corners_cmd->add_option("--eta", corners.eta, "Ascent step size");
  corners_cmd->add_option("--clip", corners_clip, "Input domain lo hi")->expected(2);
  corners_cmd->add_option("--out", corners.out, "Output directory");
  common(corners_cmd);

  caplab::cli::CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "Train two configs and tabulate their robustness");
  compare_cmd->add_option("config_a", compare.config_a, "First run config")->required();
  compare_cmd->add_option("config_b", compare.config_b, "Second run config")->required();
  compare_cmd->add_option("--out", compare.out, "Output directory (default: first config 'out')");
  common(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : caplab::cli::kExitUsage;
  }

  if (train_cmd->parsed()) {
    train.seed = seed;
    train.threads = threads;
    return caplab::cli::cmd_train(train, std::cout, std::cerr);
  }
  if (eval_cmd->parsed()) {
    eval.seed = seed;
    eval.threads = threads;
    eval.random_start = !eval_no_random_start;
    eval.clip = clip_from(eval_clip);
    return caplab::cli::cmd_eval(eval, std::cout, std::cerr);
  }
  if (corners_cmd->parsed()) {
    corners.seed = seed;
    corners.threads = threads;
    corners.clip = clip_from(corners_clip);
    return caplab::cli::cmd_corners(corners, std::cout, std::cerr);
  }
  compare.seed = seed;
  compare.threads = threads;
  return caplab::cli::cmd_compare(compare, std::cout, std::cerr);
}
