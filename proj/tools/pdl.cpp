// pdl: data generation, training, evaluation, separability analysis and
// gradient self-check for the proxy-decidability toolkit.

#include <spdlog/spdlog.h>

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "pdl/error.hpp"

int main(int argc, char** argv) {
  using namespace pdl::cli;

  CLI::App app{"Proxy-decidability metric learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides per-command seeds)");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Output directory");
  app.add_flag("--quiet", global.quiet, "Suppress progress output");

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic spherical-cluster dataset");
  gen_cmd->add_option("--classes", gen.classes, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Samples per class")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--sigma", gen.sigma, "Per-coordinate noise std")->capture_default_str();
  std::string gen_out;
  gen_cmd->add_option("--out", gen_out, "Output directory (default: --out-dir or ./data)");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train from an experiment file");
  train_cmd->add_option("experiment", train.experiment, "Experiment JSON file")->required();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@K of a checkpoint on a dataset");
  auto add_eval_options = [](CLI::App* cmd, EvalOptions& o, std::string& out) {
    cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    cmd->add_option("--features", o.features, "Features (CSV or PDL1)")->required();
    cmd->add_option("--labels", o.labels, "Labels CSV")->required();
    cmd->add_option("--k", o.k_values, "Recall cut-offs")->delimiter(',')->capture_default_str();
    cmd->add_option("--out", out, "Also write the JSON report here");
  };
  std::string eval_out;
  add_eval_options(eval_cmd, eval, eval_out);

  AnalyzeOptions analyze;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Genuine/impostor distance distributions and d'");
  std::string analyze_out;
  add_eval_options(analyze_cmd, analyze.eval, analyze_out);
  analyze_cmd->add_option("--bins", analyze.bins, "Histogram bins")->capture_default_str();
  analyze_cmd->add_option("--range", analyze.range, "Histogram range: lo hi")
      ->expected(2)
      ->capture_default_str();

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every op and loss");
  grad_cmd->add_option("--tolerance", grad.tolerance, "Max relative error")->capture_default_str();
  grad_cmd->add_option("--seeds", grad.seeds, "Random instances per check")->capture_default_str();
  grad_cmd->add_option("--step", grad.step, "Finite-difference step h")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (global.quiet) spdlog::set_level(spdlog::level::err);
  if (*seed_opt) global.seed = seed;
  if (*out_opt) global.out_dir = out_dir;

  try {
    if (*gen_cmd) {
      if (global.seed) gen.seed = *global.seed;
      gen.out = !gen_out.empty() ? std::filesystem::path(gen_out)
                                 : global.out_dir.value_or(std::filesystem::path("data"));
      return cmd_gen_data(gen, global);
    }
    if (*train_cmd) return cmd_train(train, global);
    if (*eval_cmd) {
      if (!eval_out.empty()) eval.out = eval_out;
      return cmd_eval(eval, global);
    }
    if (*analyze_cmd) {
      if (!analyze_out.empty()) analyze.eval.out = analyze_out;
      return cmd_analyze(analyze, global);
    }
    if (*grad_cmd) {
      if (global.seed) grad.seed = *global.seed;
      return cmd_gradcheck(grad, global);
    }
  } catch (const pdl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
