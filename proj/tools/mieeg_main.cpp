// Command-line entry point wiring data generation, training, evaluation,
// the window sweep, the ablation suite, gradient checking and connectivity
// export into reproducible runs.
#include <CLI11.hpp>

#include <iostream>

#include "mieeg/commands.hpp"

namespace {

mieeg::RunConfig load_config(const std::string& config_path, bool has_seed, uint64_t seed) {
  mieeg::RunConfig cfg;
  if (!config_path.empty()) cfg = mieeg::RunConfig::from_file(config_path);
  if (has_seed) cfg.set_seed(seed);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motor-imagery EEG graph classifier"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, model_path;
  uint64_t seed = 0;
  bool has_seed = false;
  auto add_common = [&](CLI::App* sub, bool needs_data, bool needs_out, bool needs_model = false) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--seed", seed, "override the configured seed")->each([&](const std::string&) {
      has_seed = true;
    });
    if (needs_data) sub->add_option("--data", data_path, "EPOC1 epoch file")->required();
    if (needs_out) sub->add_option("--out", out_path, "output directory")->required();
    if (needs_model) sub->add_option("--model", model_path, "trained model file")->required();
  };

  auto* gen = app.add_subcommand("gen-data", "write a synthetic epoch file");
  gen->add_option("--config", config_path, "key = value configuration file");
  gen->add_option("--seed", seed, "override the configured seed")->each([&](const std::string&) {
    has_seed = true;
  });
  gen->add_option("--out", out_path, "output epoch file path")->required();

  auto* train = app.add_subcommand("train", "train and evaluate the full model");
  add_common(train, true, true);
  auto* eval = app.add_subcommand("eval", "evaluate a saved model on the test split");
  eval->add_option("--config", config_path, "key = value configuration file");
  eval->add_option("--seed", seed, "override the configured seed")->each([&](const std::string&) {
    has_seed = true;
  });
  eval->add_option("--data", data_path, "EPOC1 epoch file")->required();
  eval->add_option("--model", model_path, "trained model file")->required();
  eval->add_option("--out", out_path, "optional output directory");
  auto* sweep = app.add_subcommand("sweep", "window-length / step grid");
  add_common(sweep, true, true);
  auto* ablate = app.add_subcommand("ablate", "four-variant ablation table");
  add_common(ablate, true, true);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  auto* export_graph = app.add_subcommand("export-graph", "adjacency matrices and edge deltas");
  add_common(export_graph, true, true, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      mieeg::cmd_gen_data(load_config(config_path, has_seed, seed), out_path);
    } else if (train->parsed()) {
      mieeg::cmd_train(load_config(config_path, has_seed, seed), data_path, out_path);
    } else if (eval->parsed()) {
      mieeg::cmd_eval(load_config(config_path, has_seed, seed), data_path, model_path, out_path);
    } else if (sweep->parsed()) {
      mieeg::cmd_sweep(load_config(config_path, has_seed, seed), data_path, out_path);
    } else if (ablate->parsed()) {
      mieeg::cmd_ablate(load_config(config_path, has_seed, seed), data_path, out_path);
    } else if (gradcheck->parsed()) {
      return mieeg::cmd_gradcheck() == 0 ? 0 : 1;
    } else if (export_graph->parsed()) {
      mieeg::cmd_export_graph(load_config(config_path, has_seed, seed), data_path, model_path, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
