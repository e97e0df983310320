// Reusable command implementations behind the CLI subcommands. Each writes
// its declared outputs and throws on failure; gradcheck returns nonzero when
// a layer misses the tolerance.
#pragma once

#include <string>

#include "mieeg/config.hpp"

namespace mieeg {

// Writes the synthetic epoch file and prints the trial/channel/sample counts.
void cmd_gen_data(const RunConfig& cfg, const std::string& out_path);

// Reference -> window -> features -> scale -> split -> train -> evaluate.
// Writes config_resolved.txt, train.log, metrics.json, adjacency_before.csv,
// adjacency_after.csv, edges_top10.csv, model.bin and timing.txt.
void cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir);

// Evaluates a saved model on the configured test split; writes metrics.json
// when an output directory is given and prints it either way.
void cmd_eval(const RunConfig& cfg, const std::string& data_path, const std::string& model_path,
              const std::string& out_dir);

// 3x3 window-length / step grid with per-cell derived seeds; cells whose
// window exceeds the trial length are marked invalid and skipped.
void cmd_sweep(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir);

// Trains and evaluates the four model variants on identical splits.
void cmd_ablate(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir);

// Per-operation and composite central-difference checks at double precision
// on a small model; returns the number of failing rows.
int cmd_gradcheck(double threshold = 1e-4);

// Re-derives the initial adjacency from the data and exports it next to the
// trained one, plus the largest connectivity changes.
void cmd_export_graph(const RunConfig& cfg, const std::string& data_path,
                      const std::string& model_path, const std::string& out_dir);

// Masked row softmax of a square matrix (diagonal excluded from the support).
std::vector<double> masked_row_softmax_values(const std::vector<double>& raw, int n);

}  // namespace mieeg
