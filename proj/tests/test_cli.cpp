#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mieeg/commands.hpp"
#include "mieeg/model_io.hpp"

using namespace mieeg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Small, quick-to-train problem for command-level tests.
const char* kSmallConfig = R"(
# compact synthetic problem
n_channels = 8
n_samples = 250
trials_per_class = 10
erd_channels = 0,1|2,3|4,5|6,7
window_length = 125
window_step = 62
batch_st = 8
max_epochs = 3
patience = 5
seed = 7
)";

RunConfig small_config() {
  std::istringstream is(kSmallConfig);
  return RunConfig::parse(is, "<test>");
}

}  // namespace

TEST_CASE("config: defaults, comments, echo round trip") {
  std::istringstream empty("");
  auto cfg = RunConfig::parse(empty, "<empty>");
  CHECK(cfg.synth.n_channels == 22);
  CHECK(cfg.synth.trials_per_class == 72);
  CHECK(cfg.window.omega == 500);
  CHECK(cfg.window.step == 62);
  CHECK(cfg.train.lr_ae == 1e-3);
  CHECK(cfg.train.lr_st == 2e-4);
  CHECK(cfg.train.batch_st == 16);
  CHECK(cfg.train.lambda == 0.3);
  CHECK(cfg.train.gamma == 1.0);
  CHECK(cfg.train.max_epochs == 100);
  CHECK(cfg.train.dropout == 0.3);

  std::istringstream commented("  # just a comment\n\n seed = 99 # trailing\n");
  auto cfg2 = RunConfig::parse(commented, "<c>");
  CHECK(cfg2.train.seed == 99);
  CHECK(cfg2.synth.seed == 99);

  auto cfg3 = small_config();
  std::istringstream echoed(cfg3.echo());
  auto cfg4 = RunConfig::parse(echoed, "<echo>");
  CHECK(cfg4.echo() == cfg3.echo());
  CHECK(cfg4.synth.erd_channels == cfg3.synth.erd_channels);
}

TEST_CASE("config: unknown keys and malformed values are rejected by name") {
  std::istringstream bad("windw_length = 500\n");
  CHECK_THROWS_WITH_AS(RunConfig::parse(bad, "<t>"), doctest::Contains("windw_length"),
                       std::invalid_argument);
  std::istringstream noeq("seed 12\n");
  CHECK_THROWS_AS(RunConfig::parse(noeq, "<t>"), std::invalid_argument);
  std::istringstream badval("max_epochs = ten\n");
  CHECK_THROWS_WITH_AS(RunConfig::parse(badval, "<t>"), doctest::Contains("max_epochs"),
                       std::invalid_argument);
  std::istringstream badinput("stgnn_input = middle\n");
  CHECK_THROWS_AS(RunConfig::parse(badinput, "<t>"), std::invalid_argument);
}

TEST_CASE("gen-data: declared counts, deterministic bytes, unwritable path") {
  const auto dir = fresh_dir("mieeg_cli_gen");
  RunConfig cfg;  // defaults: 4 classes x 72 trials, 22 channels, 750 samples
  const auto a = dir / "a.epoc";
  const auto b = dir / "b.epoc";
  cmd_gen_data(cfg, a.string());
  cmd_gen_data(cfg, b.string());
  auto epochs = read_epochs(a.string());
  CHECK(epochs.n_trials == 288);
  CHECK(epochs.n_channels == 22);
  CHECK(epochs.n_samples == 750);
  CHECK(slurp(a) == slurp(b));

  CHECK_THROWS_AS(cmd_gen_data(cfg, (a / "nested" / "x.epoc").string()), std::exception);
}

TEST_CASE("train command writes every declared artifact with coherent contents") {
  const auto dir = fresh_dir("mieeg_cli_train");
  auto cfg = small_config();
  const auto data_path = dir / "epochs.epoc";
  cmd_gen_data(cfg, data_path.string());
  const auto out = dir / "run1";
  cmd_train(cfg, data_path.string(), out.string());

  for (const char* name : {"config_resolved.txt", "train.log", "metrics.json",
                           "adjacency_before.csv", "adjacency_after.csv", "edges_top10.csv",
                           "model.bin", "timing.txt"})
    CHECK(fs::exists(out / name));

  auto j = nlohmann::json::parse(slurp(out / "metrics.json"));
  for (const char* key : {"accuracy", "kappa", "macro_f1", "macro_auc", "confusion"})
    CHECK(j.contains(key));
  CHECK(j["confusion"].size() == 4);
  CHECK(j["confusion"][0].size() == 4);
  CHECK(j["param_count"].get<int64_t>() > 0);

  // Tab-separated epoch lines: index, train loss, val loss, val accuracy.
  std::istringstream log(slurp(out / "train.log"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), '\t') == 3);
  }
  CHECK(lines == j["epochs_run"].get<int>());

  // Adjacency CSV: square, zero diagonal, unit row sums.
  std::istringstream csv(slurp(out / "adjacency_before.csv"));
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string cell;
    int col = 0;
    double sum = 0;
    while (std::getline(ls, cell, ',')) {
      const double v = std::stod(cell);
      if (col == rows) CHECK(v == 0.0);
      sum += v;
      ++col;
    }
    CHECK(col == 8);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    ++rows;
  }
  CHECK(rows == 8);

  // 8 channels -> 28 pairs, so the edge list still has 10 rows.
  std::istringstream edges(slurp(out / "edges_top10.csv"));
  int edge_rows = 0;
  while (std::getline(edges, line)) ++edge_rows;
  CHECK(edge_rows == 10);

  // The echoed config parses back to the same resolved form.
  auto echoed = RunConfig::from_file((out / "config_resolved.txt").string());
  CHECK(echoed.echo() == cfg.echo());

  SUBCASE("a second run reproduces metrics and adjacency bytes") {
    const auto out2 = dir / "run2";
    cmd_train(cfg, data_path.string(), out2.string());
    CHECK(slurp(out / "metrics.json") == slurp(out2 / "metrics.json"));
    CHECK(slurp(out / "adjacency_before.csv") == slurp(out2 / "adjacency_before.csv"));
    CHECK(slurp(out / "adjacency_after.csv") == slurp(out2 / "adjacency_after.csv"));
    CHECK(slurp(out / "edges_top10.csv") == slurp(out2 / "edges_top10.csv"));
  }

  SUBCASE("eval reproduces the trained model's test metrics") {
    const auto eval_out = dir / "eval";
    cmd_eval(cfg, data_path.string(), (out / "model.bin").string(), eval_out.string());
    auto je = nlohmann::json::parse(slurp(eval_out / "metrics.json"));
    CHECK(je["accuracy"].get<double>() == j["accuracy"].get<double>());
    CHECK(je["kappa"].get<double>() == j["kappa"].get<double>());
  }

  SUBCASE("export-graph reproduces the trained adjacency artifacts") {
    const auto gout = dir / "graph";
    cmd_export_graph(cfg, data_path.string(), (out / "model.bin").string(), gout.string());
    CHECK(slurp(gout / "adjacency_after.csv") == slurp(out / "adjacency_after.csv"));
    CHECK(slurp(gout / "adjacency_before.csv") == slurp(out / "adjacency_before.csv"));
    CHECK(slurp(gout / "edges_top10.csv") == slurp(out / "edges_top10.csv"));
  }

  SUBCASE("model round trip preserves every tensor") {
    auto loaded = load_model((out / "model.bin").string());
    CHECK(loaded.dims.n_nodes == 8);
    CHECK(loaded.trainable_count(true) > 0);
    const auto reeval = dir / "eval2";
    cmd_eval(cfg, data_path.string(), (out / "model.bin").string(), reeval.string());
    CHECK(nlohmann::json::parse(slurp(reeval / "metrics.json"))["accuracy"] == j["accuracy"]);
  }
}

TEST_CASE("train rejects a malformed epoch file with a header diagnostic") {
  const auto dir = fresh_dir("mieeg_cli_badfile");
  const auto bad = dir / "bad.epoc";
  std::ofstream os(bad, std::ios::binary);
  os << "EPOC1";
  os.put('\0');
  os << "garbage";
  os.close();
  auto cfg = small_config();
  CHECK_THROWS_WITH_AS(cmd_train(cfg, bad.string(), (dir / "out").string()),
                       doctest::Contains("header"), std::runtime_error);
}

TEST_CASE("sweep marks impossible cells invalid and keeps the 3x3 grid") {
  const auto dir = fresh_dir("mieeg_cli_sweep");
  auto cfg = small_config();
  cfg.synth.n_samples = 130;  // only the 125-sample row can run
  cfg.synth.trials_per_class = 8;
  cfg.train.max_epochs = 2;
  const auto data_path = dir / "short.epoc";
  cmd_gen_data(cfg, data_path.string());
  cmd_sweep(cfg, data_path.string(), (dir / "sweep").string());

  std::istringstream csv(slurp(dir / "sweep" / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "omega\\step,62,125,250");
  int data_rows = 0, invalid_cells = 0, valid_cells = 0;
  while (std::getline(csv, line)) {
    ++data_rows;
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // omega label
    while (std::getline(ls, cell, ',')) {
      if (cell == "invalid")
        ++invalid_cells;
      else {
        const double acc = std::stod(cell);
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
        ++valid_cells;
      }
    }
  }
  CHECK(data_rows == 3);
  CHECK(valid_cells == 3);
  CHECK(invalid_cells == 6);

  // Shared data file and per-cell derived seeds: a rerun reproduces the grid.
  cmd_sweep(cfg, data_path.string(), (dir / "sweep2").string());
  CHECK(slurp(dir / "sweep" / "sweep.csv") == slurp(dir / "sweep2" / "sweep.csv"));
}

TEST_CASE("ablation command emits the four-variant table on a shared split") {
  const auto dir = fresh_dir("mieeg_cli_ablate");
  auto cfg = small_config();
  cfg.train.max_epochs = 2;
  const auto data_path = dir / "epochs.epoc";
  cmd_gen_data(cfg, data_path.string());
  cmd_ablate(cfg, data_path.string(), (dir / "ablate").string());

  std::istringstream csv(slurp(dir / "ablate" / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "variant,description,params,accuracy,kappa,macro_f1,macro_auc,split_hash");
  std::vector<std::string> ids;
  std::vector<std::string> hashes;
  std::vector<int64_t> params;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    ids.push_back(cell);
    std::getline(ls, cell, ',');  // quoted description
    std::getline(ls, cell, ',');
    params.push_back(std::stoll(cell));
    for (int skip = 0; skip < 4; ++skip) std::getline(ls, cell, ',');
    std::getline(ls, cell, ',');
    hashes.push_back(cell);
  }
  CHECK(ids == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(params[0] == params[3]);  // A and D share the same structure
  for (const auto& h : hashes) CHECK(h == hashes[0]);
}
