#include "mieeg/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mieeg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "0,1|2,3|4,5" -> one channel list per class.
std::vector<std::vector<int>> parse_channel_groups(const std::string& v) {
  std::vector<std::vector<int>> groups;
  std::stringstream ss(v);
  std::string group;
  while (std::getline(ss, group, '|')) {
    std::vector<int> channels;
    std::stringstream gs(group);
    std::string item;
    while (std::getline(gs, item, ',')) {
      const std::string tok = trim(item);
      if (!tok.empty()) channels.push_back(std::stoi(tok));
    }
    groups.push_back(std::move(channels));
  }
  return groups;
}

std::string format_channel_groups(const std::vector<std::vector<int>>& groups) {
  std::string out;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (g) out += "|";
    for (size_t i = 0; i < groups[g].size(); ++i) {
      if (i) out += ",";
      out += std::to_string(groups[g][i]);
    }
  }
  return out;
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, const std::string& origin) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"n_classes", [&](const std::string& v) { cfg.synth.n_classes = std::stoi(v); }},
      {"n_channels", [&](const std::string& v) { cfg.synth.n_channels = std::stoi(v); }},
      {"n_samples", [&](const std::string& v) { cfg.synth.n_samples = std::stoi(v); }},
      {"fs", [&](const std::string& v) { cfg.synth.fs = std::stof(v); }},
      {"trials_per_class", [&](const std::string& v) { cfg.synth.trials_per_class = std::stoi(v); }},
      {"erd_depth", [&](const std::string& v) { cfg.synth.erd_depth = std::stof(v); }},
      {"noise_std", [&](const std::string& v) { cfg.synth.noise_std = std::stof(v); }},
      {"erd_channels", [&](const std::string& v) { cfg.synth.erd_channels = parse_channel_groups(v); }},
      {"window_length", [&](const std::string& v) { cfg.window.omega = std::stoi(v); }},
      {"window_step", [&](const std::string& v) { cfg.window.step = std::stoi(v); }},
      {"lr_ae", [&](const std::string& v) { cfg.train.lr_ae = std::stod(v); }},
      {"batch_ae", [&](const std::string& v) { cfg.train.batch_ae = std::stoi(v); }},
      {"lr_st", [&](const std::string& v) { cfg.train.lr_st = std::stod(v); }},
      {"batch_st", [&](const std::string& v) { cfg.train.batch_st = std::stoi(v); }},
      {"lambda", [&](const std::string& v) { cfg.train.lambda = std::stod(v); }},
      {"gamma", [&](const std::string& v) { cfg.train.gamma = std::stod(v); }},
      {"max_epochs", [&](const std::string& v) { cfg.train.max_epochs = std::stoi(v); }},
      {"patience", [&](const std::string& v) { cfg.train.patience = std::stoi(v); }},
      {"dropout", [&](const std::string& v) { cfg.train.dropout = std::stod(v); }},
      {"seed", [&](const std::string& v) { cfg.set_seed(std::stoull(v)); }},
      {"stgnn_input",
       [&](const std::string& v) {
         if (v == "features")
           cfg.train.stgnn_input = GraphInput::Features;
         else if (v == "latent")
           cfg.train.stgnn_input = GraphInput::Latent;
         else
           throw std::invalid_argument("stgnn_input must be 'features' or 'latent', got '" + v + "'");
       }},
      {"test_fraction", [&](const std::string& v) { cfg.test_fraction = std::stod(v); }},
      {"val_fraction", [&](const std::string& v) { cfg.val_fraction = std::stod(v); }},
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": bad value '" + value +
                                  "' for key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse(in, path);
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "# resolved run configuration\n";
  os << "n_classes = " << synth.n_classes << "\n";
  os << "n_channels = " << synth.n_channels << "\n";
  os << "n_samples = " << synth.n_samples << "\n";
  os << "fs = " << synth.fs << "\n";
  os << "trials_per_class = " << synth.trials_per_class << "\n";
  os << "erd_depth = " << synth.erd_depth << "\n";
  os << "noise_std = " << synth.noise_std << "\n";
  os << "erd_channels = " << format_channel_groups(synth.erd_channels) << "\n";
  os << "window_length = " << window.omega << "\n";
  os << "window_step = " << window.step << "\n";
  os << "lr_ae = " << train.lr_ae << "\n";
  os << "batch_ae = " << train.batch_ae << "\n";
  os << "lr_st = " << train.lr_st << "\n";
  os << "batch_st = " << train.batch_st << "\n";
  os << "lambda = " << train.lambda << "\n";
  os << "gamma = " << train.gamma << "\n";
  os << "max_epochs = " << train.max_epochs << "\n";
  os << "patience = " << train.patience << "\n";
  os << "dropout = " << train.dropout << "\n";
  os << "seed = " << train.seed << "\n";
  os << "stgnn_input = " << (train.stgnn_input == GraphInput::Latent ? "latent" : "features") << "\n";
  os << "test_fraction = " << test_fraction << "\n";
  os << "val_fraction = " << val_fraction << "\n";
  return os.str();
}

}  // namespace mieeg
