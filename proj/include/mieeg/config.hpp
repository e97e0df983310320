// Flat key = value run configuration ('#' comments). Unknown keys are
// rejected; missing keys take the documented defaults; the resolved form is
// echoed into every output directory.
#pragma once

#include <iosfwd>
#include <string>

#include "mieeg/data.hpp"
#include "mieeg/training.hpp"

namespace mieeg {

struct RunConfig {
  SyntheticSpec synth = SyntheticSpec::defaults();
  WindowConfig window;  // 500 / 62
  TrainConfig train;
  double test_fraction = 0.2;
  double val_fraction = 0.2;

  // Applies the shared seed to both the generator and the training loop.
  void set_seed(uint64_t seed) {
    synth.seed = seed;
    train.seed = seed;
  }

  static RunConfig parse(std::istream& in, const std::string& origin);
  static RunConfig from_file(const std::string& path);

  // Fully-resolved key = value listing, parseable by from_file.
  std::string echo() const;
};

}  // namespace mieeg
