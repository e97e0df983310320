// Binary model container: dimensions, variant, every trainable tensor by
// name, and the batch-norm running statistics.
#pragma once

#include <string>

#include "mieeg/model.hpp"

namespace mieeg {

void save_model(const std::string& path, const Model<float>& m);
Model<float> load_model(const std::string& path);

}  // namespace mieeg
