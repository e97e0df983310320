#include "mieeg/model_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mieeg {

namespace {

constexpr char kMagic[6] = {'M', 'I', 'M', 'D', '1', '\0'};

template <typename V>
void put(std::ofstream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
void get(std::ifstream& is, V& v, const std::string& path) {
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw std::runtime_error("truncated model file: " + path);
}

void put_vec(std::ofstream& os, const std::vector<float>& v) {
  put(os, static_cast<uint32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}

std::vector<float> get_vec(std::ifstream& is, const std::string& path) {
  uint32_t n = 0;
  get(is, n, path);
  std::vector<float> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n) * 4);
  if (!is) throw std::runtime_error("truncated model file: " + path);
  return v;
}

}  // namespace

void save_model(const std::string& path, const Model<float>& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  const int32_t dims[7] = {m.dims.n_features, m.dims.n_nodes,     m.dims.n_classes, m.dims.growth,
                           m.dims.dense_layers, m.dims.latent, m.dims.gc_hidden};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  put(os, static_cast<uint8_t>(m.variant));
  put(os, static_cast<uint8_t>(m.graph_input));

  const auto groups = {&m.ae_group, &m.st_group};
  uint32_t n_tensors = 0;
  for (const auto* g : groups) n_tensors += static_cast<uint32_t>(g->size());
  put(os, n_tensors);
  for (const auto* g : groups)
    for (const auto& p : *g) {
      put(os, static_cast<uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put_vec(os, p.tensor->data);
    }

  auto& states = const_cast<Model<float>&>(m);
  auto bn = states.bn_states();
  put(os, static_cast<uint32_t>(bn.size()));
  for (auto* st : bn) {
    put_vec(os, st->running_mean);
    put_vec(os, st->running_var);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Model<float> load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad magic: " + path + " is not a model file");
  int32_t d[7];
  is.read(reinterpret_cast<char*>(d), sizeof(d));
  if (!is) throw std::runtime_error("truncated model file: " + path);
  uint8_t variant = 0, graph_input = 0;
  get(is, variant, path);
  get(is, graph_input, path);

  ModelDims dims;
  dims.n_features = d[0];
  dims.n_nodes = d[1];
  dims.n_classes = d[2];
  dims.growth = d[3];
  dims.dense_layers = d[4];
  dims.latent = d[5];
  dims.gc_hidden = d[6];

  // Seeded placeholder values; every tensor is overwritten from the file.
  std::vector<double> zero_adj(static_cast<size_t>(dims.n_nodes) * dims.n_nodes, 0.0);
  auto m = init_model<float>(dims, static_cast<ModelVariant>(variant),
                             static_cast<GraphInput>(graph_input), zero_adj, 0);

  uint32_t n_tensors = 0;
  get(is, n_tensors, path);
  std::vector<NamedParam<float>*> by_order;
  for (auto& p : m.ae_group) by_order.push_back(&p);
  for (auto& p : m.st_group) by_order.push_back(&p);
  if (n_tensors != by_order.size())
    throw std::runtime_error("model file " + path + " carries " + std::to_string(n_tensors) +
                             " tensors, expected " + std::to_string(by_order.size()));
  for (auto* p : by_order) {
    uint32_t len = 0;
    get(is, len, path);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw std::runtime_error("truncated model file: " + path);
    if (name != p->name)
      throw std::runtime_error("model file " + path + ": tensor '" + name + "' does not match '" +
                               p->name + "'");
    auto values = get_vec(is, path);
    if (values.size() != p->tensor->data.size())
      throw std::runtime_error("model file " + path + ": size mismatch for '" + name + "'");
    p->tensor->data = std::move(values);
  }

  uint32_t n_bn = 0;
  get(is, n_bn, path);
  auto bn = m.bn_states();
  if (n_bn != bn.size())
    throw std::runtime_error("model file " + path + ": batch-norm state count mismatch");
  for (auto* st : bn) {
    st->running_mean = get_vec(is, path);
    st->running_var = get_vec(is, path);
  }
  return m;
}

}  // namespace mieeg
