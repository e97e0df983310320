// The two-branch classifier: a dense-block convolutional autoencoder with an
// auxiliary classifier head, and a graph branch over a learnable masked
// adjacency with graph convolutions, a bidirectional recurrence across the
// channel axis and attention pooling.
#pragma once

#include <array>
#include <string>

#include "mieeg/ops.hpp"
#include "mieeg/rng.hpp"

namespace mieeg {

struct ModelDims {
  int n_features = 18;  // per-channel feature count F
  int n_nodes = 22;     // EEG channels = graph nodes
  int n_classes = 4;
  int growth = 16;       // dense-block channels added per layer
  int dense_layers = 3;  // channel trajectory F -> F + 3*growth
  int latent = 64;       // bottleneck width
  int gc_hidden = 32;    // graph conv width = recurrent hidden size

  int dense_out() const { return n_features + dense_layers * growth; }
  int seq_width() const { return 2 * gc_hidden; }  // bidirectional concat
};

enum class GraphInput { Features, Latent };

// Which branches exist. MlpSpatial swaps the graph branch for a two-layer
// fully connected network; NoAutoencoder drops the reconstruction branch;
// NoResidual disables the residual path inside the graph layers.
enum class ModelVariant { Full, MlpSpatial, NoAutoencoder, NoResidual };

inline const char* variant_id(ModelVariant v) {
  switch (v) {
    case ModelVariant::Full: return "A";
    case ModelVariant::MlpSpatial: return "B";
    case ModelVariant::NoAutoencoder: return "C";
    case ModelVariant::NoResidual: return "D";
  }
  return "?";
}

template <typename T>
struct ConvLayer {
  TensorPtr<T> kernel;  // [Cout, Cin, k]
  TensorPtr<T> bias;    // [Cout]
};

template <typename T>
struct AffineLayer {
  TensorPtr<T> W;  // [I, O]
  TensorPtr<T> b;  // [O]
};

template <typename T>
struct BatchNormLayer {
  TensorPtr<T> gamma, beta;
  BatchNormState<T> state;
};

template <typename T>
struct AutoencoderParams {
  std::vector<ConvLayer<T>> dense;  // k=3, padding 1, ReLU, concatenated
  ConvLayer<T> bottleneck;          // 1x1, dense_out -> latent
  TensorPtr<T> deconv_kernel;       // [latent, F, 1]
  TensorPtr<T> deconv_bias;         // [F]
  AffineLayer<T> head_hidden;       // latent -> latent
  AffineLayer<T> head_out;          // latent -> classes
};

template <typename T>
struct GraphConvParams {
  AffineLayer<T> lin;
  BatchNormLayer<T> bn;
  bool residual = false;  // structurally possible only when Din == Dout
};

template <typename T>
struct AttentionParams {
  AffineLayer<T> score_hidden;  // seq_width -> seq_width
  AffineLayer<T> score_out;     // seq_width -> 1
};

template <typename T>
struct GraphBranchParams {
  TensorPtr<T> adjacency;        // raw A, [N, N], trainable
  TensorPtr<T> adjacency_mask;   // constant 1 - I
  AffineLayer<T> input_proj;     // latent -> F, present only in Latent mode
  GraphConvParams<T> gc1, gc2;
  LstmWeights<T> lstm_fwd, lstm_bwd;
  AttentionParams<T> attn;
  AffineLayer<T> head_hidden;  // seq_width -> seq_width
  AffineLayer<T> head_out;     // seq_width -> classes
};

template <typename T>
struct MlpBranchParams {
  AffineLayer<T> fc1;  // N*F -> seq_width
  AffineLayer<T> fc2;  // seq_width -> classes
};

template <typename T>
struct NamedParam {
  std::string name;
  TensorPtr<T> tensor;
};

template <typename T>
struct Model {
  ModelDims dims;
  ModelVariant variant = ModelVariant::Full;
  GraphInput graph_input = GraphInput::Features;

  AutoencoderParams<T> ae;
  GraphBranchParams<T> graph;
  MlpBranchParams<T> mlp;

  std::vector<NamedParam<T>> ae_group;  // stepped at the autoencoder rate
  std::vector<NamedParam<T>> st_group;  // graph/mlp branch + adjacency

  bool has_autoencoder() const { return variant != ModelVariant::NoAutoencoder; }
  bool has_graph() const { return variant != ModelVariant::MlpSpatial; }
  bool residual_enabled() const { return variant != ModelVariant::NoResidual; }

  std::vector<BatchNormState<T>*> bn_states() {
    if (!has_graph()) return {};
    return {&graph.gc1.bn.state, &graph.gc2.bn.state};
  }

  // Trainable parameter count; the raw adjacency entries are reported
  // separately because the published total leaves them out.
  int64_t trainable_count(bool include_adjacency) const {
    int64_t n = 0;
    for (const auto& p : ae_group) n += p.tensor->numel();
    for (const auto& p : st_group) {
      if (!include_adjacency && p.name == "graph.adjacency") continue;
      n += p.tensor->numel();
    }
    return n;
  }
};

// ---------------------------------------------------------------------------
// analytic parameter counts
// ---------------------------------------------------------------------------

struct LayerCounts {
  int64_t dense_block = 0;
  int64_t bottleneck = 0;
  int64_t decoder = 0;
  int64_t ae_head_hidden = 0;
  int64_t ae_head_out = 0;
  int64_t gc1 = 0;
  int64_t gc2 = 0;
  int64_t bilstm = 0;
  int64_t attention = 0;
  int64_t st_head_hidden = 0;
  int64_t st_head_out = 0;

  int64_t ae_total() const {
    return dense_block + bottleneck + decoder + ae_head_hidden + ae_head_out;
  }
  int64_t st_total() const {
    return gc1 + gc2 + bilstm + attention + st_head_hidden + st_head_out;
  }
  int64_t total() const { return ae_total() + st_total(); }
};

inline LayerCounts analytic_layer_counts(const ModelDims& d) {
  LayerCounts c;
  int cin = d.n_features;
  for (int l = 0; l < d.dense_layers; ++l) {
    c.dense_block += static_cast<int64_t>(d.growth) * cin * 3 + d.growth;
    cin += d.growth;
  }
  c.bottleneck = static_cast<int64_t>(d.latent) * d.dense_out() + d.latent;
  c.decoder = static_cast<int64_t>(d.latent) * d.n_features + d.n_features;
  c.ae_head_hidden = static_cast<int64_t>(d.latent) * d.latent + d.latent;
  c.ae_head_out = static_cast<int64_t>(d.latent) * d.n_classes + d.n_classes;
  const int H = d.gc_hidden;
  c.gc1 = static_cast<int64_t>(d.n_features) * H + H + 2 * H;  // affine + batch-norm
  c.gc2 = static_cast<int64_t>(H) * H + H + 2 * H;
  c.bilstm = 2 * (static_cast<int64_t>(4 * H) * H + static_cast<int64_t>(4 * H) * H + 4 * H);
  const int S = d.seq_width();
  c.attention = static_cast<int64_t>(S) * S + S + S + 1;
  c.st_head_hidden = static_cast<int64_t>(S) * S + S;
  c.st_head_out = static_cast<int64_t>(S) * d.n_classes + d.n_classes;
  return c;
}

// ---------------------------------------------------------------------------
// initialization
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
ConvLayer<T> init_conv(std::vector<NamedParam<T>>& group, const std::string& name, int cout, int cin,
                       int k, std::mt19937_64& rng) {
  ConvLayer<T> layer;
  layer.kernel = make_tensor<T>({cout, cin, k}, true);
  fill_kaiming_normal(*layer.kernel, rng, cin * k);
  layer.bias = make_tensor<T>({cout}, true);
  group.push_back({name + ".kernel", layer.kernel});
  group.push_back({name + ".bias", layer.bias});
  return layer;
}

template <typename T>
AffineLayer<T> init_affine(std::vector<NamedParam<T>>& group, const std::string& name, int in, int out,
                           std::mt19937_64& rng) {
  AffineLayer<T> layer;
  layer.W = make_tensor<T>({in, out}, true);
  fill_xavier_uniform(*layer.W, rng, in, out);
  layer.b = make_tensor<T>({out}, true);
  group.push_back({name + ".W", layer.W});
  group.push_back({name + ".b", layer.b});
  return layer;
}

template <typename T>
BatchNormLayer<T> init_batchnorm(std::vector<NamedParam<T>>& group, const std::string& name, int f) {
  BatchNormLayer<T> bn;
  bn.gamma = tensor_of<T>({f}, std::vector<T>(static_cast<size_t>(f), T(1)), true);
  bn.beta = make_tensor<T>({f}, true);
  bn.state.init(f);
  group.push_back({name + ".gamma", bn.gamma});
  group.push_back({name + ".beta", bn.beta});
  return bn;
}

template <typename T>
LstmWeights<T> init_lstm(std::vector<NamedParam<T>>& group, const std::string& name, int in, int hidden,
                         std::mt19937_64& rng) {
  LstmWeights<T> w;
  w.w_input = make_tensor<T>({in, 4 * hidden}, true);
  fill_xavier_uniform(*w.w_input, rng, in, 4 * hidden);
  w.w_hidden = make_tensor<T>({hidden, 4 * hidden}, true);
  fill_xavier_uniform(*w.w_hidden, rng, hidden, 4 * hidden);
  w.bias = make_tensor<T>({4 * hidden}, true);
  group.push_back({name + ".w_input", w.w_input});
  group.push_back({name + ".w_hidden", w.w_hidden});
  group.push_back({name + ".bias", w.bias});
  return w;
}

}  // namespace detail

// Builds and seeds a model. Convolution kernels get fan-in-scaled normal
// draws; graph, recurrent, linear and attention weights get symmetric uniform
// draws; every bias starts at zero; the adjacency starts from the supplied
// channel-correlation matrix.
template <typename T>
Model<T> init_model(const ModelDims& dims, ModelVariant variant, GraphInput graph_input,
                    const std::vector<double>& pearson, uint64_t seed) {
  Model<T> m;
  m.dims = dims;
  m.variant = variant;
  m.graph_input = graph_input;
  if (graph_input == GraphInput::Latent && !m.has_autoencoder())
    throw std::invalid_argument("latent graph input requires the autoencoder branch");
  std::mt19937_64 rng(seed);

  if (m.has_autoencoder()) {
    int cin = dims.n_features;
    for (int l = 0; l < dims.dense_layers; ++l) {
      m.ae.dense.push_back(
          detail::init_conv(m.ae_group, "ae.dense" + std::to_string(l + 1), dims.growth, cin, 3, rng));
      cin += dims.growth;
    }
    m.ae.bottleneck = detail::init_conv(m.ae_group, "ae.bottleneck", dims.latent, dims.dense_out(), 1, rng);
    m.ae.deconv_kernel = make_tensor<T>({dims.latent, dims.n_features, 1}, true);
    fill_kaiming_normal(*m.ae.deconv_kernel, rng, dims.latent);
    m.ae.deconv_bias = make_tensor<T>({dims.n_features}, true);
    m.ae_group.push_back({"ae.deconv.kernel", m.ae.deconv_kernel});
    m.ae_group.push_back({"ae.deconv.bias", m.ae.deconv_bias});
    m.ae.head_hidden = detail::init_affine(m.ae_group, "ae.head_hidden", dims.latent, dims.latent, rng);
    m.ae.head_out = detail::init_affine(m.ae_group, "ae.head_out", dims.latent, dims.n_classes, rng);
  }

  if (m.has_graph()) {
    const int N = dims.n_nodes;
    if (static_cast<int>(pearson.size()) != N * N)
      throw std::invalid_argument("adjacency initializer size does not match node count " +
                                  std::to_string(N));
    m.graph.adjacency = make_tensor<T>({N, N}, true);
    for (int i = 0; i < N * N; ++i)
      m.graph.adjacency->data[static_cast<size_t>(i)] = static_cast<T>(pearson[static_cast<size_t>(i)]);
    m.st_group.push_back({"graph.adjacency", m.graph.adjacency});
    m.graph.adjacency_mask = make_tensor<T>({N, N});
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        m.graph.adjacency_mask->data[static_cast<size_t>(i) * N + j] = i == j ? T(0) : T(1);

    if (graph_input == GraphInput::Latent)
      m.graph.input_proj =
          detail::init_affine(m.st_group, "graph.input_proj", dims.latent, dims.n_features, rng);
    m.graph.gc1.lin = detail::init_affine(m.st_group, "graph.gc1", dims.n_features, dims.gc_hidden, rng);
    m.graph.gc1.bn = detail::init_batchnorm(m.st_group, "graph.gc1.bn", dims.gc_hidden);
    m.graph.gc1.residual = false;  // a projection residual would change the layer budget
    m.graph.gc2.lin = detail::init_affine(m.st_group, "graph.gc2", dims.gc_hidden, dims.gc_hidden, rng);
    m.graph.gc2.bn = detail::init_batchnorm(m.st_group, "graph.gc2.bn", dims.gc_hidden);
    m.graph.gc2.residual = true;
    m.graph.lstm_fwd = detail::init_lstm(m.st_group, "graph.lstm_fwd", dims.gc_hidden, dims.gc_hidden, rng);
    m.graph.lstm_bwd = detail::init_lstm(m.st_group, "graph.lstm_bwd", dims.gc_hidden, dims.gc_hidden, rng);
    m.graph.attn.score_hidden =
        detail::init_affine(m.st_group, "graph.attn_hidden", dims.seq_width(), dims.seq_width(), rng);
    m.graph.attn.score_out = detail::init_affine(m.st_group, "graph.attn_out", dims.seq_width(), 1, rng);
    m.graph.head_hidden =
        detail::init_affine(m.st_group, "graph.head_hidden", dims.seq_width(), dims.seq_width(), rng);
    m.graph.head_out = detail::init_affine(m.st_group, "graph.head_out", dims.seq_width(), dims.n_classes, rng);
  } else {
    m.mlp.fc1 = detail::init_affine(m.st_group, "mlp.fc1", dims.n_nodes * dims.n_features,
                                    dims.seq_width(), rng);
    m.mlp.fc2 = detail::init_affine(m.st_group, "mlp.fc2", dims.seq_width(), dims.n_classes, rng);
  }
  return m;
}

// ---------------------------------------------------------------------------
// forward passes
// ---------------------------------------------------------------------------

template <typename T>
struct AeOutputs {
  TensorPtr<T> latent;  // [B, latent, N]
  TensorPtr<T> recon;   // [B, F, N], strictly inside (0,1)
  TensorPtr<T> logits;  // [B, classes]
};

// Dense block: layer l consumes the concatenation of the input and all
// previous layer outputs, convolves (k=3, padding 1) and appends its growth
// channels after ReLU.
template <typename T>
TensorPtr<T> dense_block_forward(Tape<T>& tape, const TensorPtr<T>& x, const AutoencoderParams<T>& p) {
  std::vector<TensorPtr<T>> maps{x};
  TensorPtr<T> layer_in = x;
  for (const auto& conv : p.dense) {
    auto y = relu(tape, conv1d(tape, layer_in, conv.kernel, conv.bias, 1));
    maps.push_back(y);
    layer_in = concat_channels(tape, maps);
  }
  return layer_in;  // concat(input, y_1..y_L)
}

template <typename T>
TensorPtr<T> encode(Tape<T>& tape, const TensorPtr<T>& x66, const AutoencoderParams<T>& p) {
  return relu(tape, conv1d(tape, x66, p.bottleneck.kernel, p.bottleneck.bias, 0));
}

template <typename T>
TensorPtr<T> decode(Tape<T>& tape, const TensorPtr<T>& z, const AutoencoderParams<T>& p) {
  return sigmoid(tape, conv_transpose1d(tape, z, p.deconv_kernel, p.deconv_bias));
}

template <typename T>
TensorPtr<T> ae_classify(Tape<T>& tape, const TensorPtr<T>& z, const AutoencoderParams<T>& p) {
  auto pooled = mean_over_last(tape, z);
  auto hidden = relu(tape, linear(tape, pooled, p.head_hidden.W, p.head_hidden.b));
  return linear(tape, hidden, p.head_out.W, p.head_out.b);
}

template <typename T>
AeOutputs<T> autoencoder_forward(Tape<T>& tape, const TensorPtr<T>& x, const AutoencoderParams<T>& p) {
  AeOutputs<T> out;
  auto dense = dense_block_forward(tape, x, p);
  out.latent = encode(tape, dense, p);
  out.recon = decode(tape, out.latent, p);
  out.logits = ae_classify(tape, out.latent, p);
  return out;
}

// Masked row softmax of the raw adjacency; recomputed on every forward pass
// so gradients reach the raw matrix.
template <typename T>
TensorPtr<T> normalize_adjacency(Tape<T>& tape, const GraphBranchParams<T>& p) {
  if (p.adjacency->dim(0) < 2)
    throw std::invalid_argument("adjacency normalization needs at least 2 nodes");
  return rowwise_softmax(tape, p.adjacency, *p.adjacency_mask);
}

// out = ReLU(BN(A_norm * H * W + b [+ H])); the residual joins before the
// batch norm and exists only when input and output widths agree.
template <typename T>
TensorPtr<T> graph_conv(Tape<T>& tape, const TensorPtr<T>& H, const TensorPtr<T>& norm_adj,
                        GraphConvParams<T>& layer, bool residual_enabled, Mode mode) {
  const int B = H->dim(0), N = H->dim(1), Din = H->dim(2);
  const int Dout = layer.lin.W->dim(1);
  auto mixed = adj_mix(tape, norm_adj, H);
  auto flat = reshape(tape, mixed, {B * N, Din});
  auto lin = linear(tape, flat, layer.lin.W, layer.lin.b);
  TensorPtr<T> pre = lin;
  if (layer.residual && residual_enabled) {
    if (Din != Dout)
      throw std::invalid_argument("graph residual needs matching widths, got " + std::to_string(Din) +
                                  " vs " + std::to_string(Dout));
    pre = add(tape, lin, reshape(tape, H, {B * N, Din}));
  }
  auto bn = batchnorm1d(tape, pre, layer.bn.gamma, layer.bn.beta, layer.bn.state, mode);
  return reshape(tape, relu(tape, bn), {B, N, Dout});
}

// Forward scan over nodes 0..N-1 and backward scan over N-1..0 with zero
// initial states; per-node outputs are concatenated to 2H.
template <typename T>
TensorPtr<T> bilstm_forward(Tape<T>& tape, const TensorPtr<T>& H, const LstmWeights<T>& fwd,
                            const LstmWeights<T>& bwd) {
  if (H->shape.size() != 3 || H->dim(2) != fwd.w_input->dim(0))
    throw std::invalid_argument("bilstm: input " + shape_str(H->shape) + " does not match weight fan-in " +
                                std::to_string(fwd.w_input->dim(0)));
  const int B = H->dim(0), N = H->dim(1);
  const int hidden = fwd.w_hidden->dim(0);
  std::vector<TensorPtr<T>> fwd_out(static_cast<size_t>(N)), bwd_out(static_cast<size_t>(N));
  {
    auto h = make_tensor<T>({B, hidden});
    auto c = make_tensor<T>({B, hidden});
    for (int n = 0; n < N; ++n) {
      auto st = lstm_cell(tape, select_step(tape, H, n), h, c, fwd);
      h = st.h;
      c = st.c;
      fwd_out[static_cast<size_t>(n)] = h;
    }
  }
  {
    auto h = make_tensor<T>({B, hidden});
    auto c = make_tensor<T>({B, hidden});
    for (int n = N - 1; n >= 0; --n) {
      auto st = lstm_cell(tape, select_step(tape, H, n), h, c, bwd);
      h = st.h;
      c = st.c;
      bwd_out[static_cast<size_t>(n)] = h;
    }
  }
  return concat_last(tape, stack_rows(tape, fwd_out), stack_rows(tape, bwd_out));
}

template <typename T>
struct AttnOutputs {
  TensorPtr<T> pooled;  // [B, F]
  TensorPtr<T> alpha;   // [B, N], nonnegative, rows sum to 1
};

// score_i = w2' ReLU(w1 h_i + b1) + b2, alpha = softmax over nodes,
// pooled = sum_i alpha_i h_i.
template <typename T>
AttnOutputs<T> attention_pool(Tape<T>& tape, const TensorPtr<T>& Hseq, const AttentionParams<T>& p) {
  const int B = Hseq->dim(0), N = Hseq->dim(1), F = Hseq->dim(2);
  auto flat = reshape(tape, Hseq, {B * N, F});
  auto hidden = relu(tape, linear(tape, flat, p.score_hidden.W, p.score_hidden.b));
  auto scores = reshape(tape, linear(tape, hidden, p.score_out.W, p.score_out.b), {B, N});
  auto ones = tensor_of<T>({B, N}, std::vector<T>(static_cast<size_t>(B) * N, T(1)));
  AttnOutputs<T> out;
  out.alpha = rowwise_softmax(tape, scores, *ones);
  out.pooled = node_weighted_sum(tape, out.alpha, Hseq);
  return out;
}

template <typename T>
struct GraphOutputs {
  TensorPtr<T> logits;    // [B, classes]
  TensorPtr<T> alpha;     // attention weights, exposed for inspection
  TensorPtr<T> norm_adj;  // normalized adjacency used by this pass
};

template <typename T>
GraphOutputs<T> graph_forward(Tape<T>& tape, const TensorPtr<T>& x, GraphBranchParams<T>& p,
                              bool residual_enabled, Mode mode, T dropout_p, std::mt19937_64& rng) {
  if (x->dim(1) != p.adjacency->dim(0))
    throw std::invalid_argument("graph input nodes " + shape_str(x->shape) +
                                " do not match adjacency " + shape_str(p.adjacency->shape));
  GraphOutputs<T> out;
  out.norm_adj = normalize_adjacency(tape, p);
  auto h1 = graph_conv(tape, x, out.norm_adj, p.gc1, residual_enabled, mode);
  h1 = dropout(tape, h1, dropout_p, mode, rng);
  auto h2 = graph_conv(tape, h1, out.norm_adj, p.gc2, residual_enabled, mode);
  auto seq = bilstm_forward(tape, h2, p.lstm_fwd, p.lstm_bwd);
  auto attn = attention_pool(tape, seq, p.attn);
  out.alpha = attn.alpha;
  auto hidden = relu(tape, linear(tape, attn.pooled, p.head_hidden.W, p.head_hidden.b));
  out.logits = linear(tape, hidden, p.head_out.W, p.head_out.b);
  return out;
}

template <typename T>
TensorPtr<T> mlp_forward(Tape<T>& tape, const TensorPtr<T>& x, const MlpBranchParams<T>& p) {
  const int B = x->dim(0);
  auto flat = reshape(tape, x, {B, x->dim(1) * x->dim(2)});
  auto hidden = relu(tape, linear(tape, flat, p.fc1.W, p.fc1.b));
  return linear(tape, hidden, p.fc2.W, p.fc2.b);
}

// ---------------------------------------------------------------------------
// joint loss
// ---------------------------------------------------------------------------

struct LossWeights {
  double lambda = 0.3;  // autoencoder classification weight
  double gamma = 1.0;   // graph branch classification weight
};

// Reconstruction MSE plus lambda-weighted classification cross-entropy.
template <typename T>
TensorPtr<T> autoencoder_loss(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& recon,
                              const TensorPtr<T>& logits, const std::vector<int>& labels, double lambda) {
  if (lambda < 0) throw std::invalid_argument("loss weight lambda must be nonnegative");
  return add(tape, mse_loss(tape, recon, x),
             scale(tape, cross_entropy(tape, logits, labels), static_cast<T>(lambda)));
}

// Joint objective of both branches: L_rec + lambda*CE(ae) + gamma*CE(st).
template <typename T>
TensorPtr<T> total_loss(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& recon,
                        const TensorPtr<T>& ae_logits, const TensorPtr<T>& st_logits,
                        const std::vector<int>& labels, const LossWeights& w) {
  if (w.lambda < 0 || w.gamma < 0) throw std::invalid_argument("loss weights must be nonnegative");
  return add(tape, autoencoder_loss(tape, x, recon, ae_logits, labels, w.lambda),
             scale(tape, cross_entropy(tape, st_logits, labels), static_cast<T>(w.gamma)));
}

template <typename T>
struct ForwardOutputs {
  TensorPtr<T> total;      // scalar
  TensorPtr<T> rec_loss;   // scalar or null
  TensorPtr<T> ae_ce;      // scalar or null
  TensorPtr<T> st_ce;      // scalar
  TensorPtr<T> st_logits;  // final predictions come from here
  AeOutputs<T> ae;         // populated when the branch exists
  GraphOutputs<T> st;      // populated when the branch exists
};

// x_ae: [B, F, N] (also the reconstruction target), x_graph: [B, N, F].
// total = L_rec + lambda * CE(ae) + gamma * CE(graph branch); absent branches
// contribute nothing.
template <typename T>
ForwardOutputs<T> model_forward(Tape<T>& tape, Model<T>& m, const TensorPtr<T>& x_ae,
                                const TensorPtr<T>& x_graph, const std::vector<int>& labels,
                                const LossWeights& w, Mode mode, T dropout_p, std::mt19937_64& rng) {
  ForwardOutputs<T> out;
  TensorPtr<T> total;
  if (m.has_autoencoder()) {
    out.ae = autoencoder_forward(tape, x_ae, m.ae);
    out.rec_loss = mse_loss(tape, out.ae.recon, x_ae);
    out.ae_ce = cross_entropy(tape, out.ae.logits, labels);
    total = add(tape, out.rec_loss, scale(tape, out.ae_ce, static_cast<T>(w.lambda)));
  }
  if (m.has_graph()) {
    TensorPtr<T> gin = x_graph;
    if (m.graph_input == GraphInput::Latent) {
      auto z = transpose_cn(tape, out.ae.latent);  // [B, N, latent]
      const int B = z->dim(0), N = z->dim(1);
      auto flat = reshape(tape, z, {B * N, m.dims.latent});
      auto proj = linear(tape, flat, m.graph.input_proj.W, m.graph.input_proj.b);
      gin = reshape(tape, proj, {B, N, m.dims.n_features});
    }
    out.st = graph_forward(tape, gin, m.graph, m.residual_enabled(), mode, dropout_p, rng);
    out.st_logits = out.st.logits;
  } else {
    out.st_logits = mlp_forward(tape, x_graph, m.mlp);
  }
  out.st_ce = cross_entropy(tape, out.st_logits, labels);
  auto weighted_st = scale(tape, out.st_ce, static_cast<T>(w.gamma));
  out.total = total ? add(tape, total, weighted_st) : weighted_st;
  return out;
}

// ---------------------------------------------------------------------------
// parameter snapshots (early stopping, serialization)
// ---------------------------------------------------------------------------

template <typename T>
struct ModelSnapshot {
  std::vector<std::vector<T>> values;
  std::vector<std::vector<T>> bn_running;
};

template <typename T>
ModelSnapshot<T> snapshot_model(Model<T>& m) {
  ModelSnapshot<T> s;
  for (auto& p : m.ae_group) s.values.push_back(p.tensor->data);
  for (auto& p : m.st_group) s.values.push_back(p.tensor->data);
  for (auto* st : m.bn_states()) {
    s.bn_running.push_back(st->running_mean);
    s.bn_running.push_back(st->running_var);
  }
  return s;
}

template <typename T>
void restore_model(Model<T>& m, const ModelSnapshot<T>& s) {
  size_t i = 0;
  for (auto& p : m.ae_group) p.tensor->data = s.values.at(i++);
  for (auto& p : m.st_group) p.tensor->data = s.values.at(i++);
  size_t j = 0;
  for (auto* st : m.bn_states()) {
    st->running_mean = s.bn_running.at(j++);
    st->running_var = s.bn_running.at(j++);
  }
}

}  // namespace mieeg
