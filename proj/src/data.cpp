#include "mieeg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mieeg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kEps = 1e-12;

constexpr float kBandEdges[7] = {0.5f, 4.0f, 8.0f, 13.0f, 20.0f, 30.0f, 45.0f};

double population_var(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec s;
  // Channel groups over central/centro-parietal sites of the default montage.
  s.erd_channels = {{6, 7, 8}, {10, 11, 12}, {13, 14, 15}, {16, 17, 18}};
  return s;
}

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw std::invalid_argument("synthetic spec: need at least 2 classes");
  if (n_channels < 2) throw std::invalid_argument("synthetic spec: need at least 2 channels");
  if (n_samples < 8) throw std::invalid_argument("synthetic spec: need at least 8 samples");
  if (fs <= 0) throw std::invalid_argument("synthetic spec: sampling rate must be positive");
  if (trials_per_class < 1) throw std::invalid_argument("synthetic spec: need at least 1 trial per class");
  if (erd_depth < 0 || erd_depth > 1)
    throw std::invalid_argument("synthetic spec: erd_depth must lie in [0,1]");
  if (static_cast<int>(erd_channels.size()) != n_classes)
    throw std::invalid_argument("synthetic spec: erd_channels needs one list per class");
  for (const auto& group : erd_channels)
    for (int c : group)
      if (c < 0 || c >= n_channels)
        throw std::invalid_argument("synthetic spec: erd channel index " + std::to_string(c) +
                                    " outside 0.." + std::to_string(n_channels - 1));
}

std::vector<std::string> default_channel_names(int n_channels) {
  // The 22-electrode layout used by four-class cue-based recordings.
  static const char* kMontage22[22] = {"Fz",  "FC3", "FC1", "FCz", "FC2", "FC4", "C5",  "C3",
                                       "C1",  "Cz",  "C2",  "C4",  "C6",  "CP3", "CP1", "CPz",
                                       "CP2", "CP4", "P1",  "Pz",  "P2",  "POz"};
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(n_channels));
  if (n_channels == 22) {
    for (const char* n : kMontage22) names.emplace_back(n);
  } else {
    for (int c = 0; c < n_channels; ++c) names.push_back("ch" + std::to_string(c));
  }
  return names;
}

EpochSet generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> ujit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Three background banks below, between and above the 8-13 Hz rhythm.
  struct Bank {
    double f_lo, f_hi, amp;
  };
  const Bank banks[3] = {{1.5, 7.5, 3.0}, {14.0, 30.0, 1.5}, {30.0, 45.0, 0.8}};
  const double mu_freq = 10.0, mu_amp = 4.0;

  EpochSet e;
  e.n_trials = spec.n_classes * spec.trials_per_class;
  e.n_channels = spec.n_channels;
  e.n_samples = spec.n_samples;
  e.n_classes = spec.n_classes;
  e.fs = spec.fs;
  e.channel_names = default_channel_names(spec.n_channels);
  e.data.assign(static_cast<size_t>(e.n_trials) * e.n_channels * e.n_samples, 0.0f);
  e.labels.resize(static_cast<size_t>(e.n_trials));

  std::vector<uint8_t> is_erd(static_cast<size_t>(spec.n_classes) * spec.n_channels, 0);
  for (int k = 0; k < spec.n_classes; ++k)
    for (int c : spec.erd_channels[static_cast<size_t>(k)])
      is_erd[static_cast<size_t>(k) * spec.n_channels + c] = 1;

  const double dt = 1.0 / static_cast<double>(spec.fs);
  for (int t = 0; t < e.n_trials; ++t) {
    const int label = t % spec.n_classes;
    e.labels[static_cast<size_t>(t)] = label;
    const double mu_phase = uphase(rng);  // coherent across channels
    for (int c = 0; c < e.n_channels; ++c) {
      double bank_f[3], bank_p[3];
      for (int bk = 0; bk < 3; ++bk) {
        std::uniform_real_distribution<double> uf(banks[bk].f_lo, banks[bk].f_hi);
        bank_f[bk] = uf(rng);
        bank_p[bk] = uphase(rng);
      }
      const double jitter = 1.0 + 0.1 * ujit(rng);
      const bool erd = is_erd[static_cast<size_t>(label) * spec.n_channels + c] != 0;
      const double amp_mu = mu_amp * jitter * (erd ? 1.0 - spec.erd_depth : 1.0);
      for (int s = 0; s < e.n_samples; ++s) {
        const double time = s * dt;
        double v = amp_mu * std::sin(2.0 * kPi * mu_freq * time + mu_phase);
        for (int bk = 0; bk < 3; ++bk)
          v += banks[bk].amp * std::sin(2.0 * kPi * bank_f[bk] * time + bank_p[bk]);
        v += spec.noise_std * noise(rng);
        e.at(t, c, s) = static_cast<float>(v);
      }
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// preprocessing
// ---------------------------------------------------------------------------

EpochSet common_average_reference(const EpochSet& e) {
  if (e.n_channels < 2)
    throw std::invalid_argument("common average reference needs at least 2 channels, got " +
                                std::to_string(e.n_channels));
  EpochSet out = e;
  for (int t = 0; t < e.n_trials; ++t)
    for (int s = 0; s < e.n_samples; ++s) {
      double mean = 0;
      for (int c = 0; c < e.n_channels; ++c) mean += e.at(t, c, s);
      mean /= e.n_channels;
      for (int c = 0; c < e.n_channels; ++c)
        out.at(t, c, s) = static_cast<float>(e.at(t, c, s) - mean);
    }
  return out;
}

WindowSet sliding_windows(const EpochSet& e, const WindowConfig& cfg) {
  if (cfg.omega < 2) throw std::invalid_argument("window length must be at least 2");
  // step > omega is allowed: windows are then spaced with gaps, which the
  // coarse sweep cells rely on.
  if (cfg.step < 1) throw std::invalid_argument("step must be at least 1");
  if (cfg.omega > e.n_samples)
    throw std::invalid_argument("window length " + std::to_string(cfg.omega) +
                                " exceeds trial length " + std::to_string(e.n_samples));
  const int per_trial = (e.n_samples - cfg.omega) / cfg.step + 1;
  WindowSet w;
  w.n_channels = e.n_channels;
  w.omega = cfg.omega;
  w.n_windows = per_trial * e.n_trials;
  w.data.resize(static_cast<size_t>(w.n_windows) * e.n_channels * cfg.omega);
  w.labels.reserve(static_cast<size_t>(w.n_windows));
  w.trial_index.reserve(static_cast<size_t>(w.n_windows));
  w.start_sample.reserve(static_cast<size_t>(w.n_windows));
  size_t out_pos = 0;
  for (int t = 0; t < e.n_trials; ++t)
    for (int k = 0; k < per_trial; ++k) {
      const int start = k * cfg.step;
      for (int c = 0; c < e.n_channels; ++c) {
        const float* src = &e.data[(static_cast<size_t>(t) * e.n_channels + c) * e.n_samples + start];
        std::copy_n(src, cfg.omega, &w.data[out_pos]);
        out_pos += static_cast<size_t>(cfg.omega);
      }
      w.labels.push_back(e.labels[static_cast<size_t>(t)]);
      w.trial_index.push_back(t);
      w.start_sample.push_back(start);
    }
  return w;
}

// ---------------------------------------------------------------------------
// feature extraction
// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(int omega, float fs) : omega_(omega), fs_(fs) {
  if (omega < 8) throw std::invalid_argument("feature extraction needs omega >= 8, got " + std::to_string(omega));
  if (fs <= 0) throw std::invalid_argument("feature extraction needs a positive sampling rate");
  const double df = static_cast<double>(fs) / omega;
  const int k_nyquist = omega / 2;
  // Bin k sits at frequency k*fs/omega; a band [lo, hi) owns bins with lo <= f < hi.
  auto first_bin = [&](double lo) { return std::max(1, static_cast<int>(std::ceil(lo / df - 1e-9))); };
  auto end_bin = [&](double hi) {
    int k = static_cast<int>(std::ceil(hi / df - 1e-9));  // first bin with f >= hi
    return std::min(k, k_nyquist + 1);
  };
  k_min_ = first_bin(kBandEdges[0]);
  k_max_ = k_min_;
  for (int b = 0; b < 6; ++b) {
    Band band{first_bin(kBandEdges[b]), end_bin(kBandEdges[b + 1])};
    band.k_hi = std::max(band.k_hi, band.k_lo);  // empty band stays empty, never negative
    bands_.push_back(band);
    k_max_ = std::max(k_max_, band.k_hi);
  }
  const int n_bins = std::max(0, k_max_ - k_min_);
  cos_table_.resize(static_cast<size_t>(n_bins) * omega);
  sin_table_.resize(static_cast<size_t>(n_bins) * omega);
  for (int k = k_min_; k < k_max_; ++k)
    for (int s = 0; s < omega; ++s) {
      const double ang = 2.0 * kPi * k * s / omega;
      cos_table_[static_cast<size_t>(k - k_min_) * omega + s] = std::cos(ang);
      sin_table_[static_cast<size_t>(k - k_min_) * omega + s] = std::sin(ang);
    }
}

void FeatureExtractor::compute(const float* window, int n_channels, float* out) const {
  const int W = omega_;
  std::vector<double> x(static_cast<size_t>(W));
  for (int c = 0; c < n_channels; ++c) {
    const float* src = window + static_cast<size_t>(c) * W;
    for (int s = 0; s < W; ++s) x[static_cast<size_t>(s)] = src[s];

    double mean = std::accumulate(x.begin(), x.end(), 0.0) / W;
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= W;

    std::vector<double> d1(static_cast<size_t>(W - 1)), d2(static_cast<size_t>(W - 2));
    for (int s = 0; s + 1 < W; ++s) d1[static_cast<size_t>(s)] = x[static_cast<size_t>(s + 1)] - x[static_cast<size_t>(s)];
    for (int s = 0; s + 1 < W - 1; ++s) d2[static_cast<size_t>(s)] = d1[static_cast<size_t>(s + 1)] - d1[static_cast<size_t>(s)];
    const double var_d1 = population_var(d1);
    const double var_d2 = population_var(d2);
    const double mobility = std::sqrt(var_d1 / (var + kEps));
    const double mobility_d = std::sqrt(var_d2 / (var_d1 + kEps));
    const double complexity = mobility_d / (mobility + kEps);

    int crossings = 0;
    double line_len = 0;
    for (int s = 0; s + 1 < W; ++s) {
      if (x[static_cast<size_t>(s)] * x[static_cast<size_t>(s + 1)] < 0) ++crossings;
      line_len += std::abs(d1[static_cast<size_t>(s)]);
    }
    const double zcr = static_cast<double>(crossings) / (W - 1);
    const double norm_line_len = line_len / (W - 1);

    // One-sided periodogram restricted to the bins the bands can use.
    double band_power[6] = {0, 0, 0, 0, 0, 0};
    const int n_bins = k_max_ - k_min_;
    std::vector<double> bin_power(static_cast<size_t>(std::max(0, n_bins)), 0.0);
    for (int k = k_min_; k < k_max_; ++k) {
      const double* ct = &cos_table_[static_cast<size_t>(k - k_min_) * W];
      const double* st = &sin_table_[static_cast<size_t>(k - k_min_) * W];
      double re = 0, im = 0;
      for (int s = 0; s < W; ++s) {
        re += x[static_cast<size_t>(s)] * ct[s];
        im -= x[static_cast<size_t>(s)] * st[s];
      }
      const double one_sided = (2 * k == W) ? 1.0 : 2.0;
      bin_power[static_cast<size_t>(k - k_min_)] = one_sided * (re * re + im * im) / (static_cast<double>(W) * W);
    }
    for (int b = 0; b < 6; ++b)
      for (int k = bands_[static_cast<size_t>(b)].k_lo; k < bands_[static_cast<size_t>(b)].k_hi; ++k)
        band_power[b] += bin_power[static_cast<size_t>(k - k_min_)];
    double total = 0;
    for (double bp : band_power) total += bp;

    float* dst = out + static_cast<size_t>(c) * kFeatureCount;
    dst[0] = static_cast<float>(mean);
    dst[1] = static_cast<float>(var);
    dst[2] = static_cast<float>(mobility);
    dst[3] = static_cast<float>(complexity);
    dst[4] = static_cast<float>(zcr);
    dst[5] = static_cast<float>(norm_line_len);
    for (int b = 0; b < 6; ++b) dst[6 + b] = static_cast<float>(std::log(band_power[b] + kEps));
    for (int b = 0; b < 6; ++b) dst[12 + b] = static_cast<float>(band_power[b] / (total + kEps));
  }
}

FeatureTensor extract_features(const WindowSet& w, float fs) {
  FeatureExtractor ex(w.omega, fs);
  FeatureTensor f;
  f.n_windows = w.n_windows;
  f.n_channels = w.n_channels;
  f.labels = w.labels;
  f.x.resize(static_cast<size_t>(w.n_windows) * w.n_channels * kFeatureCount);
  for (int i = 0; i < w.n_windows; ++i)
    ex.compute(&w.data[static_cast<size_t>(i) * w.n_channels * w.omega], w.n_channels,
               &f.x[static_cast<size_t>(i) * w.n_channels * kFeatureCount]);
  return f;
}

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

ScaleBounds fit_minmax(const FeatureTensor& train) {
  if (train.n_windows == 0) throw std::invalid_argument("minmax fit partition is empty");
  ScaleBounds b;
  b.bounds.assign(static_cast<size_t>(train.n_features),
                  {std::numeric_limits<float>::max(), std::numeric_limits<float>::lowest()});
  for (int w = 0; w < train.n_windows; ++w)
    for (int c = 0; c < train.n_channels; ++c)
      for (int f = 0; f < train.n_features; ++f) {
        const float v = train.at(w, c, f);
        auto& [lo, hi] = b.bounds[static_cast<size_t>(f)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  return b;
}

void apply_minmax(FeatureTensor& f, const ScaleBounds& b) {
  if (b.bounds.size() != static_cast<size_t>(f.n_features))
    throw std::invalid_argument("scale bounds count does not match the feature count");
  for (int w = 0; w < f.n_windows; ++w)
    for (int c = 0; c < f.n_channels; ++c)
      for (int ff = 0; ff < f.n_features; ++ff) {
        const auto [lo, hi] = b.bounds[static_cast<size_t>(ff)];
        float v = 0.0f;  // constant features map to 0
        if (hi > lo) v = (f.at(w, c, ff) - lo) / (hi - lo);
        f.at(w, c, ff) = std::clamp(v, 0.0f, 1.0f);
      }
}

// ---------------------------------------------------------------------------
// adjacency initialization
// ---------------------------------------------------------------------------

std::vector<double> pearson_adjacency(const EpochSet& e) {
  if (e.n_channels < 2)
    throw std::invalid_argument("pearson adjacency needs at least 2 channels, got " +
                                std::to_string(e.n_channels));
  const int C = e.n_channels, S = e.n_samples;
  std::vector<double> avg(static_cast<size_t>(C) * S, 0.0);
  for (int t = 0; t < e.n_trials; ++t)
    for (int c = 0; c < C; ++c)
      for (int s = 0; s < S; ++s) avg[static_cast<size_t>(c) * S + s] += e.at(t, c, s);
  for (auto& v : avg) v /= std::max(1, e.n_trials);

  std::vector<double> mean(static_cast<size_t>(C), 0.0), var(static_cast<size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    for (int s = 0; s < S; ++s) mean[static_cast<size_t>(c)] += avg[static_cast<size_t>(c) * S + s];
    mean[static_cast<size_t>(c)] /= S;
    for (int s = 0; s < S; ++s) {
      const double d = avg[static_cast<size_t>(c) * S + s] - mean[static_cast<size_t>(c)];
      var[static_cast<size_t>(c)] += d * d;
    }
    var[static_cast<size_t>(c)] /= S;
  }

  std::vector<double> corr(static_cast<size_t>(C) * C, 0.0);
  for (int i = 0; i < C; ++i) {
    for (int j = i + 1; j < C; ++j) {
      double cov = 0;
      for (int s = 0; s < S; ++s)
        cov += (avg[static_cast<size_t>(i) * S + s] - mean[static_cast<size_t>(i)]) *
               (avg[static_cast<size_t>(j) * S + s] - mean[static_cast<size_t>(j)]);
      cov /= S;
      const double denom = std::sqrt(var[static_cast<size_t>(i)] * var[static_cast<size_t>(j)]);
      const double r = denom < kEps ? 0.0 : cov / denom;
      corr[static_cast<size_t>(i) * C + j] = r;
      corr[static_cast<size_t>(j) * C + i] = r;
    }
    corr[static_cast<size_t>(i) * C + i] = 1.0;
  }
  return corr;
}

// ---------------------------------------------------------------------------
// on-disk format: "EPOC1\0", u32 trials, u32 channels, u32 samples, f32 fs,
// u32 classes, u32 labels[trials], f32 samples[trials*channels*samples]
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[6] = {'E', 'P', 'O', 'C', '1', '\0'};

template <typename V>
void write_raw(std::ofstream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
bool read_raw(std::ifstream& is, V& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  return static_cast<bool>(is);
}
}  // namespace

void write_epochs(const std::string& path, const EpochSet& e) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_raw(os, static_cast<uint32_t>(e.n_trials));
  write_raw(os, static_cast<uint32_t>(e.n_channels));
  write_raw(os, static_cast<uint32_t>(e.n_samples));
  write_raw(os, e.fs);
  write_raw(os, static_cast<uint32_t>(e.n_classes));
  for (int label : e.labels) write_raw(os, static_cast<uint32_t>(label));
  os.write(reinterpret_cast<const char*>(e.data.data()),
           static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

EpochSet read_epochs(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad magic in " + path + ": not an EPOC1 file");
  uint32_t n_trials = 0, n_channels = 0, n_samples = 0, n_classes = 0;
  float fs = 0;
  if (!read_raw(is, n_trials) || !read_raw(is, n_channels) || !read_raw(is, n_samples) ||
      !read_raw(is, fs) || !read_raw(is, n_classes))
    throw std::runtime_error("truncated payload in " + path + ": header incomplete");
  if (n_channels < 2 || fs <= 0 || n_classes < 1)
    throw std::runtime_error("invalid header field in " + path);

  EpochSet e;
  e.n_trials = static_cast<int>(n_trials);
  e.n_channels = static_cast<int>(n_channels);
  e.n_samples = static_cast<int>(n_samples);
  e.n_classes = static_cast<int>(n_classes);
  e.fs = fs;
  e.channel_names = default_channel_names(e.n_channels);
  e.labels.resize(n_trials);
  for (uint32_t t = 0; t < n_trials; ++t) {
    uint32_t label = 0;
    if (!read_raw(is, label)) throw std::runtime_error("truncated payload in " + path + ": labels");
    if (label >= n_classes)
      throw std::runtime_error("label " + std::to_string(label) + " out of range for " +
                               std::to_string(n_classes) + " classes in " + path);
    e.labels[t] = static_cast<int>(label);
  }
  const size_t count = static_cast<size_t>(n_trials) * n_channels * n_samples;
  e.data.resize(count);
  is.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<size_t>(is.gcount()) != count * sizeof(float))
    throw std::runtime_error("truncated payload in " + path + ": sample data");
  return e;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

SplitIndices stratified_split(const std::vector<int>& labels, int n_classes, double second_fraction,
                              uint64_t seed) {
  if (second_fraction < 0 || second_fraction >= 1)
    throw std::invalid_argument("split fraction must lie in [0,1)");
  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (int k = 0; k < n_classes; ++k) {
    std::vector<int> idx;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) idx.push_back(static_cast<int>(i));
    std::shuffle(idx.begin(), idx.end(), rng);
    int n_second = static_cast<int>(std::llround(second_fraction * static_cast<double>(idx.size())));
    n_second = std::min(n_second, static_cast<int>(idx.size()) - 1);  // keep at least one in first
    n_second = std::max(n_second, 0);
    for (size_t i = 0; i < idx.size(); ++i)
      (i < static_cast<size_t>(n_second) ? out.second : out.first).push_back(idx[i]);
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

uint64_t fnv1a_hash(const std::vector<int>& values) {
  uint64_t h = 14695981039346656037ull;
  for (int v : values) {
    for (int byte = 0; byte < 4; ++byte) {
      h ^= static_cast<uint64_t>((static_cast<uint32_t>(v) >> (8 * byte)) & 0xffu);
      h *= 1099511628211ull;
    }
  }
  return h;
}

PreparedData prepare_pipeline(const EpochSet& raw, const WindowConfig& window, uint64_t seed,
                              double test_fraction, double val_fraction) {
  auto referenced = common_average_reference(raw);
  auto split = stratified_split(referenced.labels, referenced.n_classes, test_fraction, seed);
  auto inner = stratified_split([&] {
    std::vector<int> train_labels;
    for (int t : split.first) train_labels.push_back(referenced.labels[static_cast<size_t>(t)]);
    return train_labels;
  }(), referenced.n_classes, val_fraction, seed + 1);

  std::vector<int> train_trials, val_trials;
  for (int i : inner.first) train_trials.push_back(split.first[static_cast<size_t>(i)]);
  for (int i : inner.second) val_trials.push_back(split.first[static_cast<size_t>(i)]);
  const std::vector<int>& test_trials = split.second;

  // Hash the partition assignment: trial id followed by its partition tag.
  std::vector<int> assignment;
  for (int t : train_trials) {
    assignment.push_back(t);
    assignment.push_back(0);
  }
  for (int t : val_trials) {
    assignment.push_back(t);
    assignment.push_back(1);
  }
  for (int t : test_trials) {
    assignment.push_back(t);
    assignment.push_back(2);
  }

  PreparedData out;
  out.split_hash = fnv1a_hash(assignment);
  out.n_channels = referenced.n_channels;
  out.n_classes = referenced.n_classes;

  auto train_set = subset_trials(referenced, train_trials);
  auto val_set = subset_trials(referenced, val_trials);
  auto test_set = subset_trials(referenced, test_trials);

  out.train = extract_features(sliding_windows(train_set, window), referenced.fs);
  out.val = extract_features(sliding_windows(val_set, window), referenced.fs);
  out.test = extract_features(sliding_windows(test_set, window), referenced.fs);
  out.bounds = fit_minmax(out.train);
  apply_minmax(out.train, out.bounds);
  apply_minmax(out.val, out.bounds);
  apply_minmax(out.test, out.bounds);
  out.pearson = pearson_adjacency(train_set);
  return out;
}

EpochSet subset_trials(const EpochSet& e, const std::vector<int>& trial_indices) {
  EpochSet out;
  out.fs = e.fs;
  out.n_trials = static_cast<int>(trial_indices.size());
  out.n_channels = e.n_channels;
  out.n_samples = e.n_samples;
  out.n_classes = e.n_classes;
  out.channel_names = e.channel_names;
  out.labels.reserve(trial_indices.size());
  out.data.resize(static_cast<size_t>(out.n_trials) * e.n_channels * e.n_samples);
  size_t pos = 0;
  const size_t trial_stride = static_cast<size_t>(e.n_channels) * e.n_samples;
  for (int t : trial_indices) {
    if (t < 0 || t >= e.n_trials) throw std::invalid_argument("trial index out of range");
    out.labels.push_back(e.labels[static_cast<size_t>(t)]);
    std::copy_n(&e.data[static_cast<size_t>(t) * trial_stride], trial_stride, &out.data[pos]);
    pos += trial_stride;
  }
  return out;
}

}  // namespace mieeg
