// Synthetic motor-imagery EEG generation, preprocessing, feature extraction,
// correlation-based adjacency initialization and the on-disk epoch format.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mieeg {

inline constexpr int kFeatureCount = 18;

// Labeled multi-channel trials, [trials x channels x samples], row-major.
struct EpochSet {
  std::vector<float> data;
  std::vector<int> labels;   // one per trial, in 0..n_classes-1
  float fs = 0;              // Hz
  int n_trials = 0;
  int n_channels = 0;
  int n_samples = 0;
  int n_classes = 0;
  std::vector<std::string> channel_names;

  float& at(int t, int c, int s) {
    return data[(static_cast<size_t>(t) * n_channels + c) * n_samples + s];
  }
  float at(int t, int c, int s) const {
    return data[(static_cast<size_t>(t) * n_channels + c) * n_samples + s];
  }
};

struct WindowConfig {
  int omega = 500;  // window length in samples
  int step = 62;    // step size in samples
};

// Windowed raw segments, [windows x channels x omega].
struct WindowSet {
  std::vector<float> data;
  std::vector<int> labels;
  std::vector<int> trial_index;
  std::vector<int> start_sample;
  int n_windows = 0;
  int n_channels = 0;
  int omega = 0;
};

// Per-window per-channel feature vectors, [windows x channels x 18].
struct FeatureTensor {
  std::vector<float> x;
  std::vector<int> labels;
  int n_windows = 0;
  int n_channels = 0;
  int n_features = kFeatureCount;

  float& at(int w, int c, int f) {
    return x[(static_cast<size_t>(w) * n_channels + c) * n_features + f];
  }
  float at(int w, int c, int f) const {
    return x[(static_cast<size_t>(w) * n_channels + c) * n_features + f];
  }
};

// Per-feature (min, max) recorded on the fitting partition.
struct ScaleBounds {
  std::vector<std::pair<float, float>> bounds;  // exactly n_features entries
};

struct SyntheticSpec {
  int n_classes = 4;
  int n_channels = 22;
  int n_samples = 750;
  float fs = 250.0f;
  int trials_per_class = 72;
  std::vector<std::vector<int>> erd_channels;  // per class
  float erd_depth = 0.6f;
  float noise_std = 1.0f;
  uint64_t seed = 42;

  static SyntheticSpec defaults();
  void validate() const;
};

// Background oscillation banks plus a 10 Hz rhythm that is attenuated by
// erd_depth on each class's designated channels. Deterministic per seed.
EpochSet generate_synthetic(const SyntheticSpec& spec);

// Subtracts the instantaneous channel mean at every trial and sample.
EpochSet common_average_reference(const EpochSet& e);

// Starts 0, s, 2s, ... per trial; floor((S-omega)/s)+1 windows per trial,
// trailing samples dropped; each window inherits its trial's label.
WindowSet sliding_windows(const EpochSet& e, const WindowConfig& cfg);

// Per channel: mean, variance, Hjorth mobility, Hjorth complexity,
// zero-crossing rate, normalized line length, then log absolute band power
// and relative band power in 0.5-4, 4-8, 8-13, 13-20, 20-30, 30-45 Hz.
// Band power comes from a rectangular-window periodogram.
class FeatureExtractor {
 public:
  FeatureExtractor(int omega, float fs);
  // window: [C x omega], out: [C x 18]
  void compute(const float* window, int n_channels, float* out) const;

 private:
  int omega_;
  float fs_;
  struct Band {
    int k_lo, k_hi;  // DFT bin range [k_lo, k_hi)
  };
  std::vector<Band> bands_;
  std::vector<double> cos_table_, sin_table_;  // [n_bins x omega]
  int k_min_ = 0, k_max_ = 0;
};

FeatureTensor extract_features(const WindowSet& w, float fs);

ScaleBounds fit_minmax(const FeatureTensor& train);
// (v - min) / (max - min), constant features map to 0, results clamped to [0,1].
void apply_minmax(FeatureTensor& f, const ScaleBounds& b);

// Pearson correlation between channels of the trial-averaged time series.
// Symmetric, diagonal 1, constant series guarded to 0 correlation.
std::vector<double> pearson_adjacency(const EpochSet& e);

// "EPOC1" little-endian container, bitwise round trip.
void write_epochs(const std::string& path, const EpochSet& e);
EpochSet read_epochs(const std::string& path);

// Seeded stratified split of trial indices; fraction goes to the second list.
struct SplitIndices {
  std::vector<int> first;
  std::vector<int> second;
};
SplitIndices stratified_split(const std::vector<int>& labels, int n_classes, double second_fraction,
                              uint64_t seed);

EpochSet subset_trials(const EpochSet& e, const std::vector<int>& trial_indices);

std::vector<std::string> default_channel_names(int n_channels);

uint64_t fnv1a_hash(const std::vector<int>& values);

// The full preprocessing chain: common average reference, trial-level
// stratified 80/20 train/test split, a further 80/20 train/validation split,
// windowing, feature extraction, min-max scaling fitted on the gradient-update
// partition, and the channel-correlation matrix from the training trials.
// Splitting by trial before windowing keeps windows of one trial inside one
// partition.
struct PreparedData {
  FeatureTensor train, val, test;
  ScaleBounds bounds;
  std::vector<double> pearson;  // from the training trials, after referencing
  uint64_t split_hash = 0;      // over the trial partition assignment
  int n_channels = 0;
  int n_classes = 0;
};

PreparedData prepare_pipeline(const EpochSet& raw, const WindowConfig& window, uint64_t seed,
                              double test_fraction = 0.2, double val_fraction = 0.2);

}  // namespace mieeg
