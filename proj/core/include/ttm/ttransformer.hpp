#pragma once

// Temporal transformer regressor used by the learned matrix.
//
// Input: a T x input_dim sequence (oldest step first, zero-padded at the
// front). The sequence is projected to model_dim, sinusoidal positions are
// added, a post-norm encoder stack runs self-attention over all steps, and a
// decoder stack refines the most recent step by attending over the encoder
// output. A linear head maps the decoder state to one scalar.
//
// Backpropagation is written out by hand; every op keeps the activations
// its backward pass needs in a cache struct.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ttm/random.hpp"
#include "ttm/types.hpp"

namespace ttm::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  std::size_t input_dim = kFeatureDim;
  std::size_t model_dim = 64;
  std::size_t heads = 8;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t ff_dim = 256;
  double dropout = 0.0;
  double layernorm_eps = 1e-5;
  std::size_t seq_len = 16;

  /// d=64, h=8, 2+2 layers, T=16.
  static ModelConfig desk();
  /// h=8, 6+6 layers, width 2048, dropout 0.1, eps 1e-5.
  static ModelConfig paper();
  /// d=8, h=2, 1+1 layers, T=4; small enough for exhaustive gradient checks.
  static ModelConfig tiny();

  /// Throws InvalidArgument.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttentionWeights {
  Mat wq, wk, wv, wo;
  Mat bq, bk, bv, bo;  // 1 x d
};

struct LayerNormWeights {
  Mat gamma, beta;  // 1 x d
};

struct FeedForwardWeights {
  Mat w1, b1, w2, b2;
};

struct BlockWeights {
  AttentionWeights attn;
  LayerNormWeights ln1;
  FeedForwardWeights ff;
  LayerNormWeights ln2;
};

struct NamedTensor {
  std::string name;
  Mat* tensor;
};

struct ConstNamedTensor {
  std::string name;
  const Mat* tensor;
};

struct ModelWeights {
  ModelConfig config;
  Mat input_w, input_b;
  std::vector<BlockWeights> encoder;
  std::vector<BlockWeights> decoder;
  Mat head_w, head_b;

  /// Every tensor zero, including layer-norm scales.
  static ModelWeights zeros(const ModelConfig& config);
  /// Matrices uniform in +-sqrt(6 / (fan_in + fan_out)); biases 0; scales 1.
  static ModelWeights initialize(const ModelConfig& config, std::uint64_t seed);

  /// All tensors in serialization order.
  std::vector<NamedTensor> tensors();
  [[nodiscard]] std::vector<ConstNamedTensor> tensors() const;
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const ModelWeights& a, const ModelWeights& b);
};

/// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(t / 10000^(2i/d)).
/// Throws OddDim for odd d, InvalidArgument for zero sizes.
Mat positional_encoding(std::size_t steps, std::size_t dim);

/// Row-wise softmax(Q_h K_h^T / sqrt(d_k)) V_h for each head, heads
/// concatenated. Q, K and V are already projected. Optionally returns the
/// per-head probability matrices. Throws ShapeMismatch.
Mat attention_heads(const Mat& q, const Mat& k, const Mat& v, std::size_t heads,
                    std::vector<Mat>* probabilities = nullptr);

/// Projects queries from `query_in` and keys/values from `memory`, applies
/// attention_heads, then the output projection.
Mat multi_head_attention(const Mat& query_in, const Mat& memory, const AttentionWeights& w,
                         std::size_t heads);

/// Normalizes each row to zero mean and unit (biased) variance, then scales
/// and shifts.
Mat layer_norm(const Mat& x, const LayerNormWeights& w, double eps);

/// Seeded inverted-dropout masks (entries 0 or 1/(1-p)).
class DropoutSampler {
 public:
  DropoutSampler(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}
  Mat mask(Eigen::Index rows, Eigen::Index cols);
  [[nodiscard]] double rate() const noexcept { return rate_; }

 private:
  double rate_;
  Rng rng_;
};

/// Inference. `input` is seq_len x input_dim. Throws ShapeMismatch and
/// NonFiniteWeights.
double forward(const ModelWeights& weights, const Mat& input);

/// Training-mode forward with dropout. Pass nullptr to disable dropout.
double forward_train(const ModelWeights& weights, const Mat& input, DropoutSampler* dropout);

/// Sequence dataset. Feature frames are stored once and referenced by index
/// so that overlapping history windows do not duplicate memory.
class Dataset {
 public:
  static constexpr std::int64_t kPad = -1;

  struct Sample {
    std::vector<std::int64_t> steps;  // frame indices, kPad for zero rows
    double label = 0.0;
  };

  Dataset(std::size_t seq_len, std::size_t feature_dim);

  [[nodiscard]] std::size_t seq_len() const noexcept { return seq_len_; }
  [[nodiscard]] std::size_t feature_dim() const noexcept { return feature_dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }
  [[nodiscard]] const Sample& sample(std::size_t i) const { return samples_.at(i); }
  [[nodiscard]] std::span<const double> frame(std::int64_t index) const;

  /// Adds a frame and returns its index. Identical frames are shared.
  std::int64_t add_frame(std::span<const double> values);
  /// `steps` may be shorter than seq_len; it is padded at the front.
  void add_sample(std::span<const std::int64_t> steps, double label);

  /// seq_len x feature_dim matrix for sample i.
  [[nodiscard]] Mat sequence(std::size_t i) const;
  [[nodiscard]] std::vector<double> labels() const;
  /// New dataset holding the given samples in the given order.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;

  /// One sample per line: `label;step_1;...;step_T`, each step being
  /// feature_dim comma-separated numbers in shortest round-trip form.
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// Throws EmptyDataset for a file without samples, ShapeMismatch on
  /// inconsistent lines, Io when unreadable.
  static Dataset read(std::istream& in);
  static Dataset load(const std::filesystem::path& path);

 private:
  std::size_t seq_len_;
  std::size_t feature_dim_;
  std::vector<double> frames_;  // row-major frame storage
  std::size_t frame_count_ = 0;
  std::unordered_multimap<std::uint64_t, std::int64_t> frame_index_;  // content hash -> index
  std::vector<Sample> samples_;
};

/// n samples of Gaussian frames with uniform labels in [-1, 1]; every
/// sample uses distinct frames. For gradient checks and benchmarks.
Dataset random_dataset(std::size_t n, std::size_t seq_len, std::size_t feature_dim, std::uint64_t seed);

/// Mean over the batch of (prediction - label)^2 and its exact gradient.
struct GradientResult {
  double loss = 0.0;
  ModelWeights grads;
};

/// Throws EmptyDataset for an empty batch.
GradientResult gradients(const ModelWeights& weights, const Dataset& data,
                         std::span<const std::size_t> batch, DropoutSampler* dropout = nullptr);

/// Mean squared error of inference predictions over the given samples.
double evaluate_mse(const ModelWeights& weights, const Dataset& data,
                    std::span<const std::size_t> indices);

struct GradCheckEntry {
  std::string tensor;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

/// Compares the analytic gradient of the batch loss with central
/// differences, entry by entry, for every tensor. Relative error is
/// |a - n| / max(|a| + |n|, floor), so entries where both sides vanish
/// do not dominate.
GradCheckReport gradient_check(const ModelWeights& weights, const Dataset& data,
                               std::span<const std::size_t> batch, double eps = 1e-4,
                               double floor = 1e-7);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;

  /// lr 1e-3.
  static TrainConfig desk();
  /// lr 1e-5.
  static TrainConfig paper();

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_mse = 0.0;
  double test_mse = 0.0;
};

/// Stops once the monitored loss has not improved for `patience` epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  /// Records the loss of `epoch`; returns true when training should stop.
  bool update(std::size_t epoch, double loss);
  /// True if the most recent update set a new best.
  [[nodiscard]] bool improved() const noexcept { return improved_; }
  [[nodiscard]] std::size_t best_epoch() const noexcept { return best_epoch_; }
  [[nodiscard]] double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool has_best_ = false;
  bool improved_ = false;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, first `train_fraction` of the permutation is train. Both
/// sides are nonempty whenever the dataset has at least two samples.
DataSplit split_dataset(std::size_t n, double train_fraction, std::uint64_t seed);

struct TrainResult {
  ModelWeights weights;  // parameters of the best epoch
  std::vector<EpochRecord> history;
  DataSplit split;
  std::size_t best_epoch = 0;
  std::size_t last_epoch = 0;
  double final_train_mse = 0.0;  // best weights on the train split
  double final_test_mse = 0.0;
};

/// Minibatch SGD on mean squared error with early stopping on test MSE.
/// Throws EmptyDataset.
TrainResult train(ModelWeights initial, const TrainConfig& config, const Dataset& data);

/// Little-endian binary: magic, version, config header, tensors in
/// declaration order, trailing FNV-1a checksum.
void save_weights(const ModelWeights& weights, const std::filesystem::path& path);
void write_weights(const ModelWeights& weights, std::ostream& out);
/// Throws Io, ChecksumMismatch, VersionMismatch, ShapeMismatch.
ModelWeights load_weights(const std::filesystem::path& path);
ModelWeights read_weights(std::istream& in);
/// Also requires the stored config to equal `expected` (ShapeMismatch otherwise).
ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& expected);

inline constexpr std::uint32_t kWeightFileVersion = 1;

}  // namespace ttm::nn
