#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "ttm/error.hpp"
#include "ttm/random.hpp"
#include "ttm/ttransformer.hpp"

namespace ttm::nn {
namespace {

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const Mat& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  }
  return g;
}

// Straight-line reference for the forward pass, written with plain loops.
struct Oracle {
  const ModelWeights& w;

  static Grid matmul(const Grid& a, const Mat& b) {
    Grid out(a.size(), std::vector<double>(static_cast<std::size_t>(b.cols()), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < a[i].size(); ++k) s += a[i][k] * b(static_cast<Eigen::Index>(k), j);
        out[i][j] = s;
      }
    }
    return out;
  }

  static Grid add_bias(Grid a, const Mat& b) {
    for (auto& row : a) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += b(0, static_cast<Eigen::Index>(j));
    }
    return a;
  }

  static Grid add(Grid a, const Grid& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    }
    return a;
  }

  Grid attention(const Grid& xq, const Grid& xkv, const AttentionWeights& a) const {
    const Grid q = add_bias(matmul(xq, a.wq), a.bq);
    const Grid k = add_bias(matmul(xkv, a.wk), a.bk);
    const Grid v = add_bias(matmul(xkv, a.wv), a.bv);
    const std::size_t d = q[0].size();
    const std::size_t heads = w.config.heads;
    const std::size_t dk = d / heads;
    Grid concat(q.size(), std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<double> s(k.size());
        double mx = -1e300;
        for (std::size_t j = 0; j < k.size(); ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < dk; ++c) dot += q[i][h * dk + c] * k[j][h * dk + c];
          s[j] = dot / std::sqrt(static_cast<double>(dk));
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (double& x : s) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < k.size(); ++j) {
          for (std::size_t c = 0; c < dk; ++c) concat[i][h * dk + c] += s[j] / z * v[j][h * dk + c];
        }
      }
    }
    return add_bias(matmul(concat, a.wo), a.bo);
  }

  Grid layer_norm(Grid x, const LayerNormWeights& ln) const {
    for (auto& row : x) {
      double mean = 0.0;
      for (double v : row) mean += v;
      mean /= static_cast<double>(row.size());
      double var = 0.0;
      for (double v : row) var += (v - mean) * (v - mean);
      var /= static_cast<double>(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = (row[j] - mean) / std::sqrt(var + w.config.layernorm_eps) * ln.gamma(0, static_cast<Eigen::Index>(j)) +
                 ln.beta(0, static_cast<Eigen::Index>(j));
      }
    }
    return x;
  }

  Grid block(const Grid& x, const Grid& memory, const BlockWeights& b) const {
    const Grid n1 = layer_norm(add(x, attention(x, memory, b.attn)), b.ln1);
    Grid hidden = add_bias(matmul(n1, b.ff.w1), b.ff.b1);
    for (auto& row : hidden) {
      for (double& v : row) v = std::max(v, 0.0);
    }
    const Grid f = add_bias(matmul(hidden, b.ff.w2), b.ff.b2);
    return layer_norm(add(n1, f), b.ln2);
  }

  double run(const Mat& input) const {
    const std::size_t steps = w.config.seq_len;
    const std::size_t d = w.config.model_dim;
    Grid e = add_bias(matmul(to_grid(input), w.input_w), w.input_b);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t i = 0; i < d; i += 2) {
        const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
        e[t][i] += std::sin(angle);
        e[t][i + 1] += std::cos(angle);
      }
    }
    Grid memory = e;
    for (const auto& b : w.encoder) memory = block(memory, memory, b);
    Grid state{e.back()};
    for (const auto& b : w.decoder) state = block(state, memory, b);
    return matmul(state, w.head_w)[0][0] + w.head_b(0, 0);
  }
};

Mat random_input(const ModelConfig& cfg, std::uint64_t seed, std::size_t pad_rows = 0) {
  Rng rng(seed);
  Mat x = Mat::Zero(static_cast<Eigen::Index>(cfg.seq_len), static_cast<Eigen::Index>(cfg.input_dim));
  for (Eigen::Index r = static_cast<Eigen::Index>(pad_rows); r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.gaussian();
  }
  return x;
}

std::vector<std::size_t> all_indices(const Dataset& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

TEST(PositionalEncoding, FirstRowAlternates) {
  const Mat pe = positional_encoding(4, 8);
  for (Eigen::Index c = 0; c < 8; ++c) EXPECT_EQ(pe(0, c), c % 2 == 0 ? 0.0 : 1.0);
}

TEST(PositionalEncoding, EntriesInUnitRange) {
  const Mat pe = positional_encoding(64, 32);
  EXPECT_LE(pe.maxCoeff(), 1.0);
  EXPECT_GE(pe.minCoeff(), -1.0);
}

TEST(PositionalEncoding, SpotValues) {
  const Mat pe = positional_encoding(4, 8);
  EXPECT_NEAR(pe(1, 0), std::sin(1.0), 1e-9);
  EXPECT_NEAR(pe(1, 1), std::cos(1.0), 1e-9);
  EXPECT_NEAR(pe(2, 2), std::sin(0.2), 1e-9);    // 2 / 10000^(2/8)
  EXPECT_NEAR(pe(3, 5), std::cos(0.03), 1e-9);   // 3 / 10000^(4/8)
  EXPECT_NEAR(pe(3, 7), std::cos(0.003), 1e-9);  // 3 / 10000^(6/8)
}

TEST(PositionalEncoding, OddDimensionThrows) {
  try {
    (void)positional_encoding(4, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OddDim);
  }
}

TEST(Attention, UniformScoresAverageValues) {
  Mat q = Mat::Zero(2, 4);
  Mat k = Mat::Ones(3, 4);
  Mat v(3, 4);
  v << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const Mat out = attention_heads(q, k, v, 2);
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) EXPECT_NEAR(out(r, c), v.col(c).mean(), 1e-12);
  }
}

TEST(Attention, TwoByTwoHandExample) {
  Mat q(2, 2), k(2, 2), v(2, 2);
  q << 1, 0, 0, 1;
  k << 1, 0, 0, 1;
  v << 1, 2, 3, 4;
  const Mat out = attention_heads(q, k, v, 1);
  // Scores [[1/sqrt2, 0], [0, 1/sqrt2]]; softmax of (a, 0) is (e^a, 1) / (e^a + 1).
  const double a = 1.0 / std::sqrt(2.0);
  const double p = std::exp(a) / (std::exp(a) + 1.0);
  EXPECT_NEAR(out(0, 0), p * 1 + (1 - p) * 3, 1e-9);
  EXPECT_NEAR(out(0, 1), p * 2 + (1 - p) * 4, 1e-9);
  EXPECT_NEAR(out(1, 0), (1 - p) * 1 + p * 3, 1e-9);
  EXPECT_NEAR(out(1, 1), (1 - p) * 2 + p * 4, 1e-9);
}

TEST(Attention, SoftmaxRowsSumToOne) {
  Rng rng(4);
  Mat q(5, 8), k(7, 8), v(7, 8);
  for (Mat* m : {&q, &k, &v}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.gaussian() * 3.0;
  }
  std::vector<Mat> probs;
  (void)attention_heads(q, k, v, 4, &probs);
  ASSERT_EQ(probs.size(), 4u);
  for (const auto& p : probs) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
  }
}

TEST(Attention, ShapeMismatchThrows) {
  try {
    (void)attention_heads(Mat::Zero(2, 6), Mat::Zero(2, 6), Mat::Zero(2, 6), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(LayerNorm, NormalizesRows) {
  Rng rng(6);
  Mat x(6, 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian() * 5.0 + 2.0;
  LayerNormWeights ln{Mat::Ones(1, 16), Mat::Zero(1, 16)};
  const Mat y = layer_norm(x, ln, 1e-5);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double mean = y.row(r).mean();
    const double var = (y.row(r).array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Forward, ZeroWeightsGiveZero) {
  const auto cfg = ModelConfig::tiny();
  EXPECT_EQ(forward(ModelWeights::zeros(cfg), random_input(cfg, 1)), 0.0);
}

TEST(Forward, RepeatedCallsAreIdentical) {
  const auto cfg = ModelConfig::tiny();
  const auto w = ModelWeights::initialize(cfg, 2);
  const Mat x = random_input(cfg, 3);
  EXPECT_EQ(forward(w, x), forward(w, x));
}

TEST(Forward, TinyMatchesStraightLineOracle) {
  const auto cfg = ModelConfig::tiny();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto w = ModelWeights::initialize(cfg, seed);
    Rng rng(seed + 100);
    // Nonzero biases and norm parameters so every term is exercised.
    for (auto& t : w.tensors()) {
      if (t.tensor->rows() == 1) {
        for (Eigen::Index i = 0; i < t.tensor->size(); ++i) t.tensor->data()[i] += rng.uniform(-0.5, 0.5);
      }
    }
    const Mat x = random_input(cfg, seed + 200, seed % 2);
    EXPECT_NEAR(forward(w, x), Oracle{w}.run(x), 1e-6) << "seed " << seed;
  }
}

TEST(Forward, WrongShapeThrows) {
  const auto cfg = ModelConfig::tiny();
  try {
    (void)forward(ModelWeights::initialize(cfg, 1), Mat::Zero(3, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(Forward, NonFiniteWeightsThrow) {
  const auto cfg = ModelConfig::tiny();
  auto w = ModelWeights::initialize(cfg, 1);
  w.head_b(0, 0) = std::nan("");
  try {
    (void)forward(w, random_input(cfg, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteWeights);
  }
}

TEST(Gradients, CentralDifferencesOnEveryTensor) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = ModelConfig::tiny();
  const auto w = ModelWeights::initialize(cfg, 1);
  const auto data = random_dataset(3, cfg.seq_len, cfg.input_dim, 2);
  const auto idx = all_indices(data);
  const auto report = gradient_check(w, data, idx, 1e-4);
  EXPECT_EQ(report.tensors.size(), w.tensors().size());
  EXPECT_EQ(report.checked, w.parameter_count());
  for (const auto& t : report.tensors) EXPECT_LT(t.max_rel_error, 1e-3) << t.tensor;
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_LT(elapsed.count(), 60.0);
}

TEST(Gradients, ZeroResidualGivesZeroGradients) {
  const auto cfg = ModelConfig::tiny();
  const auto w = ModelWeights::initialize(cfg, 5);
  const auto base = random_dataset(4, cfg.seq_len, cfg.input_dim, 6);
  Dataset exact(cfg.seq_len, cfg.input_dim);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<std::int64_t> steps;
    for (auto f : base.sample(i).steps) steps.push_back(exact.add_frame(base.frame(f)));
    exact.add_sample(steps, forward(w, base.sequence(i)));
  }
  const auto idx = all_indices(exact);
  const auto g = gradients(w, exact, idx);
  EXPECT_LT(g.loss, 1e-24);
  for (const auto& t : g.grads.tensors()) EXPECT_LT(t.tensor->cwiseAbs().maxCoeff(), 1e-9) << t.name;
}

TEST(Gradients, HeadBiasIsTwiceTheResidual) {
  const auto cfg = ModelConfig::tiny();
  const auto w = ModelWeights::initialize(cfg, 8);
  const auto data = random_dataset(1, cfg.seq_len, cfg.input_dim, 9);
  const std::vector<std::size_t> one{0};
  const double y = forward(w, data.sequence(0));
  const auto g = gradients(w, data, one);
  EXPECT_NEAR(g.grads.head_b(0, 0), 2.0 * (y - data.sample(0).label), 1e-12);
  EXPECT_NEAR(g.loss, (y - data.sample(0).label) * (y - data.sample(0).label), 1e-12);
}

TEST(Gradients, BatchGradientIsMeanOfSingles) {
  const auto cfg = ModelConfig::tiny();
  const auto w = ModelWeights::initialize(cfg, 10);
  const auto data = random_dataset(3, cfg.seq_len, cfg.input_dim, 11);
  const auto batch = gradients(w, data, all_indices(data));
  ModelWeights sum = ModelWeights::zeros(cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::vector<std::size_t> one{i};
    const auto g = gradients(w, data, one);
    auto dst = sum.tensors();
    const auto src = g.grads.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) *dst[t].tensor += *src[t].tensor / 3.0;
  }
  const auto a = batch.grads.tensors();
  const auto b = sum.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_LT((*a[t].tensor - *b[t].tensor).cwiseAbs().maxCoeff(), 1e-12) << a[t].name;
  }
}

TEST(Gradients, EmptyBatchThrows) {
  const auto cfg = ModelConfig::tiny();
  const auto data = random_dataset(1, cfg.seq_len, cfg.input_dim, 1);
  try {
    (void)gradients(ModelWeights::zeros(cfg), data, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
}

TEST(EarlyStopping, StopsAfterPatienceWithoutImprovement) {
  EarlyStopping s(10);
  EXPECT_FALSE(s.update(1, 1.0));
  for (std::size_t e = 2; e <= 10; ++e) EXPECT_FALSE(s.update(e, 1.0 + static_cast<double>(e)));
  EXPECT_TRUE(s.update(11, 20.0));
  EXPECT_EQ(s.best_epoch(), 1u);
}

TEST(Split, DisjointCoverNonempty) {
  const auto s = split_dataset(10, 0.8, 3);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  const auto tiny = split_dataset(2, 0.99, 1);
  EXPECT_EQ(tiny.train.size(), 1u);
  EXPECT_EQ(tiny.test.size(), 1u);
}

Dataset constant_label_dataset(std::size_t n, const ModelConfig& cfg, double label) {
  const auto base = random_dataset(n, cfg.seq_len, cfg.input_dim, 21);
  Dataset d(cfg.seq_len, cfg.input_dim);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<std::int64_t> steps;
    for (auto f : base.sample(i).steps) steps.push_back(d.add_frame(base.frame(f)));
    d.add_sample(steps, label);
  }
  return d;
}

TEST(Train, ConstantLabelsFitOnDeskConfig) {
  auto cfg = ModelConfig::desk();
  cfg.seq_len = 4;
  const auto data = constant_label_dataset(40, cfg, 2.5);
  auto tc = TrainConfig::desk();
  tc.max_epochs = 200;
  tc.patience = 200;
  const auto r = train(ModelWeights::initialize(cfg, 1), tc, data);
  double best = r.history.front().train_mse;
  std::size_t reached = 0;
  for (const auto& e : r.history) {
    if (e.train_mse < 1e-3 && reached == 0) reached = e.epoch;
    best = std::min(best, e.train_mse);
  }
  EXPECT_GT(reached, 0u);
  EXPECT_LE(reached, 200u);
  for (std::size_t e = 1; e < r.history.size() && r.history[e - 1].train_mse > 1e-3; ++e) {
    EXPECT_LT(r.history[e].train_mse, r.history[e - 1].train_mse) << "epoch " << e;
  }
}

TEST(Train, SameSeedSameHistory) {
  auto cfg = ModelConfig::tiny();
  const auto data = random_dataset(30, cfg.seq_len, cfg.input_dim, 2);
  auto tc = TrainConfig::desk();
  tc.max_epochs = 5;
  const auto a = train(ModelWeights::initialize(cfg, 1), tc, data);
  const auto b = train(ModelWeights::initialize(cfg, 1), tc, data);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_mse, b.history[i].train_mse);
    EXPECT_EQ(a.history[i].test_mse, b.history[i].test_mse);
  }
  EXPECT_TRUE(a.weights == b.weights);
}

TEST(Train, ReturnsBestEpochWeights) {
  auto cfg = ModelConfig::tiny();
  const auto data = random_dataset(40, cfg.seq_len, cfg.input_dim, 3);
  auto tc = TrainConfig::desk();
  tc.learning_rate = 5e-2;
  tc.max_epochs = 60;
  tc.patience = 3;
  const auto r = train(ModelWeights::initialize(cfg, 2), tc, data);
  EXPECT_LE(r.last_epoch - r.best_epoch, tc.patience);
  EXPECT_EQ(r.final_test_mse, r.history.at(r.best_epoch).test_mse);
  EXPECT_EQ(r.final_train_mse, r.history.at(r.best_epoch).train_mse);
}

TEST(Train, DropoutTrainingIsReproducible) {
  auto cfg = ModelConfig::tiny();
  cfg.dropout = 0.1;
  const auto data = random_dataset(20, cfg.seq_len, cfg.input_dim, 4);
  auto tc = TrainConfig::desk();
  tc.max_epochs = 3;
  const auto a = train(ModelWeights::initialize(cfg, 1), tc, data);
  const auto b = train(ModelWeights::initialize(cfg, 1), tc, data);
  EXPECT_TRUE(a.weights == b.weights);
}

TEST(Train, TooSmallDatasetThrows) {
  auto cfg = ModelConfig::tiny();
  const auto data = random_dataset(1, cfg.seq_len, cfg.input_dim, 4);
  try {
    (void)train(ModelWeights::initialize(cfg, 1), TrainConfig::desk(), data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
}

class WeightFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("ttm_weights_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(WeightFile, RoundTripIsExact) {
  const auto w = ModelWeights::initialize(ModelConfig::tiny(), 3);
  save_weights(w, dir_ / "w.bin");
  EXPECT_TRUE(load_weights(dir_ / "w.bin") == w);
}

TEST_F(WeightFile, CorruptedByteIsDetected) {
  save_weights(ModelWeights::initialize(ModelConfig::tiny(), 3), dir_ / "w.bin");
  {
    std::fstream f(dir_ / "w.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    f.put('\x5a');
  }
  try {
    (void)load_weights(dir_ / "w.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChecksumMismatch);
  }
}

TEST_F(WeightFile, WrongVersionIsDetected) {
  std::ostringstream out;
  write_weights(ModelWeights::initialize(ModelConfig::tiny(), 3), out);
  std::string bytes = out.str();
  ASSERT_EQ(bytes.substr(0, 4), "TTMW");
  bytes[4] = '\x07';  // low byte of the version after the magic
  std::string body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t sum = fnv1a64(body);
  for (int i = 0; i < 8; ++i) body.push_back(static_cast<char>((sum >> (8 * i)) & 0xFF));
  std::istringstream in(body);
  try {
    (void)read_weights(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::VersionMismatch);
  }
}

TEST_F(WeightFile, ConfigMismatchIsDetected) {
  save_weights(ModelWeights::initialize(ModelConfig::tiny(), 3), dir_ / "w.bin");
  try {
    (void)load_weights(dir_ / "w.bin", ModelConfig::desk());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST_F(WeightFile, MissingFileIsIo) {
  try {
    (void)load_weights(dir_ / "none.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}

TEST(DatasetFile, RoundTripAndLineFormat) {
  Dataset d(2, 3);
  const std::vector<double> f1{1.0, 0.5, -2.0};
  const std::vector<double> f2{0.0, 0.1, 3.0};
  const auto a = d.add_frame(f1);
  const auto b = d.add_frame(f2);
  const std::vector<std::int64_t> both{a, b};
  const std::vector<std::int64_t> last{b};
  d.add_sample(both, 4.0);
  d.add_sample(last, 1.5);
  std::ostringstream out;
  d.write(out);
  EXPECT_EQ(out.str(), "4;1,0.5,-2;0,0.1,3\n1.5;0,0,0;0,0.1,3\n");
  std::istringstream in(out.str());
  const auto r = Dataset::read(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.sequence(0), d.sequence(0));
  EXPECT_EQ(r.sequence(1), d.sequence(1));
  EXPECT_EQ(r.labels(), d.labels());
}

TEST(DatasetFile, SharedFramesAreStoredOnce) {
  Dataset d(2, 2);
  const std::vector<double> f{1.0, 2.0};
  EXPECT_EQ(d.add_frame(f), d.add_frame(f));
}

TEST(DatasetFile, InconsistentLineThrows) {
  std::istringstream in("1;1,2;3,4\n2;1,2\n");
  try {
    (void)Dataset::read(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(DatasetFile, EmptyFileThrows) {
  std::istringstream in("");
  try {
    (void)Dataset::read(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
}

TEST(DatasetFile, SubsetKeepsOrderAndContent) {
  const auto d = random_dataset(5, 3, 4, 1);
  const std::vector<std::size_t> pick{3, 1};
  const auto s = d.subset(pick);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.sequence(0), d.sequence(3));
  EXPECT_EQ(s.sample(1).label, d.sample(1).label);
}

}  // namespace
}  // namespace ttm::nn
