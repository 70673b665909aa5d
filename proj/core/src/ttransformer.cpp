#include "ttm/ttransformer.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "ttm/error.hpp"

namespace ttm::nn {

namespace {

using Vec = Eigen::VectorXd;

Mat row_zeros(std::size_t n) { return Mat::Zero(1, static_cast<Eigen::Index>(n)); }

Mat uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

BlockWeights zero_block(const ModelConfig& c) {
  const auto d = static_cast<Eigen::Index>(c.model_dim);
  const auto f = static_cast<Eigen::Index>(c.ff_dim);
  BlockWeights b;
  b.attn.wq = b.attn.wk = b.attn.wv = b.attn.wo = Mat::Zero(d, d);
  b.attn.bq = b.attn.bk = b.attn.bv = b.attn.bo = Mat::Zero(1, d);
  b.ln1.gamma = b.ln1.beta = b.ln2.gamma = b.ln2.beta = Mat::Zero(1, d);
  b.ff.w1 = Mat::Zero(d, f);
  b.ff.b1 = Mat::Zero(1, f);
  b.ff.w2 = Mat::Zero(f, d);
  b.ff.b2 = Mat::Zero(1, d);
  return b;
}

BlockWeights random_block(const ModelConfig& c, Rng& rng) {
  BlockWeights b = zero_block(c);
  b.attn.wq = uniform_matrix(c.model_dim, c.model_dim, rng);
  b.attn.wk = uniform_matrix(c.model_dim, c.model_dim, rng);
  b.attn.wv = uniform_matrix(c.model_dim, c.model_dim, rng);
  b.attn.wo = uniform_matrix(c.model_dim, c.model_dim, rng);
  b.ff.w1 = uniform_matrix(c.model_dim, c.ff_dim, rng);
  b.ff.w2 = uniform_matrix(c.ff_dim, c.model_dim, rng);
  b.ln1.gamma.setOnes();
  b.ln2.gamma.setOnes();
  return b;
}

template <typename Tensor, typename Weights>
void collect(Weights& w, std::vector<Tensor>& out) {
  out.push_back({"input_w", &w.input_w});
  out.push_back({"input_b", &w.input_b});
  auto add_block = [&](auto& b, const std::string& p) {
    out.push_back({p + ".attn.wq", &b.attn.wq});
    out.push_back({p + ".attn.bq", &b.attn.bq});
    out.push_back({p + ".attn.wk", &b.attn.wk});
    out.push_back({p + ".attn.bk", &b.attn.bk});
    out.push_back({p + ".attn.wv", &b.attn.wv});
    out.push_back({p + ".attn.bv", &b.attn.bv});
    out.push_back({p + ".attn.wo", &b.attn.wo});
    out.push_back({p + ".attn.bo", &b.attn.bo});
    out.push_back({p + ".ln1.gamma", &b.ln1.gamma});
    out.push_back({p + ".ln1.beta", &b.ln1.beta});
    out.push_back({p + ".ff.w1", &b.ff.w1});
    out.push_back({p + ".ff.b1", &b.ff.b1});
    out.push_back({p + ".ff.w2", &b.ff.w2});
    out.push_back({p + ".ff.b2", &b.ff.b2});
    out.push_back({p + ".ln2.gamma", &b.ln2.gamma});
    out.push_back({p + ".ln2.beta", &b.ln2.beta});
  };
  for (std::size_t i = 0; i < w.encoder.size(); ++i) add_block(w.encoder[i], "encoder." + std::to_string(i));
  for (std::size_t i = 0; i < w.decoder.size(); ++i) add_block(w.decoder[i], "decoder." + std::to_string(i));
  out.push_back({"head_w", &w.head_w});
  out.push_back({"head_b", &w.head_b});
}

// ---- forward caches --------------------------------------------------------

struct AttentionCache {
  Mat query_in, memory, q, k, v, concat;
  std::vector<Mat> probs;
};

struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

struct FeedForwardCache {
  Mat x, pre, act;
};

struct BlockCache {
  AttentionCache attn;
  LayerNormCache ln1, ln2;
  FeedForwardCache ff;
  Mat mask_attn, mask_ff;
  bool masked = false;
};

struct ForwardCache {
  Mat mask_embed;
  bool masked = false;
  std::vector<BlockCache> encoder, decoder;
  Mat decoder_state;
};

const Mat& cached_positional_encoding(std::size_t steps, std::size_t dim) {
  thread_local std::map<std::pair<std::size_t, std::size_t>, Mat> cache;
  auto key = std::make_pair(steps, dim);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, positional_encoding(steps, dim)).first;
  return it->second;
}

// Rows of xq and xkv are stacked per sequence: `groups` equal-sized blocks,
// and each query block attends only to its own memory block.
Mat attention_forward(const Mat& xq, const Mat& xkv, const AttentionWeights& w, std::size_t heads,
                      Eigen::Index groups, AttentionCache* cache) {
  Mat q = (xq * w.wq).rowwise() + w.bq.row(0);
  Mat k = (xkv * w.wk).rowwise() + w.bk.row(0);
  Mat v = (xkv * w.wv).rowwise() + w.bv.row(0);
  const Eigen::Index qn = q.rows() / groups;
  const Eigen::Index kn = k.rows() / groups;
  Mat concat(q.rows(), q.cols());
  std::vector<Mat> probs;
  std::vector<Mat> group_probs;
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    concat.middleRows(gi * qn, qn) =
        attention_heads(q.middleRows(gi * qn, qn), k.middleRows(gi * kn, kn), v.middleRows(gi * kn, kn), heads,
                        cache ? &group_probs : nullptr);
    if (cache) std::move(group_probs.begin(), group_probs.end(), std::back_inserter(probs));
  }
  Mat out = (concat * w.wo).rowwise() + w.bo.row(0);
  if (cache) {
    cache->query_in = xq;
    cache->memory = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->probs = std::move(probs);
  }
  return out;
}

// Returns (d query_in, d memory).
std::pair<Mat, Mat> attention_backward(const Mat& dout, const AttentionWeights& w, std::size_t heads,
                                       Eigen::Index groups, const AttentionCache& c, AttentionWeights& g) {
  g.wo.noalias() += c.concat.transpose() * dout;
  g.bo += dout.colwise().sum();
  const Mat dconcat = dout * w.wo.transpose();

  const Eigen::Index d = c.q.cols();
  const Eigen::Index dk = d / static_cast<Eigen::Index>(heads);
  const Eigen::Index qn = c.q.rows() / groups;
  const Eigen::Index kn = c.k.rows() / groups;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Mat dq(c.q.rows(), d);
  Mat dkm(c.k.rows(), d);
  Mat dv(c.v.rows(), d);
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    for (std::size_t h = 0; h < heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dk;
      const Mat& p = c.probs[static_cast<std::size_t>(gi) * heads + h];
      const auto dch = dconcat.block(gi * qn, off, qn, dk);
      const Mat dp = dch * c.v.block(gi * kn, off, kn, dk).transpose();
      dv.block(gi * kn, off, kn, dk).noalias() = p.transpose() * dch;
      const Vec row_dot = (dp.array() * p.array()).rowwise().sum();
      const Mat ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
      dq.block(gi * qn, off, qn, dk).noalias() = ds * c.k.block(gi * kn, off, kn, dk);
      dkm.block(gi * kn, off, kn, dk).noalias() = ds.transpose() * c.q.block(gi * qn, off, qn, dk);
    }
  }
  g.wq.noalias() += c.query_in.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk.noalias() += c.memory.transpose() * dkm;
  g.bk += dkm.colwise().sum();
  g.wv.noalias() += c.memory.transpose() * dv;
  g.bv += dv.colwise().sum();
  Mat dxq = dq * w.wq.transpose();
  Mat dmem = dkm * w.wk.transpose();
  dmem.noalias() += dv * w.wv.transpose();
  return {std::move(dxq), std::move(dmem)};
}

Mat layer_norm_forward(const Mat& x, const LayerNormWeights& w, double eps, LayerNormCache* cache) {
  const Vec mean = x.rowwise().mean();
  const Mat centered = x.colwise() - mean;
  const Vec var = centered.array().square().rowwise().mean();
  const Vec inv_std = (var.array() + eps).rsqrt();
  Mat xhat = (centered.array().colwise() * inv_std.array()).matrix();
  Mat y = ((xhat.array().rowwise() * w.gamma.row(0).array()).rowwise() + w.beta.row(0).array())
              .matrix();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const LayerNormWeights& w, const LayerNormCache& c,
                        LayerNormWeights& g) {
  g.gamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g.beta += dy.colwise().sum();
  const Mat dxhat = (dy.array().rowwise() * w.gamma.row(0).array()).matrix();
  const Vec m1 = dxhat.rowwise().mean();
  const Vec m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  const Mat inner =
      ((dxhat.colwise() - m1).array() - (c.xhat.array().colwise() * m2.array())).matrix();
  return (inner.array().colwise() * c.inv_std.array()).matrix();
}

Mat feed_forward_forward(const Mat& x, const FeedForwardWeights& w, FeedForwardCache* cache) {
  Mat pre = (x * w.w1).rowwise() + w.b1.row(0);
  Mat act = pre.cwiseMax(0.0);
  Mat out = (act * w.w2).rowwise() + w.b2.row(0);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

Mat feed_forward_backward(const Mat& dout, const FeedForwardWeights& w, const FeedForwardCache& c,
                          FeedForwardWeights& g) {
  g.w2.noalias() += c.act.transpose() * dout;
  g.b2 += dout.colwise().sum();
  Mat dpre = dout * w.w2.transpose();
  dpre = (c.pre.array() > 0.0).select(dpre, 0.0);
  g.w1.noalias() += c.x.transpose() * dpre;
  g.b1 += dpre.colwise().sum();
  return dpre * w.w1.transpose();
}

// Post-norm block. `memory` == nullptr means self-attention.
Mat block_forward(const Mat& x, const Mat* memory, const BlockWeights& w, const ModelConfig& cfg,
                  Eigen::Index groups, DropoutSampler* dropout, BlockCache* cache) {
  const bool drop = dropout && dropout->rate() > 0.0;
  Mat a = attention_forward(x, memory ? *memory : x, w.attn, cfg.heads, groups,
                            cache ? &cache->attn : nullptr);
  if (drop) {
    Mat m = dropout->mask(a.rows(), a.cols());
    a = a.cwiseProduct(m);
    if (cache) cache->mask_attn = std::move(m);
  }
  Mat n1 = layer_norm_forward(x + a, w.ln1, cfg.layernorm_eps, cache ? &cache->ln1 : nullptr);
  Mat f = feed_forward_forward(n1, w.ff, cache ? &cache->ff : nullptr);
  if (drop) {
    Mat m = dropout->mask(f.rows(), f.cols());
    f = f.cwiseProduct(m);
    if (cache) cache->mask_ff = std::move(m);
  }
  if (cache) cache->masked = drop;
  return layer_norm_forward(n1 + f, w.ln2, cfg.layernorm_eps, cache ? &cache->ln2 : nullptr);
}

struct BlockGrad {
  Mat dx;
  Mat dmemory;  // empty for self-attention blocks
};

BlockGrad block_backward(const Mat& dout, const BlockWeights& w, const ModelConfig& cfg, Eigen::Index groups,
                         const BlockCache& c, BlockWeights& g, bool self_attention) {
  const Mat dr2 = layer_norm_backward(dout, w.ln2, c.ln2, g.ln2);
  const Mat df = c.masked ? Mat(dr2.cwiseProduct(c.mask_ff)) : dr2;
  const Mat dn1 = dr2 + feed_forward_backward(df, w.ff, c.ff, g.ff);
  const Mat dr1 = layer_norm_backward(dn1, w.ln1, c.ln1, g.ln1);
  const Mat da = c.masked ? Mat(dr1.cwiseProduct(c.mask_attn)) : dr1;
  auto [dxq, dmem] = attention_backward(da, w.attn, cfg.heads, groups, c.attn, g.attn);
  if (self_attention) return {dr1 + dxq + dmem, Mat()};
  return {dr1 + dxq, std::move(dmem)};
}

void check_input(const ModelConfig& cfg, const Mat& input) {
  if (input.rows() != static_cast<Eigen::Index>(cfg.seq_len) ||
      input.cols() != static_cast<Eigen::Index>(cfg.input_dim)) {
    throw Error(Errc::ShapeMismatch, "input must be " + std::to_string(cfg.seq_len) + " x " +
                                         std::to_string(cfg.input_dim));
  }
}

// A batch of sequences stacked into groups * seq_len rows. Zero-padded steps
// contribute only the input bias, so only the other rows are kept.
struct BatchInput {
  Eigen::Index groups = 0;
  std::vector<Eigen::Index> active_rows;
  Mat active;
};

BatchInput single_input(const Mat& input) {
  BatchInput b;
  b.groups = 1;
  for (Eigen::Index r = 0; r < input.rows(); ++r) {
    if ((input.row(r).array() != 0.0).any()) b.active_rows.push_back(r);
  }
  b.active.resize(static_cast<Eigen::Index>(b.active_rows.size()), input.cols());
  for (std::size_t i = 0; i < b.active_rows.size(); ++i) {
    b.active.row(static_cast<Eigen::Index>(i)) = input.row(b.active_rows[i]);
  }
  return b;
}

BatchInput dataset_input(const Dataset& data, std::span<const std::size_t> samples) {
  BatchInput b;
  b.groups = static_cast<Eigen::Index>(samples.size());
  const auto steps = static_cast<Eigen::Index>(data.seq_len());
  std::vector<std::int64_t> frames;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sample = data.sample(samples[s]);
    for (Eigen::Index t = 0; t < steps; ++t) {
      const std::int64_t f = sample.steps[static_cast<std::size_t>(t)];
      if (f == Dataset::kPad) continue;
      b.active_rows.push_back(static_cast<Eigen::Index>(s) * steps + t);
      frames.push_back(f);
    }
  }
  b.active.resize(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(data.feature_dim()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto src = data.frame(frames[i]);
    std::copy(src.begin(), src.end(), b.active.row(static_cast<Eigen::Index>(i)).data());
  }
  return b;
}

Vec forward_impl(const ModelWeights& w, const BatchInput& in, DropoutSampler* dropout, ForwardCache* cache) {
  const ModelConfig& cfg = w.config;
  const auto steps = static_cast<Eigen::Index>(cfg.seq_len);
  const Eigen::Index groups = in.groups;

  Mat e = w.input_b.replicate(groups * steps, 1);
  if (!in.active_rows.empty()) {
    const Mat pa = in.active * w.input_w;
    for (std::size_t i = 0; i < in.active_rows.size(); ++i) e.row(in.active_rows[i]) += pa.row(static_cast<Eigen::Index>(i));
  }
  const Mat& pe = cached_positional_encoding(cfg.seq_len, cfg.model_dim);
  for (Eigen::Index gi = 0; gi < groups; ++gi) e.middleRows(gi * steps, steps) += pe;
  const bool drop = dropout && dropout->rate() > 0.0;
  if (drop) {
    Mat m = dropout->mask(e.rows(), e.cols());
    e = e.cwiseProduct(m);
    if (cache) cache->mask_embed = std::move(m);
  }
  if (cache) {
    cache->masked = drop;
    cache->encoder.resize(w.encoder.size());
    cache->decoder.resize(w.decoder.size());
  }

  Mat memory = e;
  for (std::size_t l = 0; l < w.encoder.size(); ++l) {
    memory = block_forward(memory, nullptr, w.encoder[l], cfg, groups, dropout,
                           cache ? &cache->encoder[l] : nullptr);
  }
  Mat state(groups, e.cols());
  for (Eigen::Index gi = 0; gi < groups; ++gi) state.row(gi) = e.row(gi * steps + steps - 1);
  for (std::size_t l = 0; l < w.decoder.size(); ++l) {
    state = block_forward(state, &memory, w.decoder[l], cfg, groups, dropout,
                          cache ? &cache->decoder[l] : nullptr);
  }
  Vec y = (state * w.head_w).col(0).array() + w.head_b(0, 0);
  if (cache) cache->decoder_state = std::move(state);
  return y;
}

// dy holds d loss / d y for each sequence of the batch.
void backward_impl(const ModelWeights& w, const ForwardCache& c, const BatchInput& in, const Vec& dy,
                   ModelWeights& g) {
  const ModelConfig& cfg = w.config;
  const auto steps = static_cast<Eigen::Index>(cfg.seq_len);
  const auto d = static_cast<Eigen::Index>(cfg.model_dim);
  const Eigen::Index groups = in.groups;

  g.head_w.noalias() += c.decoder_state.transpose() * dy;
  g.head_b(0, 0) += dy.sum();
  Mat dstate = dy * w.head_w.transpose();

  Mat dmemory = Mat::Zero(groups * steps, d);
  for (std::size_t l = w.decoder.size(); l-- > 0;) {
    BlockGrad bg = block_backward(dstate, w.decoder[l], cfg, groups, c.decoder[l], g.decoder[l], false);
    dstate = std::move(bg.dx);
    dmemory += bg.dmemory;
  }
  Mat de = std::move(dmemory);
  for (std::size_t l = w.encoder.size(); l-- > 0;) {
    de = block_backward(de, w.encoder[l], cfg, groups, c.encoder[l], g.encoder[l], true).dx;
  }
  for (Eigen::Index gi = 0; gi < groups; ++gi) de.row(gi * steps + steps - 1) += dstate.row(gi);
  if (c.masked) de = de.cwiseProduct(c.mask_embed);

  g.input_b += de.colwise().sum();
  if (!in.active_rows.empty()) {
    Mat da(static_cast<Eigen::Index>(in.active_rows.size()), d);
    for (std::size_t i = 0; i < in.active_rows.size(); ++i) {
      da.row(static_cast<Eigen::Index>(i)) = de.row(in.active_rows[i]);
    }
    g.input_w.noalias() += in.active.transpose() * da;
  }
}

void check_dataset(const ModelConfig& cfg, const Dataset& data) {
  if (data.seq_len() != cfg.seq_len || data.feature_dim() != cfg.input_dim) {
    throw Error(Errc::ShapeMismatch, "dataset shape does not match model config");
  }
}

// Sum of squared residuals, evaluated in fixed-size chunks.
double squared_error_sum(const ModelWeights& w, const Dataset& data, std::span<const std::size_t> indices) {
  constexpr std::size_t kChunk = 64;
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const auto chunk = indices.subspan(start, std::min(kChunk, indices.size() - start));
    const Vec y = forward_impl(w, dataset_input(data, chunk), nullptr, nullptr);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const double r = y(static_cast<Eigen::Index>(i)) - data.sample(chunk[i]).label;
      total += r * r;
    }
  }
  return total;
}

// ---- binary helpers ----------------------------------------------------------

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return read(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(Errc::ShapeMismatch, "weight file truncated");
  }
  std::uint64_t read(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kWeightMagic = "TTMW";

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::uint64_t hash_frame(std::span<const double> values) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                  values.size() * sizeof(double)));
}

}  // namespace

// ---- config ------------------------------------------------------------------

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.model_dim = 2048;
  c.heads = 8;
  c.encoder_layers = 6;
  c.decoder_layers = 6;
  c.ff_dim = 2048;
  c.dropout = 0.1;
  c.layernorm_eps = 1e-5;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.model_dim = 8;
  c.heads = 2;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.ff_dim = 16;
  c.seq_len = 4;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::InvalidArgument, "model config: " + m); };
  if (input_dim < 1 || model_dim < 1 || heads < 1 || ff_dim < 1 || seq_len < 1) {
    fail("dimensions must be >= 1");
  }
  if (model_dim % heads != 0) fail("model_dim must be divisible by heads");
  if (model_dim % 2 != 0) fail("model_dim must be even for positional encoding");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(layernorm_eps > 0.0)) fail("layernorm_eps must be positive");
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.learning_rate = 1e-5;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning_rate must be positive");
  if (patience < 1) throw Error(Errc::InvalidArgument, "patience must be >= 1");
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
}

// ---- weights -----------------------------------------------------------------

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  config.validate();
  ModelWeights w;
  w.config = config;
  w.input_w = Mat::Zero(static_cast<Eigen::Index>(config.input_dim),
                        static_cast<Eigen::Index>(config.model_dim));
  w.input_b = row_zeros(config.model_dim);
  w.encoder.assign(config.encoder_layers, zero_block(config));
  w.decoder.assign(config.decoder_layers, zero_block(config));
  w.head_w = Mat::Zero(static_cast<Eigen::Index>(config.model_dim), 1);
  w.head_b = Mat::Zero(1, 1);
  return w;
}

ModelWeights ModelWeights::initialize(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w = zeros(config);
  Rng rng(seed);
  w.input_w = uniform_matrix(config.input_dim, config.model_dim, rng);
  for (auto& b : w.encoder) b = random_block(config, rng);
  for (auto& b : w.decoder) b = random_block(config, rng);
  w.head_w = uniform_matrix(config.model_dim, 1, rng);
  return w;
}

std::vector<NamedTensor> ModelWeights::tensors() {
  std::vector<NamedTensor> out;
  collect(*this, out);
  return out;
}

std::vector<ConstNamedTensor> ModelWeights::tensors() const {
  std::vector<ConstNamedTensor> out;
  collect(*this, out);
  return out;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += static_cast<std::size_t>(t.tensor->size());
  return n;
}

bool ModelWeights::all_finite() const {
  for (const auto& t : tensors()) {
    if (!t.tensor->allFinite()) return false;
  }
  return true;
}

bool operator==(const ModelWeights& a, const ModelWeights& b) {
  if (!(a.config == b.config)) return false;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const Mat& x = *ta[i].tensor;
    const Mat& y = *tb[i].tensor;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

// ---- ops -----------------------------------------------------------------------

Mat positional_encoding(std::size_t steps, std::size_t dim) {
  if (steps < 1 || dim < 1) throw Error(Errc::InvalidArgument, "positional encoding needs T, d >= 1");
  if (dim % 2 != 0) throw Error(Errc::OddDim, "positional encoding needs even d");
  Mat pe(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(dim));
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle = static_cast<double>(t) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(2 * i)) = std::sin(angle);
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(2 * i + 1)) = std::cos(angle);
    }
  }
  return pe;
}

Mat attention_heads(const Mat& q, const Mat& k, const Mat& v, std::size_t heads,
                    std::vector<Mat>* probabilities) {
  if (heads == 0 || q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows() ||
      q.cols() % static_cast<Eigen::Index>(heads) != 0 || k.rows() == 0) {
    throw Error(Errc::ShapeMismatch, "attention operands have incompatible shapes");
  }
  const Eigen::Index dk = q.cols() / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Mat out(q.rows(), q.cols());
  if (probabilities) probabilities->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * dk;
    Mat scores = (q.middleCols(off, dk) * k.middleCols(off, dk).transpose()) * scale;
    const Vec row_max = scores.rowwise().maxCoeff();
    scores = (scores.colwise() - row_max).array().exp().matrix();
    const Vec row_sum = scores.rowwise().sum();
    scores = (scores.array().colwise() / row_sum.array()).matrix();
    out.middleCols(off, dk) = scores * v.middleCols(off, dk);
    if (probabilities) probabilities->push_back(std::move(scores));
  }
  return out;
}

Mat multi_head_attention(const Mat& query_in, const Mat& memory, const AttentionWeights& w,
                         std::size_t heads) {
  if (query_in.cols() != w.wq.rows() || memory.cols() != w.wk.rows()) {
    throw Error(Errc::ShapeMismatch, "attention input width does not match weights");
  }
  return attention_forward(query_in, memory, w, heads, 1, nullptr);
}

Mat layer_norm(const Mat& x, const LayerNormWeights& w, double eps) {
  if (x.cols() != w.gamma.cols()) throw Error(Errc::ShapeMismatch, "layer norm width mismatch");
  return layer_norm_forward(x, w, eps, nullptr);
}

Mat DropoutSampler::mask(Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - rate_);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng_.uniform() < rate_ ? 0.0 : keep;
  return m;
}

double forward(const ModelWeights& weights, const Mat& input) {
  check_input(weights.config, input);
  if (!weights.all_finite()) throw Error(Errc::NonFiniteWeights, "weights contain NaN or infinity");
  return forward_impl(weights, single_input(input), nullptr, nullptr)(0);
}

double forward_train(const ModelWeights& weights, const Mat& input, DropoutSampler* dropout) {
  check_input(weights.config, input);
  return forward_impl(weights, single_input(input), dropout, nullptr)(0);
}

GradientResult gradients(const ModelWeights& weights, const Dataset& data,
                         std::span<const std::size_t> batch, DropoutSampler* dropout) {
  if (batch.empty()) throw Error(Errc::EmptyDataset, "gradient batch is empty");
  check_dataset(weights.config, data);
  GradientResult result{0.0, ModelWeights::zeros(weights.config)};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const BatchInput in = dataset_input(data, batch);
  ForwardCache cache;
  const Vec y = forward_impl(weights, in, dropout, &cache);
  Vec dy(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double residual = y(i) - data.sample(batch[static_cast<std::size_t>(i)]).label;
    result.loss += residual * residual * inv_batch;
    dy(i) = 2.0 * residual * inv_batch;
  }
  backward_impl(weights, cache, in, dy, result.grads);
  return result;
}

double evaluate_mse(const ModelWeights& weights, const Dataset& data,
                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(Errc::EmptyDataset, "no samples to evaluate");
  check_dataset(weights.config, data);
  return squared_error_sum(weights, data, indices) / static_cast<double>(indices.size());
}

GradCheckReport gradient_check(const ModelWeights& weights, const Dataset& data,
                               std::span<const std::size_t> batch, double eps, double floor) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be positive");
  const GradientResult analytic = gradients(weights, data, batch);
  const double n = static_cast<double>(batch.size());
  const auto loss = [&](const ModelWeights& w) { return squared_error_sum(w, data, batch) / n; };

  ModelWeights probe = weights;
  auto params = probe.tensors();
  const auto grads = analytic.grads.tensors();
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Mat& p = *params[t].tensor;
    const Mat& g = *grads[t].tensor;
    GradCheckEntry entry{params[t].name, 0, 0.0};
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + eps;
      const double up = loss(probe);
      p.data()[i] = saved - eps;
      const double down = loss(probe);
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = g.data()[i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.checked;
    }
    report.checked += entry.checked;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

// ---- training ------------------------------------------------------------------

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience < 1) throw Error(Errc::InvalidArgument, "patience must be >= 1");
}

bool EarlyStopping::update(std::size_t epoch, double loss) {
  if (!has_best_ || loss < best_loss_) {
    has_best_ = true;
    best_loss_ = loss;
    best_epoch_ = epoch;
    improved_ = true;
    return false;
  }
  improved_ = false;
  return epoch - best_epoch_ >= patience_;
}

DataSplit split_dataset(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  DataSplit split;
  split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
  split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

TrainResult train(ModelWeights weights, const TrainConfig& config, const Dataset& data) {
  config.validate();
  if (data.size() < 2) throw Error(Errc::EmptyDataset, "training needs at least two samples");

  TrainResult result;
  result.split = split_dataset(data.size(), config.train_fraction, config.seed);
  const auto& train_idx = result.split.train;
  const auto& test_idx = result.split.test;

  Rng order_rng(derive_seed(config.seed, 1));
  DropoutSampler dropout(weights.config.dropout, derive_seed(config.seed, 2));
  DropoutSampler* drop = weights.config.dropout > 0.0 ? &dropout : nullptr;

  result.history.push_back(
      {0, evaluate_mse(weights, data, train_idx), evaluate_mse(weights, data, test_idx)});

  EarlyStopping stopper(config.patience);
  ModelWeights best = weights;
  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const auto batch = std::span<const std::size_t>(order).subspan(start, stop - start);
      const GradientResult g = gradients(weights, data, batch, drop);
      auto params = weights.tensors();
      const auto grads = g.grads.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) {
        *params[t].tensor -= config.learning_rate * *grads[t].tensor;
      }
    }
    if (!weights.all_finite()) {
      throw Error(Errc::NonFiniteWeights, "training diverged at epoch " + std::to_string(epoch));
    }
    const EpochRecord rec{epoch, evaluate_mse(weights, data, train_idx),
                          evaluate_mse(weights, data, test_idx)};
    result.history.push_back(rec);
    result.last_epoch = epoch;
    const bool stop = stopper.update(epoch, rec.test_mse);
    if (stopper.improved()) best = weights;
    if (stop) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.weights = std::move(best);
  result.final_train_mse = evaluate_mse(result.weights, data, train_idx);
  result.final_test_mse = evaluate_mse(result.weights, data, test_idx);
  return result;
}

// ---- dataset -------------------------------------------------------------------

Dataset::Dataset(std::size_t seq_len, std::size_t feature_dim)
    : seq_len_(seq_len), feature_dim_(feature_dim) {
  if (seq_len < 1 || feature_dim < 1) throw Error(Errc::InvalidArgument, "dataset dims must be >= 1");
}

Dataset random_dataset(std::size_t n, std::size_t seq_len, std::size_t feature_dim, std::uint64_t seed) {
  Dataset data(seq_len, feature_dim);
  Rng rng(seed);
  std::vector<double> frame(feature_dim);
  std::vector<std::int64_t> steps(seq_len);
  for (std::size_t s = 0; s < n; ++s) {
    for (auto& step : steps) {
      for (auto& v : frame) v = rng.gaussian();
      step = data.add_frame(frame);
    }
    data.add_sample(steps, rng.uniform(-1.0, 1.0));
  }
  return data;
}

std::span<const double> Dataset::frame(std::int64_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= frame_count_) {
    throw Error(Errc::OutOfRange, "frame index out of range");
  }
  return std::span<const double>(frames_).subspan(static_cast<std::size_t>(index) * feature_dim_,
                                                  feature_dim_);
}

std::int64_t Dataset::add_frame(std::span<const double> values) {
  if (values.size() != feature_dim_) throw Error(Errc::ShapeMismatch, "frame width mismatch");
  const std::uint64_t h = hash_frame(values);
  auto [lo, hi] = frame_index_.equal_range(h);
  for (auto it = lo; it != hi; ++it) {
    const auto existing = frame(it->second);
    if (std::equal(existing.begin(), existing.end(), values.begin())) return it->second;
  }
  const auto index = static_cast<std::int64_t>(frame_count_++);
  frames_.insert(frames_.end(), values.begin(), values.end());
  frame_index_.emplace(h, index);
  return index;
}

void Dataset::add_sample(std::span<const std::int64_t> steps, double label) {
  if (steps.size() > seq_len_) throw Error(Errc::ShapeMismatch, "sample longer than seq_len");
  Sample s;
  s.steps.assign(seq_len_ - steps.size(), kPad);
  for (std::int64_t idx : steps) {
    if (idx != kPad) (void)frame(idx);
    s.steps.push_back(idx);
  }
  s.label = label;
  samples_.push_back(std::move(s));
}

Mat Dataset::sequence(std::size_t i) const {
  const Sample& s = samples_.at(i);
  Mat m = Mat::Zero(static_cast<Eigen::Index>(seq_len_), static_cast<Eigen::Index>(feature_dim_));
  for (std::size_t t = 0; t < seq_len_; ++t) {
    if (s.steps[t] == kPad) continue;
    const auto f = frame(s.steps[t]);
    std::copy(f.begin(), f.end(), m.row(static_cast<Eigen::Index>(t)).data());
  }
  return m;
}

std::vector<double> Dataset::labels() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(seq_len_, feature_dim_);
  std::vector<std::int64_t> steps;
  for (std::size_t i : indices) {
    const Sample& s = samples_.at(i);
    steps.clear();
    for (std::int64_t f : s.steps) steps.push_back(f == kPad ? kPad : out.add_frame(frame(f)));
    out.add_sample(steps, s.label);
  }
  return out;
}

void Dataset::write(std::ostream& out) const {
  std::string zero_step;
  for (std::size_t j = 0; j < feature_dim_; ++j) zero_step += j == 0 ? "0" : ",0";
  std::string line;
  for (const auto& s : samples_) {
    line.clear();
    append_number(line, s.label);
    for (std::int64_t idx : s.steps) {
      line.push_back(';');
      if (idx == kPad) {
        line += zero_step;
        continue;
      }
      const auto f = frame(idx);
      for (std::size_t j = 0; j < f.size(); ++j) {
        if (j) line.push_back(',');
        append_number(line, f[j]);
      }
    }
    line.push_back('\n');
    out << line;
  }
}

void Dataset::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write dataset " + path.string());
  write(out);
  if (!out) throw Error(Errc::Io, "failed writing dataset " + path.string());
}

Dataset Dataset::read(std::istream& in) {
  std::optional<Dataset> data;
  std::string line;
  std::vector<double> values;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> parts;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(';')) != std::string_view::npos;) {
      parts.push_back(rest.substr(0, pos));
      rest = rest.substr(pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() < 2) throw Error(Errc::ShapeMismatch, "line " + std::to_string(lineno) + ": no timesteps");

    auto parse = [&](std::string_view s) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(Errc::ShapeMismatch, "line " + std::to_string(lineno) + ": bad number '" + std::string(s) + "'");
      }
      return v;
    };
    const double label = parse(parts[0]);
    std::vector<std::int64_t> steps;
    for (std::size_t p = 1; p < parts.size(); ++p) {
      values.clear();
      std::string_view step = parts[p];
      for (std::size_t pos; (pos = step.find(',')) != std::string_view::npos;) {
        values.push_back(parse(step.substr(0, pos)));
        step = step.substr(pos + 1);
      }
      values.push_back(parse(step));
      if (!data) data.emplace(parts.size() - 1, values.size());
      if (values.size() != data->feature_dim() || parts.size() - 1 != data->seq_len()) {
        throw Error(Errc::ShapeMismatch, "line " + std::to_string(lineno) + ": inconsistent shape");
      }
      const bool zero = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
      steps.push_back(zero ? kPad : data->add_frame(values));
    }
    data->add_sample(steps, label);
  }
  if (in.bad()) throw Error(Errc::Io, "read error");
  if (!data || data->empty()) throw Error(Errc::EmptyDataset, "dataset has no samples");
  return std::move(*data);
}

Dataset Dataset::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open dataset " + path.string());
  return read(in);
}

// ---- weight files --------------------------------------------------------------

void write_weights(const ModelWeights& weights, std::ostream& out) {
  std::string buf;
  buf.append(kWeightMagic);
  put_u32(buf, kWeightFileVersion);
  const ModelConfig& c = weights.config;
  for (std::size_t v : {c.input_dim, c.model_dim, c.heads, c.encoder_layers, c.decoder_layers,
                        c.ff_dim, c.seq_len}) {
    put_u64(buf, v);
  }
  put_f64(buf, c.dropout);
  put_f64(buf, c.layernorm_eps);
  const auto tensors = weights.tensors();
  put_u64(buf, tensors.size());
  for (const auto& t : tensors) {
    put_u64(buf, static_cast<std::uint64_t>(t.tensor->rows()));
    put_u64(buf, static_cast<std::uint64_t>(t.tensor->cols()));
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) put_f64(buf, t.tensor->data()[i]);
  }
  put_u64(buf, fnv1a64(buf));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write weights " + path.string());
  write_weights(weights, out);
  if (!out) throw Error(Errc::Io, "failed writing weights " + path.string());
}

ModelWeights read_weights(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::Io, "read error");
  if (bytes.size() < kWeightMagic.size() + 4 + 8) throw Error(Errc::ChecksumMismatch, "weight file too short");
  const std::string_view body(bytes.data(), bytes.size() - 8);
  ByteReader trailer(std::string_view(bytes).substr(bytes.size() - 8));
  if (trailer.u64() != fnv1a64(body)) throw Error(Errc::ChecksumMismatch, "weight file checksum mismatch");

  ByteReader r(body);
  if (r.raw(kWeightMagic.size()) != kWeightMagic) throw Error(Errc::VersionMismatch, "not a weight file");
  const std::uint32_t version = r.u32();
  if (version != kWeightFileVersion) {
    throw Error(Errc::VersionMismatch, "unsupported weight file version " + std::to_string(version));
  }
  ModelConfig c;
  c.input_dim = r.u64();
  c.model_dim = r.u64();
  c.heads = r.u64();
  c.encoder_layers = r.u64();
  c.decoder_layers = r.u64();
  c.ff_dim = r.u64();
  c.seq_len = r.u64();
  c.dropout = r.f64();
  c.layernorm_eps = r.f64();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(Errc::ShapeMismatch, e.what());
  }
  ModelWeights w = ModelWeights::zeros(c);
  auto tensors = w.tensors();
  if (r.u64() != tensors.size()) throw Error(Errc::ShapeMismatch, "tensor count mismatch");
  for (auto& t : tensors) {
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (rows != static_cast<std::uint64_t>(t.tensor->rows()) ||
        cols != static_cast<std::uint64_t>(t.tensor->cols())) {
      throw Error(Errc::ShapeMismatch, "tensor " + t.name + " has unexpected shape");
    }
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) t.tensor->data()[i] = r.f64();
  }
  if (!w.all_finite()) throw Error(Errc::NonFiniteWeights, "weight file holds non-finite values");
  return w;
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open weights " + path.string());
  return read_weights(in);
}

ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& expected) {
  ModelWeights w = load_weights(path);
  if (!(w.config == expected)) {
    throw Error(Errc::ShapeMismatch, "weight file config does not match the requested model");
  }
  return w;
}

}  // namespace ttm::nn
