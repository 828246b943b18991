#pragma once

// Transformer root-cause scorer trained with the PU objective.
//
// A line's token ids are embedded (plus fixed sinusoidal positions), passed
// through one self-attention encoder block, and the class-token position is
// projected to an output vector z. The root-cause score is |z|.
//
// Only the class-token output feeds the head, so the block evaluates the
// attention query for position 0 alone; keys and values still cover every
// non-pad position. For a single block this is exactly the full encoder's
// class-token output.

#include "logrca/error.hpp"
#include "logrca/tokenizer.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace logrca {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<RowVec>;
using ConstVecMap = Eigen::Map<const RowVec>;
// SIMD reductions depend on buffer alignment; fix it so reruns are bit-identical.
using AlignedVec = std::vector<double, Eigen::aligned_allocator<double>>;

inline constexpr double kNormClamp = 1e-8;

struct ModelConfig {
  int embed_dim = 128;
  int attention_heads = 2;
  int hidden_units = 256;
  int output_dim = 64;
  int max_len = 24;
  int epochs = 5;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  /// "adam" or "sgd" (SGD with `momentum`).
  std::string optimizer = "adam";
  std::uint64_t seed = 7;

  void validate() const {
    if (embed_dim < 1 || attention_heads < 1 || hidden_units < 1 || output_dim < 1) {
      throw ConfigError("model dimensions must be positive");
    }
    if (embed_dim % attention_heads != 0) {
      throw ConfigError("embed_dim must be divisible by attention_heads");
    }
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (optimizer != "adam" && optimizer != "sgd") throw ConfigError("optimizer must be adam or sgd");
  }
};

inline void to_json(nlohmann::json &j, const ModelConfig &c) {
  j = {{"embed_dim", c.embed_dim},         {"attention_heads", c.attention_heads},
       {"hidden_units", c.hidden_units},   {"output_dim", c.output_dim},
       {"max_len", c.max_len},             {"epochs", c.epochs},
       {"batch_size", c.batch_size},       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},           {"optimizer", c.optimizer},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json &j, ModelConfig &c) {
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.hidden_units = j.value("hidden_units", c.hidden_units);
  c.output_dim = j.value("output_dim", c.output_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.optimizer = j.value("optimizer", c.optimizer);
  c.seed = j.value("seed", c.seed);
}

/// Offsets of each parameter block inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    std::string name;
    std::size_t offset;
    Eigen::Index rows;
    Eigen::Index cols;
    std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
  };

  std::vector<Block> blocks;
  std::size_t total = 0;

  ParamLayout() = default;
  ParamLayout(const ModelConfig &c, std::size_t vocab_size) {
    const Eigen::Index d = c.embed_dim, h = c.hidden_units, o = c.output_dim;
    add("embedding", static_cast<Eigen::Index>(vocab_size), d);
    add("wq", d, d);
    add("bq", 1, d);
    add("wk", d, d);
    add("bk", 1, d);
    add("wv", d, d);
    add("bv", 1, d);
    add("wo", d, d);
    add("bo", 1, d);
    add("w1", d, h);
    add("b1", 1, h);
    add("w2", h, d);
    add("b2", 1, d);
    add("wz", d, o);
    add("bz", 1, o);
  }

  const Block &operator[](std::size_t i) const { return blocks[i]; }

private:
  void add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    blocks.push_back({std::move(name), total, rows, cols});
    total += static_cast<std::size_t>(rows * cols);
  }
};

enum Param : std::size_t { kEmb, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo, kW1, kB1, kW2, kB2, kWz, kBz };

/// Views of the parameter blocks over a flat buffer (parameters or gradients).
template <typename Scalar> struct ParamViews {
  using Map = std::conditional_t<std::is_const_v<Scalar>, ConstMatMap, MatMap>;
  std::vector<Map> m;

  ParamViews(Scalar *data, const ParamLayout &layout) {
    m.reserve(layout.blocks.size());
    for (const auto &b : layout.blocks) m.emplace_back(data + b.offset, b.rows, b.cols);
  }
  auto &operator[](std::size_t i) { return m[i]; }
  const auto &operator[](std::size_t i) const { return m[i]; }
};

/// Fixed sinusoidal positional encodings, max_len x embed_dim.
inline RowMat positional_encoding(int max_len, int dim) {
  RowMat pe(max_len, dim);
  for (int p = 0; p < max_len; ++p) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(p, i) = (i % 2 == 0) ? std::sin(p * rate) : std::cos(p * rate);
    }
  }
  return pe;
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<Eigen::Index> row_begin; // first stacked row of each sample
  std::vector<std::int32_t> row_token; // token id of each stacked row
  std::vector<int> row_pos;            // sequence position of each stacked row
  RowMat x;                            // stacked inputs (embedding + position)
  RowMat k, v;                         // stacked keys and values
  RowMat q;                            // class-token queries, batch x d
  std::vector<RowMat> attn;            // per sample: heads x rows
  RowMat a, r1, u, f, r2;              // batch x {d, d, h, h, d}
  RowMat z;                            // batch x output_dim
};

class ScorerModel {
public:
  ScorerModel(ModelConfig config, std::size_t vocab_size)
      : config_(std::move(config)), vocab_size_(vocab_size),
        layout_(config_, vocab_size), params_(layout_.total, 0.0),
        pe_(positional_encoding(config_.max_len, config_.embed_dim)) {
    config_.validate();
    if (vocab_size < tok::kReserved.size()) throw ConfigError("vocabulary too small");
  }

  /// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  /// Embedding rows use fan_in = embed_dim.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto &b : layout_.blocks) {
      const bool bias = b.rows == 1 && b.name[0] == 'b';
      const double fan_in = b.name == "embedding" ? config_.embed_dim : static_cast<double>(b.rows);
      const double bound = 1.0 / std::sqrt(fan_in);
      for (std::size_t i = 0; i < b.size(); ++i) {
        params_[b.offset + i] = bias ? 0.0 : uniform(rng, -bound, bound);
      }
    }
  }

  /// Token embeddings are multiplied by sqrt(embed_dim) before the
  /// positional encoding is added.
  double embedding_scale() const { return std::sqrt(static_cast<double>(config_.embed_dim)); }

  const ModelConfig &config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  const ParamLayout &layout() const { return layout_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  ForwardCache forward(std::span<const EncodedSequence> batch) const {
    const ParamViews<const double> p(params_.data(), layout_);
    const Eigen::Index d = config_.embed_dim;
    const Eigen::Index heads = config_.attention_heads;
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto n = static_cast<Eigen::Index>(batch.size());

    ForwardCache c;
    c.row_begin.reserve(batch.size() + 1);
    for (const auto &seq : batch) {
      if (seq.size() != static_cast<std::size_t>(config_.max_len)) {
        throw DataError("encoded sequence length does not match max_len");
      }
      c.row_begin.push_back(static_cast<Eigen::Index>(c.row_token.size()));
      for (std::size_t pos = 0; pos < seq.size(); ++pos) {
        const auto id = seq[pos];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
          throw DataError("token id " + std::to_string(id) + " outside the vocabulary");
        }
        // [PAD] positions are masked out of attention; position 0 is the
        // class token and is always kept.
        if (pos == 0 || id != tok::kPadId) {
          c.row_token.push_back(id);
          c.row_pos.push_back(static_cast<int>(pos));
        }
      }
    }
    c.row_begin.push_back(static_cast<Eigen::Index>(c.row_token.size()));
    const auto rows = static_cast<Eigen::Index>(c.row_token.size());

    const double emb_scale = embedding_scale();
    c.x.resize(rows, d);
    for (Eigen::Index r = 0; r < rows; ++r) {
      c.x.row(r) = emb_scale * p[kEmb].row(c.row_token[static_cast<std::size_t>(r)]) +
                   pe_.row(c.row_pos[static_cast<std::size_t>(r)]);
    }
    c.k.noalias() = c.x * p[kWk];
    c.k.rowwise() += p[kBk].row(0);
    c.v.noalias() = c.x * p[kWv];
    c.v.rowwise() += p[kBv].row(0);

    RowMat x0(n, d);
    for (Eigen::Index b = 0; b < n; ++b) x0.row(b) = c.x.row(c.row_begin[static_cast<std::size_t>(b)]);
    c.q.noalias() = x0 * p[kWq];
    c.q.rowwise() += p[kBq].row(0);

    c.a.setZero(n, d);
    c.attn.resize(batch.size());
    for (Eigen::Index b = 0; b < n; ++b) {
      const Eigen::Index r0 = c.row_begin[static_cast<std::size_t>(b)];
      const Eigen::Index len = c.row_begin[static_cast<std::size_t>(b) + 1] - r0;
      RowMat &att = c.attn[static_cast<std::size_t>(b)];
      att.resize(heads, len);
      for (Eigen::Index h = 0; h < heads; ++h) {
        RowVec s = (c.k.block(r0, h * dh, len, dh) * c.q.row(b).segment(h * dh, dh).transpose())
                       .transpose() *
                   scale;
        s.array() -= s.maxCoeff();
        s = s.array().exp();
        s /= s.sum();
        att.row(h) = s;
        c.a.row(b).segment(h * dh, dh).noalias() = s * c.v.block(r0, h * dh, len, dh);
      }
    }
    c.r1.noalias() = c.a * p[kWo];
    c.r1.rowwise() += p[kBo].row(0);
    c.r1 += x0;
    c.u.noalias() = c.r1 * p[kW1];
    c.u.rowwise() += p[kB1].row(0);
    c.f = c.u.cwiseMax(0.0);
    c.r2.noalias() = c.f * p[kW2];
    c.r2.rowwise() += p[kB2].row(0);
    c.r2 += c.r1;
    c.z.noalias() = c.r2 * p[kWz];
    c.z.rowwise() += p[kBz].row(0);
    return c;
  }

  /// Accumulates parameter gradients into `grad` given dLoss/dz (batch x o).
  void backward(const ForwardCache &c, const RowMat &gz, std::span<double> grad) const {
    const ParamViews<const double> p(params_.data(), layout_);
    ParamViews<double> g(grad.data(), layout_);
    const Eigen::Index d = config_.embed_dim;
    const Eigen::Index heads = config_.attention_heads;
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index n = gz.rows();

    g[kWz].noalias() += c.r2.transpose() * gz;
    g[kBz].row(0) += gz.colwise().sum();
    RowMat gr2 = gz * p[kWz].transpose();

    g[kW2].noalias() += c.f.transpose() * gr2;
    g[kB2].row(0) += gr2.colwise().sum();
    RowMat gu = (gr2 * p[kW2].transpose()).cwiseProduct((c.u.array() > 0.0).cast<double>().matrix());
    g[kW1].noalias() += c.r1.transpose() * gu;
    g[kB1].row(0) += gu.colwise().sum();
    RowMat gr1 = gr2;
    gr1.noalias() += gu * p[kW1].transpose();

    g[kWo].noalias() += c.a.transpose() * gr1;
    g[kBo].row(0) += gr1.colwise().sum();
    RowMat ga = gr1 * p[kWo].transpose();

    const auto rows = c.x.rows();
    RowMat gk = RowMat::Zero(rows, d);
    RowMat gv = RowMat::Zero(rows, d);
    RowMat gq(n, d);
    for (Eigen::Index b = 0; b < n; ++b) {
      const Eigen::Index r0 = c.row_begin[static_cast<std::size_t>(b)];
      const Eigen::Index len = c.row_begin[static_cast<std::size_t>(b) + 1] - r0;
      const RowMat &att = c.attn[static_cast<std::size_t>(b)];
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto gah = ga.row(b).segment(h * dh, dh);
        const RowVec pr = att.row(h);
        gv.block(r0, h * dh, len, dh).noalias() += pr.transpose() * gah;
        RowVec dp = (c.v.block(r0, h * dh, len, dh) * gah.transpose()).transpose();
        const double mean = pr.dot(dp);
        RowVec ds = (pr.array() * (dp.array() - mean)).matrix() * scale;
        gq.row(b).segment(h * dh, dh).noalias() = ds * c.k.block(r0, h * dh, len, dh);
        gk.block(r0, h * dh, len, dh).noalias() += ds.transpose() * c.q.row(b).segment(h * dh, dh);
      }
    }

    RowMat x0(n, d);
    for (Eigen::Index b = 0; b < n; ++b) x0.row(b) = c.x.row(c.row_begin[static_cast<std::size_t>(b)]);
    g[kWq].noalias() += x0.transpose() * gq;
    g[kBq].row(0) += gq.colwise().sum();
    g[kWk].noalias() += c.x.transpose() * gk;
    g[kBk].row(0) += gk.colwise().sum();
    g[kWv].noalias() += c.x.transpose() * gv;
    g[kBv].row(0) += gv.colwise().sum();

    RowMat gx = gk * p[kWk].transpose();
    gx.noalias() += gv * p[kWv].transpose();
    RowMat gx0 = gr1;
    gx0.noalias() += gq * p[kWq].transpose();
    for (Eigen::Index b = 0; b < n; ++b) gx.row(c.row_begin[static_cast<std::size_t>(b)]) += gx0.row(b);
    const double emb_scale = embedding_scale();
    for (Eigen::Index r = 0; r < rows; ++r) {
      g[kEmb].row(c.row_token[static_cast<std::size_t>(r)]) += emb_scale * gx.row(r);
    }
  }

  /// Root-cause score |z| per sequence.
  std::vector<double> score(std::span<const EncodedSequence> batch) const {
    std::vector<double> out;
    out.reserve(batch.size());
    const std::size_t chunk = 512;
    for (std::size_t i = 0; i < batch.size(); i += chunk) {
      auto part = batch.subspan(i, std::min(chunk, batch.size() - i));
      const auto c = forward(part);
      for (Eigen::Index b = 0; b < c.z.rows(); ++b) out.push_back(c.z.row(b).norm());
    }
    return out;
  }

  void save(const std::string &path) const;
  static ScorerModel load(const std::string &path);

  bool operator==(const ScorerModel &o) const {
    return vocab_size_ == o.vocab_size_ && params_ == o.params_;
  }

private:
  static double uniform(std::mt19937_64 &rng, double lo, double hi) {
    // 53 random bits, fixed across standard libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  ModelConfig config_;
  std::size_t vocab_size_;
  ParamLayout layout_;
  AlignedVec params_;
  RowMat pe_;
};

/// PU objective over a batch:
///   (1/m) sum_i [ (1 - y_i) |z_i|^2 + y_i q^2 / |z_i| ]
/// with y = 0 for P and 1 for U. U norms below kNormClamp are clamped, which
/// zeroes their gradient. When `grad` is given it receives dLoss/dz.
inline double pu_loss(const RowMat &z, std::span<const Label> labels, double q,
                      RowMat *grad = nullptr) {
  if (!(q > 0.0 && q < 1.0)) throw DataError("q must lie in (0, 1)");
  if (static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw DataError("label count does not match batch size");
  }
  const double m = static_cast<double>(z.rows());
  if (grad != nullptr) grad->setZero(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (labels[static_cast<std::size_t>(i)] == Label::Positive) {
      loss += norm * norm;
      if (grad != nullptr) grad->row(i) = 2.0 * z.row(i) / m;
    } else if (norm < kNormClamp) {
      loss += q * q / kNormClamp;
    } else {
      loss += q * q / norm;
      if (grad != nullptr) grad->row(i) = -q * q / (norm * norm * norm) * z.row(i) / m;
    }
  }
  return loss / m;
}

/// Convenience form over a list of output norms.
inline double pu_loss_from_norms(std::span<const double> norms, std::span<const Label> labels,
                                 double q) {
  RowMat z = RowMat::Zero(static_cast<Eigen::Index>(norms.size()), 1);
  for (std::size_t i = 0; i < norms.size(); ++i) z(static_cast<Eigen::Index>(i), 0) = norms[i];
  return pu_loss(z, labels, q);
}

struct TrainingSet {
  std::vector<EncodedSequence> sequences;
  std::vector<Label> labels;
  double q = 0.0;

  std::size_t size() const { return sequences.size(); }
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double wallclock_ms = 0.0;
};

struct TrainResult {
  ScorerModel model;
  std::vector<EpochLog> log;
};

/// Fisher-Yates shuffle with a bounded draw that does not depend on the
/// standard library's distribution implementations.
inline void seeded_shuffle(std::vector<std::size_t> &v, std::mt19937_64 &rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(v[i - 1], v[static_cast<std::size_t>(r % bound)]);
  }
}

using EpochCallback = std::function<void(const ScorerModel &, const EpochLog &)>;

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected) or SGD with
/// momentum, elementwise over the flat parameter vector.
class Optimizer {
public:
  Optimizer(const ModelConfig &config, std::size_t size)
      : config_(config), first_(size, 0.0), second_(config.optimizer == "adam" ? size : 0, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double lr = config_.learning_rate;
    if (config_.optimizer == "sgd") {
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_[i] = config_.momentum * first_[i] - lr * grad[i];
        params[i] += first_[i];
      }
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = b1 * first_[i] + (1.0 - b1) * grad[i];
      second_[i] = b2 * second_[i] + (1.0 - b2) * grad[i] * grad[i];
      params[i] -= lr * (first_[i] / c1) / (std::sqrt(second_[i] / c2) + eps);
    }
  }

private:
  ModelConfig config_;
  AlignedVec first_;
  AlignedVec second_;
  std::uint64_t t_ = 0;
};

/// Mini-batch training over seeded shuffles.
inline TrainResult train(const TrainingSet &data, std::size_t vocab_size,
                         const ModelConfig &config, const EpochCallback &on_epoch = {}) {
  config.validate();
  std::size_t npos = 0, nunk = 0;
  for (auto l : data.labels) (l == Label::Positive ? npos : nunk)++;
  if (npos == 0) throw DataError("training set has no P lines");
  if (nunk == 0) throw DataError("training set has no U lines");
  if (data.labels.size() != data.sequences.size()) throw DataError("label count mismatch");

  ScorerModel model(config, vocab_size);
  model.initialize(config.seed);
  std::vector<EpochLog> log;

  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.size());
  AlignedVec grad(model.parameters().size());
  Optimizer optimizer(config, grad.size());
  std::vector<EncodedSequence> batch;
  std::vector<Label> batch_labels;
  RowMat gz;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(data.sequences[order[i]]);
        batch_labels.push_back(data.labels[order[i]]);
      }
      const auto cache = model.forward(batch);
      const double loss = pu_loss(cache.z, batch_labels, data.q, &gz);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      model.backward(cache, gz, grad);
      optimizer.step(model.parameters(), grad);
      loss_sum += loss;
      ++batches;
    }
    for (double v : model.parameters()) {
      if (!std::isfinite(v)) {
        throw TrainingError("non-finite parameter after epoch " + std::to_string(epoch));
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    EpochLog entry{epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0,
                   std::chrono::duration<double, std::milli>(t1 - t0).count()};
    log.push_back(entry);
    if (on_epoch) on_epoch(model, entry);
  }
  return {std::move(model), std::move(log)};
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0; // coordinates where a U norm hit the clamp
};

/// Central finite differences of the PU loss on `coordinates` random
/// parameters, compared with the analytic gradient.
inline GradCheckResult gradient_check(const ScorerModel &model,
                                      std::span<const EncodedSequence> batch,
                                      std::span<const Label> labels, double q, double epsilon,
                                      std::size_t coordinates = 200, std::uint64_t seed = 1) {
  ScorerModel probe = model;
  const auto base = probe.forward(batch);
  RowMat gz;
  pu_loss(base.z, labels, q, &gz);
  AlignedVec analytic(probe.parameters().size(), 0.0);
  probe.backward(base, gz, analytic);

  auto clamped = [&](const ForwardCache &c) {
    for (Eigen::Index i = 0; i < c.z.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] == Label::Unknown && c.z.row(i).norm() < kNormClamp) {
        return true;
      }
    }
    return false;
  };
  const bool base_clamped = clamped(base);

  GradCheckResult r;
  std::mt19937_64 rng(seed);
  auto params = probe.parameters();
  const std::size_t n = params.size();
  for (std::size_t k = 0; k < coordinates; ++k) {
    const auto idx = static_cast<std::size_t>(rng() % n);
    const double saved = params[idx];
    params[idx] = saved + epsilon;
    const auto plus = probe.forward(batch);
    const double lp = pu_loss(plus.z, labels, q);
    params[idx] = saved - epsilon;
    const auto minus = probe.forward(batch);
    const double lm = pu_loss(minus.z, labels, q);
    params[idx] = saved;
    if (base_clamped || clamped(plus) || clamped(minus)) {
      ++r.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * epsilon);
    const double a = analytic[idx];
    const double denom = std::max(std::abs(a), std::abs(numeric));
    const double rel = denom < 1e-10 ? 0.0 : std::abs(a - numeric) / denom;
    r.max_relative_error = std::max(r.max_relative_error, rel);
    ++r.checked;
  }
  return r;
}

// Checkpoint: "LRCA" | u32 version | u32 json length | config JSON |
// per block: u64 count, then count little-endian f64 values.

namespace detail {
inline void put_u32(std::ostream &out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(b), 4);
}
inline void put_u64(std::ostream &out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(b), 8);
}
inline std::uint64_t get_le(std::istream &in, int bytes) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char *>(b), bytes);
  if (!in) throw DataError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
} // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void ScorerModel::save(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  nlohmann::json header = {{"model", config_}, {"vocab_size", vocab_size_}};
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto &b : layout_.blocks) blocks.push_back({b.name, b.rows, b.cols});
  header["blocks"] = blocks;
  const std::string text = header.dump();
  out.write("LRCA", 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto &b : layout_.blocks) {
    detail::put_u64(out, b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &params_[b.offset + i], sizeof bits);
      detail::put_u64(out, bits);
    }
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

inline ScorerModel ScorerModel::load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LRCA", 4) != 0) throw DataError("not a checkpoint: " + path);
  const auto version = detail::get_le(in, 4);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version");
  const auto len = detail::get_le(in, 4);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header");
  const auto header = nlohmann::json::parse(text);
  ScorerModel model(header.at("model").get<ModelConfig>(), header.at("vocab_size").get<std::size_t>());
  for (const auto &b : model.layout_.blocks) {
    if (detail::get_le(in, 8) != b.size()) throw DataError("checkpoint block size mismatch: " + b.name);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::uint64_t bits = detail::get_le(in, 8);
      std::memcpy(&model.params_[b.offset + i], &bits, sizeof bits);
    }
  }
  return model;
}

} // namespace logrca
