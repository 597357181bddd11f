#pragma once

// Small neural stack behind the NCF and Wide & Deep rankers: embedding
// tables, a ReLU MLP, focal loss and mini-batch SGD. Dense types are
// templated on the scalar so the gradient checks can run in double while
// nothing else in the model code cares about precision.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "feedsim/errors.hpp"
#include "feedsim/feeds.hpp"
#include "feedsim/graph.hpp"
#include "feedsim/rng.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

struct LearnerConfig {
  std::int64_t embedding_dim = 16;
  std::vector<std::int64_t> mlp_layers{32, 16, 8};
  std::int64_t epochs_per_tick = 10;
  double learning_rate = 0.01;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  std::int64_t batch_size = 256;
  double init_scale = 0.05;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the first offending `learner.*` key.
  void validate() const;
  friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary focal loss:
///   y = 1: -alpha (1-p)^gamma ln p
///   y = 0: -(1-alpha) p^gamma ln(1-p)
/// with p clamped to [1e-7, 1 - 1e-7].
template <typename Scalar>
Scalar focal_loss(Scalar p, int y, Scalar alpha, Scalar gamma) {
  p = std::clamp(p, Scalar(kProbabilityClamp), Scalar(1 - kProbabilityClamp));
  if (y == 1) return -alpha * std::pow(Scalar(1) - p, gamma) * std::log(p);
  return -(Scalar(1) - alpha) * std::pow(p, gamma) * std::log(Scalar(1) - p);
}

/// d focal_loss(sigmoid(z)) / dz.
template <typename Scalar>
Scalar focal_loss_dlogit(Scalar z, int y, Scalar alpha, Scalar gamma) {
  const Scalar p = std::clamp(sigmoid(z), Scalar(kProbabilityClamp),
                              Scalar(1 - kProbabilityClamp));
  const Scalar q = Scalar(1) - p;
  if (y == 1) {
    return alpha * std::pow(q, gamma) * (gamma * p * std::log(p) - q);
  }
  return (Scalar(1) - alpha) * std::pow(p, gamma) *
         (p - gamma * q * std::log(q));
}

/// Visits every parameter block as (name, data, rows, cols). Scalars are
/// 1x1 blocks. Column-major storage throughout.
template <typename Scalar>
using BlockVisitor =
    std::function<void(std::string_view, Scalar*, Eigen::Index, Eigen::Index)>;

/// ReLU hidden layers with a linear scalar head (no head bias; the models
/// own the global bias). widths[0] is the input width.
template <typename Scalar>
class Mlp {
 public:
  struct Cache {
    std::vector<Vec<Scalar>> pre;   // pre-activation per hidden layer
    std::vector<Vec<Scalar>> post;  // post[0] = input, post[i+1] = relu(pre[i])
  };
  struct Grad {
    std::vector<Mat<Scalar>> weights;
    std::vector<Vec<Scalar>> biases;
    Vec<Scalar> head;
    void set_zero() {
      for (auto& w : weights) w.setZero();
      for (auto& b : biases) b.setZero();
      head.setZero();
    }
  };

  Mlp() = default;
  explicit Mlp(std::span<const std::int64_t> widths) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      weights_.push_back(Mat<Scalar>::Zero(widths[i + 1], widths[i]));
      biases_.push_back(Vec<Scalar>::Zero(widths[i + 1]));
    }
    head_ = Vec<Scalar>::Zero(widths.back());
  }

  /// Glorot-uniform weights from `rng`; biases and head start small.
  void init(Stream& rng) {
    for (auto& w : weights_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
          w(i, j) = Scalar((2.0 * rng.uniform() - 1.0) * limit);
        }
      }
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(head_.size() + 1));
    for (Eigen::Index i = 0; i < head_.size(); ++i) {
      head_(i) = Scalar((2.0 * rng.uniform() - 1.0) * limit);
    }
  }

  Eigen::Index input_width() const {
    return weights_.empty() ? head_.size() : weights_.front().cols();
  }

  Grad make_grad() const {
    Grad g;
    for (const auto& w : weights_) g.weights.push_back(Mat<Scalar>::Zero(w.rows(), w.cols()));
    for (const auto& b : biases_) g.biases.push_back(Vec<Scalar>::Zero(b.size()));
    g.head = Vec<Scalar>::Zero(head_.size());
    return g;
  }

  Scalar forward(const Vec<Scalar>& x, Cache& cache) const {
    cache.pre.resize(weights_.size());
    cache.post.resize(weights_.size() + 1);
    cache.post[0] = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      cache.pre[l].noalias() = weights_[l] * cache.post[l];
      cache.pre[l] += biases_[l];
      cache.post[l + 1] = cache.pre[l].cwiseMax(Scalar(0));
    }
    return head_.dot(cache.post.back());
  }

  /// Accumulates d(out)/d(params) * dout into `grad`; returns dout * d(out)/dx.
  Vec<Scalar> backward(const Cache& cache, Scalar dout, Grad& grad) const {
    grad.head += dout * cache.post.back();
    Vec<Scalar> delta = dout * head_;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      delta = (cache.pre[l].array() > Scalar(0)).select(delta, Scalar(0));
      grad.weights[l].noalias() += delta * cache.post[l].transpose();
      grad.biases[l] += delta;
      delta = weights_[l].transpose() * delta;
    }
    return delta;
  }

  void apply(const Grad& g, Scalar lr) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l] -= lr * g.weights[l];
      biases_[l] -= lr * g.biases[l];
    }
    head_ -= lr * g.head;
  }

  void visit(const BlockVisitor<Scalar>& f, std::string_view prefix) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      f(std::string(prefix) + ".w" + std::to_string(l), weights_[l].data(),
        weights_[l].rows(), weights_[l].cols());
      f(std::string(prefix) + ".b" + std::to_string(l), biases_[l].data(),
        biases_[l].size(), 1);
    }
    f(std::string(prefix) + ".head", head_.data(), head_.size(), 1);
  }

  bool all_finite() const {
    for (const auto& w : weights_) if (!w.allFinite()) return false;
    for (const auto& b : biases_) if (!b.allFinite()) return false;
    return head_.allFinite();
  }

 private:
  std::vector<Mat<Scalar>> weights_;
  std::vector<Vec<Scalar>> biases_;
  Vec<Scalar> head_;
};

/// Gradient rows for the embedding (or per-node scalar) tables touched by
/// one mini-batch.
template <typename Scalar>
class SparseRowGrad {
 public:
  explicit SparseRowGrad(Eigen::Index dim = 0) : dim_(dim) {}

  Vec<Scalar>& row(NodeId id) {
    auto [it, inserted] = index_.try_emplace(id, used_);
    if (inserted) {
      if (used_ == rows_.size()) rows_.emplace_back(dim_);
      rows_[used_].setZero();
      ids_.push_back(id);
      ++used_;
    }
    return rows_[it->second];
  }

  const Vec<Scalar>* find(NodeId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &rows_[it->second];
  }

  void clear() {
    index_.clear();
    ids_.clear();
    used_ = 0;
  }

  /// Rows in first-touch order.
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < used_; ++i) f(ids_[i], rows_[i]);
  }

 private:
  Eigen::Index dim_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<NodeId> ids_;
  std::vector<Vec<Scalar>> rows_;
  std::size_t used_ = 0;
};

namespace detail {

/// Column-per-node table with entries uniform in +-scale drawn from the
/// (seed, node, table) stream, so values do not depend on visit order.
template <typename Scalar>
Mat<Scalar> embedding_table(std::size_t nodes, Eigen::Index dim, double scale,
                            std::uint64_t seed, std::uint32_t table) {
  Mat<Scalar> m(dim, static_cast<Eigen::Index>(nodes));
  for (std::size_t v = 0; v < nodes; ++v) {
    Stream rng(seed, Purpose::embedding, static_cast<std::uint32_t>(v), table);
    for (Eigen::Index i = 0; i < dim; ++i) {
      m(i, static_cast<Eigen::Index>(v)) =
          Scalar((2.0 * rng.uniform() - 1.0) * scale);
    }
  }
  return m;
}

template <typename Scalar>
void concat_into(Vec<Scalar>& out, const auto& a, const auto& b) {
  out.resize(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
}

enum Table : std::uint32_t {
  kViewerEmbedding = 0,
  kAuthorEmbedding = 1,
  kMlp = 2,
  kGmf = 3,
  kWideViewerEmbedding = 10,
  kWideAuthorEmbedding = 11,
  kWideMlp = 12,
};

}  // namespace detail

/// Neural collaborative filtering: GMF branch plus MLP branch over separate
/// viewer and author embeddings, summed into one logit with a global bias.
template <typename Scalar>
struct NcfParams {
  Mat<Scalar> viewer_embeddings;  // dim x nodes
  Mat<Scalar> author_embeddings;  // dim x nodes
  Vec<Scalar> gmf_weights;
  Mlp<Scalar> mlp;
  Scalar bias = 0;

  static NcfParams zeros(std::size_t nodes, const LearnerConfig& cfg) {
    NcfParams p;
    const auto n = static_cast<Eigen::Index>(nodes);
    p.viewer_embeddings = Mat<Scalar>::Zero(cfg.embedding_dim, n);
    p.author_embeddings = Mat<Scalar>::Zero(cfg.embedding_dim, n);
    p.gmf_weights = Vec<Scalar>::Zero(cfg.embedding_dim);
    p.mlp = Mlp<Scalar>(cfg.mlp_layers);
    return p;
  }

  static NcfParams initialized(std::size_t nodes, const LearnerConfig& cfg) {
    NcfParams p = zeros(nodes, cfg);
    p.viewer_embeddings = detail::embedding_table<Scalar>(
        nodes, cfg.embedding_dim, cfg.init_scale, cfg.seed, detail::kViewerEmbedding);
    p.author_embeddings = detail::embedding_table<Scalar>(
        nodes, cfg.embedding_dim, cfg.init_scale, cfg.seed, detail::kAuthorEmbedding);
    Stream gmf(cfg.seed, Purpose::embedding, 0, detail::kGmf);
    for (Eigen::Index i = 0; i < p.gmf_weights.size(); ++i) {
      p.gmf_weights(i) = Scalar(1.0 + (2.0 * gmf.uniform() - 1.0) * cfg.init_scale);
    }
    Stream mlp(cfg.seed, Purpose::embedding, 0, detail::kMlp);
    p.mlp.init(mlp);
    return p;
  }

  void visit(const BlockVisitor<Scalar>& f) {
    f("ncf.viewer_embeddings", viewer_embeddings.data(), viewer_embeddings.rows(),
      viewer_embeddings.cols());
    f("ncf.author_embeddings", author_embeddings.data(), author_embeddings.rows(),
      author_embeddings.cols());
    f("ncf.gmf_weights", gmf_weights.data(), gmf_weights.size(), 1);
    mlp.visit(f, "ncf.mlp");
    f("ncf.bias", &bias, 1, 1);
  }

  bool all_finite() const {
    return viewer_embeddings.allFinite() && author_embeddings.allFinite() &&
           gmf_weights.allFinite() && mlp.all_finite() && std::isfinite(bias);
  }
};

template <typename Scalar>
struct NcfGrad {
  SparseRowGrad<Scalar> viewer_embeddings;
  SparseRowGrad<Scalar> author_embeddings;
  Vec<Scalar> gmf_weights;
  typename Mlp<Scalar>::Grad mlp;
  Scalar bias = 0;

  explicit NcfGrad(const NcfParams<Scalar>& p)
      : viewer_embeddings(p.viewer_embeddings.rows()),
        author_embeddings(p.author_embeddings.rows()),
        gmf_weights(Vec<Scalar>::Zero(p.gmf_weights.size())),
        mlp(p.mlp.make_grad()) {}

  void clear() {
    viewer_embeddings.clear();
    author_embeddings.clear();
    gmf_weights.setZero();
    mlp.set_zero();
    bias = 0;
  }
};

template <typename Scalar>
struct ForwardCache {
  typename Mlp<Scalar>::Cache mlp;
  Vec<Scalar> input;
};

template <typename Scalar>
Scalar ncf_logit(NodeId viewer, NodeId author, const NcfParams<Scalar>& p,
                 ForwardCache<Scalar>& cache) {
  const auto ev = p.viewer_embeddings.col(viewer);
  const auto ea = p.author_embeddings.col(author);
  detail::concat_into(cache.input, ev, ea);
  const Scalar gmf = p.gmf_weights.dot(ev.cwiseProduct(ea));
  return gmf + p.mlp.forward(cache.input, cache.mlp) + p.bias;
}

/// sigmoid(gmf_weights . (e_v * e_a) + MLP([e_v; e_a]) + bias).
template <typename Scalar>
Scalar ncf_forward(NodeId viewer, NodeId author, const NcfParams<Scalar>& p) {
  ForwardCache<Scalar> cache;
  return sigmoid(ncf_logit(viewer, author, p, cache));
}

/// Adds weight * d loss / d params for one example; returns the loss.
template <typename Scalar>
Scalar ncf_accumulate(const Interaction& ex, Scalar weight,
                      const NcfParams<Scalar>& p, const LearnerConfig& cfg,
                      NcfGrad<Scalar>& g, ForwardCache<Scalar>& cache) {
  const Scalar z = ncf_logit(ex.viewer, ex.author, p, cache);
  const Scalar alpha = Scalar(cfg.focal_alpha);
  const Scalar gamma = Scalar(cfg.focal_gamma);
  const Scalar loss = focal_loss(sigmoid(z), ex.liked, alpha, gamma);
  const Scalar dz = weight * focal_loss_dlogit(z, ex.liked, alpha, gamma);

  const auto ev = p.viewer_embeddings.col(ex.viewer);
  const auto ea = p.author_embeddings.col(ex.author);
  const Eigen::Index d = ev.size();
  g.bias += dz;
  g.gmf_weights += dz * ev.cwiseProduct(ea);
  const Vec<Scalar> dx = p.mlp.backward(cache.mlp, dz, g.mlp);
  g.viewer_embeddings.row(ex.viewer) +=
      dz * p.gmf_weights.cwiseProduct(ea) + dx.head(d);
  g.author_embeddings.row(ex.author) +=
      dz * p.gmf_weights.cwiseProduct(ev) + dx.tail(d);
  return loss;
}

template <typename Scalar>
void ncf_apply(NcfParams<Scalar>& p, const NcfGrad<Scalar>& g, Scalar lr) {
  g.viewer_embeddings.for_each([&](NodeId id, const Vec<Scalar>& row) {
    p.viewer_embeddings.col(id) -= lr * row;
  });
  g.author_embeddings.for_each([&](NodeId id, const Vec<Scalar>& row) {
    p.author_embeddings.col(id) -= lr * row;
  });
  p.gmf_weights -= lr * g.gmf_weights;
  p.mlp.apply(g.mlp, lr);
  p.bias -= lr * g.bias;
}

/// Wide & Deep: per-viewer and per-author weights, a same-label cross
/// feature and a global bias (wide) plus an MLP over embeddings (deep).
template <typename Scalar>
struct WideDeepParams {
  Mat<Scalar> viewer_embeddings;
  Mat<Scalar> author_embeddings;
  Vec<Scalar> viewer_weights;
  Vec<Scalar> author_weights;
  Scalar cross_weight = 0;
  Mlp<Scalar> mlp;
  Scalar bias = 0;

  static WideDeepParams zeros(std::size_t nodes, const LearnerConfig& cfg) {
    WideDeepParams p;
    const auto n = static_cast<Eigen::Index>(nodes);
    p.viewer_embeddings = Mat<Scalar>::Zero(cfg.embedding_dim, n);
    p.author_embeddings = Mat<Scalar>::Zero(cfg.embedding_dim, n);
    p.viewer_weights = Vec<Scalar>::Zero(n);
    p.author_weights = Vec<Scalar>::Zero(n);
    p.mlp = Mlp<Scalar>(cfg.mlp_layers);
    return p;
  }

  static WideDeepParams initialized(std::size_t nodes, const LearnerConfig& cfg) {
    WideDeepParams p = zeros(nodes, cfg);
    p.viewer_embeddings = detail::embedding_table<Scalar>(
        nodes, cfg.embedding_dim, cfg.init_scale, cfg.seed,
        detail::kWideViewerEmbedding);
    p.author_embeddings = detail::embedding_table<Scalar>(
        nodes, cfg.embedding_dim, cfg.init_scale, cfg.seed,
        detail::kWideAuthorEmbedding);
    Stream mlp(cfg.seed, Purpose::embedding, 0, detail::kWideMlp);
    p.mlp.init(mlp);
    return p;
  }

  void visit(const BlockVisitor<Scalar>& f) {
    f("widedeep.viewer_embeddings", viewer_embeddings.data(),
      viewer_embeddings.rows(), viewer_embeddings.cols());
    f("widedeep.author_embeddings", author_embeddings.data(),
      author_embeddings.rows(), author_embeddings.cols());
    f("widedeep.viewer_weights", viewer_weights.data(), viewer_weights.size(), 1);
    f("widedeep.author_weights", author_weights.data(), author_weights.size(), 1);
    f("widedeep.cross_weight", &cross_weight, 1, 1);
    mlp.visit(f, "widedeep.mlp");
    f("widedeep.bias", &bias, 1, 1);
  }

  bool all_finite() const {
    return viewer_embeddings.allFinite() && author_embeddings.allFinite() &&
           viewer_weights.allFinite() && author_weights.allFinite() &&
           std::isfinite(cross_weight) && mlp.all_finite() && std::isfinite(bias);
  }
};

template <typename Scalar>
struct WideDeepGrad {
  SparseRowGrad<Scalar> viewer_embeddings;
  SparseRowGrad<Scalar> author_embeddings;
  SparseRowGrad<Scalar> viewer_weights{1};
  SparseRowGrad<Scalar> author_weights{1};
  Scalar cross_weight = 0;
  typename Mlp<Scalar>::Grad mlp;
  Scalar bias = 0;

  explicit WideDeepGrad(const WideDeepParams<Scalar>& p)
      : viewer_embeddings(p.viewer_embeddings.rows()),
        author_embeddings(p.author_embeddings.rows()),
        mlp(p.mlp.make_grad()) {}

  void clear() {
    viewer_embeddings.clear();
    author_embeddings.clear();
    viewer_weights.clear();
    author_weights.clear();
    cross_weight = 0;
    mlp.set_zero();
    bias = 0;
  }
};

template <typename Scalar>
Scalar widedeep_logit(NodeId viewer, NodeId author, bool same_label,
                      const WideDeepParams<Scalar>& p,
                      ForwardCache<Scalar>& cache) {
  detail::concat_into(cache.input, p.viewer_embeddings.col(viewer),
                      p.author_embeddings.col(author));
  const Scalar wide = p.viewer_weights(viewer) + p.author_weights(author) +
                      (same_label ? p.cross_weight : Scalar(0)) + p.bias;
  return wide + p.mlp.forward(cache.input, cache.mlp);
}

/// sigmoid(w_v + w_a + w_cross [same label] + MLP([e_v; e_a]) + bias).
template <typename Scalar>
Scalar widedeep_forward(NodeId viewer, NodeId author, std::uint8_t viewer_label,
                        std::uint8_t author_label,
                        const WideDeepParams<Scalar>& p) {
  ForwardCache<Scalar> cache;
  return sigmoid(
      widedeep_logit(viewer, author, viewer_label == author_label, p, cache));
}

template <typename Scalar>
Scalar widedeep_accumulate(const Interaction& ex, bool same_label, Scalar weight,
                           const WideDeepParams<Scalar>& p,
                           const LearnerConfig& cfg, WideDeepGrad<Scalar>& g,
                           ForwardCache<Scalar>& cache) {
  const Scalar z = widedeep_logit(ex.viewer, ex.author, same_label, p, cache);
  const Scalar alpha = Scalar(cfg.focal_alpha);
  const Scalar gamma = Scalar(cfg.focal_gamma);
  const Scalar loss = focal_loss(sigmoid(z), ex.liked, alpha, gamma);
  const Scalar dz = weight * focal_loss_dlogit(z, ex.liked, alpha, gamma);

  const Eigen::Index d = p.viewer_embeddings.rows();
  g.bias += dz;
  if (same_label) g.cross_weight += dz;
  g.viewer_weights.row(ex.viewer)(0) += dz;
  g.author_weights.row(ex.author)(0) += dz;
  const Vec<Scalar> dx = p.mlp.backward(cache.mlp, dz, g.mlp);
  g.viewer_embeddings.row(ex.viewer) += dx.head(d);
  g.author_embeddings.row(ex.author) += dx.tail(d);
  return loss;
}

template <typename Scalar>
void widedeep_apply(WideDeepParams<Scalar>& p, const WideDeepGrad<Scalar>& g,
                    Scalar lr) {
  g.viewer_embeddings.for_each([&](NodeId id, const Vec<Scalar>& row) {
    p.viewer_embeddings.col(id) -= lr * row;
  });
  g.author_embeddings.for_each([&](NodeId id, const Vec<Scalar>& row) {
    p.author_embeddings.col(id) -= lr * row;
  });
  g.viewer_weights.for_each([&](NodeId id, const Vec<Scalar>& row) {
    p.viewer_weights(id) -= lr * row(0);
  });
  g.author_weights.for_each([&](NodeId id, const Vec<Scalar>& row) {
    p.author_weights(id) -= lr * row(0);
  });
  p.cross_weight -= lr * g.cross_weight;
  p.mlp.apply(g.mlp, lr);
  p.bias -= lr * g.bias;
}

/// A trainable model as seen by the trainer and the learned ranker.
template <typename Scalar>
class NcfModel {
 public:
  using Params = NcfParams<Scalar>;
  using Grad = NcfGrad<Scalar>;

  NcfModel(Params params, const TraitAssignment& /*traits*/)
      : params_(std::move(params)) {}

  Scalar predict(NodeId viewer, NodeId author) const {
    return ncf_forward(viewer, author, params_);
  }
  Scalar accumulate(const Interaction& ex, Scalar weight,
                    const LearnerConfig& cfg, Grad& g,
                    ForwardCache<Scalar>& cache) const {
    return ncf_accumulate(ex, weight, params_, cfg, g, cache);
  }
  void apply(const Grad& g, Scalar lr) { ncf_apply(params_, g, lr); }
  Grad make_grad() const { return Grad(params_); }

  Params& params() { return params_; }
  const Params& params() const { return params_; }

 private:
  Params params_;
};

template <typename Scalar>
class WideDeepModel {
 public:
  using Params = WideDeepParams<Scalar>;
  using Grad = WideDeepGrad<Scalar>;

  WideDeepModel(Params params, const TraitAssignment& traits)
      : params_(std::move(params)), traits_(&traits) {}

  Scalar predict(NodeId viewer, NodeId author) const {
    return widedeep_forward(viewer, author, traits_->label(viewer),
                            traits_->label(author), params_);
  }
  Scalar accumulate(const Interaction& ex, Scalar weight,
                    const LearnerConfig& cfg, Grad& g,
                    ForwardCache<Scalar>& cache) const {
    const bool same = traits_->label(ex.viewer) == traits_->label(ex.author);
    return widedeep_accumulate(ex, same, weight, params_, cfg, g, cache);
  }
  void apply(const Grad& g, Scalar lr) { widedeep_apply(params_, g, lr); }
  Grad make_grad() const { return Grad(params_); }

  Params& params() { return params_; }
  const Params& params() const { return params_; }

 private:
  Params params_;
  const TraitAssignment* traits_;
};

struct TrainReport {
  std::int32_t tick = 0;
  std::size_t examples = 0;
  std::vector<double> epoch_losses;  // mean loss per epoch, pre-update
};

/// epochs_per_tick passes of mini-batch SGD over the whole log, shuffled
/// per (seed, tick, epoch). An empty log leaves the model untouched.
/// Throws SimulationError if any parameter becomes non-finite.
template <class Model>
TrainReport train_tick(Model& model, std::span<const Interaction> log,
                       const LearnerConfig& cfg, std::int32_t tick) {
  using Scalar = decltype(model.predict(NodeId{}, NodeId{}));
  TrainReport report;
  report.tick = tick;
  report.examples = log.size();
  if (log.empty()) return report;

  std::vector<std::uint32_t> order(log.size());
  auto grad = model.make_grad();
  ForwardCache<Scalar> cache;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const Scalar lr = Scalar(cfg.learning_rate);

  for (std::int64_t epoch = 0; epoch < cfg.epochs_per_tick; ++epoch) {
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    Stream rng(cfg.seed, Purpose::train_shuffle, static_cast<std::uint32_t>(tick),
               static_cast<std::uint32_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const Scalar weight = Scalar(1) / Scalar(end - start);
      grad.clear();
      for (std::size_t i = start; i < end; ++i) {
        loss_sum += static_cast<double>(
            model.accumulate(log[order[i]], weight, cfg, grad, cache));
      }
      model.apply(grad, lr);
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
    if (!model.params().all_finite()) {
      throw SimulationError("non-finite learner parameter at tick " +
                            std::to_string(tick) + ", epoch " +
                            std::to_string(epoch));
    }
  }
  return report;
}

/// Scores each candidate by score(viewer, author) and keeps the n best:
/// score descending, then created_tick descending, then id descending.
RankedFeed rank_learned(NodeId viewer, std::span<const Tweet> candidates,
                        const RankContext& ctx, std::size_t n,
                        const std::function<double(NodeId, NodeId)>& score);

/// FeedRanker adapter: trains on the interaction log each tick, serves by
/// predicted like probability of the author.
template <class Model>
class LearnedRanker final : public FeedRanker {
 public:
  LearnedRanker(std::string name, Model model, LearnerConfig cfg)
      : name_(std::move(name)), model_(std::move(model)), cfg_(std::move(cfg)) {}

  std::string_view name() const override { return name_; }

  RankedFeed rank(NodeId viewer, std::span<const Tweet> candidates,
                  const RankContext& ctx, std::size_t n) const override {
    return rank_learned(viewer, candidates, ctx, n, [this](NodeId v, NodeId a) {
      return static_cast<double>(model_.predict(v, a));
    });
  }

  void notify_feedback(std::span<const Interaction> log,
                       std::int32_t tick) override {
    reports_.push_back(train_tick(model_, log, cfg_, tick));
  }

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const std::vector<TrainReport>& reports() const { return reports_; }

 private:
  std::string name_;
  Model model_;
  LearnerConfig cfg_;
  std::vector<TrainReport> reports_;
};

using NcfRanker = LearnedRanker<NcfModel<double>>;
using WideDeepRanker = LearnedRanker<WideDeepModel<double>>;

/// Checkpoint format: "FSPARAMS" magic, u64 block count, then per block
/// u64 rows, u64 cols and rows*cols little-endian f64 values (column-major).
template <class Params>
void save_params(Params& params, const std::filesystem::path& path);
template <class Params>
void load_params(Params& params, const std::filesystem::path& path);

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), bytes.size());
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), bytes.size());
  if (!in) throw Error("truncated parameter file");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return std::bit_cast<T>(bytes);
}

inline constexpr char kParamsMagic[8] = {'F', 'S', 'P', 'A', 'R', 'A', 'M', 'S'};

}  // namespace detail

template <class Params>
void save_params(Params& params, const std::filesystem::path& path) {
  using Scalar = std::remove_cvref_t<decltype(params.bias)>;
  std::vector<std::tuple<Scalar*, Eigen::Index, Eigen::Index>> blocks;
  params.visit([&](std::string_view, Scalar* data, Eigen::Index r, Eigen::Index c) {
    blocks.emplace_back(data, r, c);
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(detail::kParamsMagic, sizeof detail::kParamsMagic);
  detail::write_le<std::uint64_t>(out, blocks.size());
  for (const auto& [data, rows, cols] : blocks) {
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(rows));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(cols));
    for (Eigen::Index i = 0; i < rows * cols; ++i) {
      detail::write_le<double>(out, static_cast<double>(data[i]));
    }
  }
}

template <class Params>
void load_params(Params& params, const std::filesystem::path& path) {
  using Scalar = std::remove_cvref_t<decltype(params.bias)>;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, detail::kParamsMagic)) {
    throw Error("not a parameter file: " + path.string());
  }
  const auto count = detail::read_le<std::uint64_t>(in);
  std::size_t seen = 0;
  params.visit([&](std::string_view name, Scalar* data, Eigen::Index r, Eigen::Index c) {
    if (seen++ >= count) throw Error("parameter file has too few blocks");
    const auto rows = detail::read_le<std::uint64_t>(in);
    const auto cols = detail::read_le<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(r) || cols != static_cast<std::uint64_t>(c)) {
      throw Error("shape mismatch for " + std::string(name));
    }
    for (Eigen::Index i = 0; i < r * c; ++i) {
      data[i] = Scalar(detail::read_le<double>(in));
    }
  });
  if (seen != count) throw Error("parameter file has extra blocks");
}

}  // namespace feedsim
