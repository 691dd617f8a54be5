#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/logmath.hpp"
#include "artl/toy/synth.hpp"
#include "artl/transducer_loss.hpp"
#include "artl/verify.hpp"

namespace artl::toy {

struct ToyDims {
  int features = 8;
  int hidden = 32;
  int embed = 16;
  int predictor = 32;
  int joint = 32;
  int vocab = 6;
  int blank = 0;
};

/// Desk-scale transducer: tanh RNN encoder, embedding + affine predictor
/// (conditioned on the last emitted token, blank at the start), and the joiner
/// log_softmax(W_out tanh(W_enc h_t + W_pred g_u + b) + b_out).
struct ToyModel {
  ToyDims dims;
  Eigen::MatrixXd enc_wx, enc_wh, enc_b;
  Eigen::MatrixXd embedding;  // vocab x embed
  Eigen::MatrixXd pred_w, pred_b;
  Eigen::MatrixXd join_enc, join_pred, join_b;
  Eigen::MatrixXd out_w, out_b;

  template <class F>
  void visit(F&& f) {
    f("encoder.wx", enc_wx);
    f("encoder.wh", enc_wh);
    f("encoder.b", enc_b);
    f("predictor.embedding", embedding);
    f("predictor.w", pred_w);
    f("predictor.b", pred_b);
    f("joiner.enc", join_enc);
    f("joiner.pred", join_pred);
    f("joiner.b", join_b);
    f("joiner.out_w", out_w);
    f("joiner.out_b", out_b);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<ToyModel*>(this)->visit([&](const std::string& name, Eigen::MatrixXd& m) {
      f(name, static_cast<const Eigen::MatrixXd&>(m));
    });
  }

  /// All-zero tensors with this model's shapes.
  ToyModel zeros_like() const {
    ToyModel z = *this;
    z.visit([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Eigen::MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  static ToyModel init(const ToyDims& d, std::uint64_t seed) {
    ToyModel m;
    m.dims = d;
    std::mt19937_64 rng(seed);
    auto uniform = [&](int rows, int cols, int fan_in) {
      std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
      Eigen::MatrixXd w(rows, cols);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
      return w;
    };
    m.enc_wx = uniform(d.hidden, d.features, d.features);
    m.enc_wh = uniform(d.hidden, d.hidden, d.hidden);
    m.enc_b = Eigen::MatrixXd::Zero(d.hidden, 1);
    m.embedding = uniform(d.vocab, d.embed, 1);
    m.pred_w = uniform(d.predictor, d.embed, d.embed);
    m.pred_b = Eigen::MatrixXd::Zero(d.predictor, 1);
    m.join_enc = uniform(d.joint, d.hidden, d.hidden);
    m.join_pred = uniform(d.joint, d.predictor, d.predictor);
    m.join_b = Eigen::MatrixXd::Zero(d.joint, 1);
    m.out_w = uniform(d.vocab, d.joint, d.joint);
    m.out_b = Eigen::MatrixXd::Zero(d.vocab, 1);
    return m;
  }
};

/// h_t = tanh(W_x x_t + W_h h_{t-1} + b); strictly causal.
inline Eigen::MatrixXd encode(const ToyModel& m, const Eigen::MatrixXd& features) {
  Eigen::MatrixXd h(m.dims.hidden, features.cols());
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(m.dims.hidden);
  for (Eigen::Index t = 0; t < features.cols(); ++t) {
    prev = (m.enc_wx * features.col(t) + m.enc_wh * prev + m.enc_b.col(0)).array().tanh().matrix();
    h.col(t) = prev;
  }
  return h;
}

inline Eigen::VectorXd predictor_output(const ToyModel& m, int token) {
  return m.pred_w * m.embedding.row(token).transpose() + m.pred_b.col(0);
}

/// Loss of one utterance over the band plan's cells, with the gradient of every
/// parameter added into `grad` (scaled by `weight`) when given. The joiner is only
/// evaluated on the plan's packed cells.
inline double utterance_loss(const ToyModel& m, const Eigen::MatrixXd& features, const Target& target,
                             const BandPlan& plan, ToyModel* grad = nullptr, double weight = 1.0) {
  const int T = static_cast<int>(features.cols());
  const int U = target.size();
  const int D = m.dims.vocab;
  const int J = m.dims.joint;
  if (plan.frames() != T || plan.tokens() != U) throw DimensionMismatch("band plan does not fit the utterance");

  const Eigen::MatrixXd h = encode(m, features);
  const Eigen::MatrixXd enc = m.join_enc * h;
  std::vector<int> context(U + 1);
  Eigen::MatrixXd g(m.dims.predictor, U + 1);
  for (int u = 0; u <= U; ++u) {
    context[u] = u == 0 ? m.dims.blank : target.tokens[u - 1];
    g.col(u) = predictor_output(m, context[u]);
  }
  const Eigen::MatrixXd pred = (m.join_pred * g).colwise() + m.join_b.col(0);

  const auto V = static_cast<Eigen::Index>(plan.cell_count());
  Eigen::MatrixXd act(J, V);
  std::vector<double> logits(static_cast<std::size_t>(V) * D);
  Eigen::Map<Eigen::MatrixXd> logit_mat(logits.data(), D, V);
  for (int u = 0; u <= U; ++u)
    for (int t = plan.row_begin(u); t <= plan.row_end(u); ++t) {
      const auto c = static_cast<Eigen::Index>(plan.cell(t, u));
      act.col(c) = (enc.col(t) + pred.col(u)).array().tanh().matrix();
    }
  logit_mat = (m.out_w * act).colwise() + m.out_b.col(0);

  PackedLattice packed(plan, D, std::move(logits), m.dims.blank);
  LossGrad lg = fused_loss(packed, target);
  if (!grad) return lg.loss;

  Eigen::Map<const Eigen::MatrixXd> dlogits(lg.grad.data(), D, V);
  const Eigen::MatrixXd dl = weight * dlogits;
  grad->out_w += dl * act.transpose();
  grad->out_b += dl.rowwise().sum();
  const Eigen::MatrixXd dpre = ((m.out_w.transpose() * dl).array() * (1.0 - act.array().square())).matrix();

  Eigen::MatrixXd denc = Eigen::MatrixXd::Zero(J, T);
  Eigen::MatrixXd dpred = Eigen::MatrixXd::Zero(J, U + 1);
  for (int u = 0; u <= U; ++u)
    for (int t = plan.row_begin(u); t <= plan.row_end(u); ++t) {
      const auto c = static_cast<Eigen::Index>(plan.cell(t, u));
      denc.col(t) += dpre.col(c);
      dpred.col(u) += dpre.col(c);
    }

  grad->join_b += dpred.rowwise().sum();
  grad->join_pred += dpred * g.transpose();
  const Eigen::MatrixXd dg = m.join_pred.transpose() * dpred;
  grad->pred_b += dg.rowwise().sum();
  for (int u = 0; u <= U; ++u) {
    grad->pred_w += dg.col(u) * m.embedding.row(context[u]);
    grad->embedding.row(context[u]) += (m.pred_w.transpose() * dg.col(u)).transpose();
  }

  grad->join_enc += denc * h.transpose();
  const Eigen::MatrixXd dh = m.join_enc.transpose() * denc;
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(m.dims.hidden);
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::VectorXd dz = ((dh.col(t) + carry).array() * (1.0 - h.col(t).array().square())).matrix();
    grad->enc_wx += dz * features.col(t).transpose();
    if (t > 0) grad->enc_wh += dz * h.col(t - 1).transpose();
    grad->enc_b += dz;
    carry = m.enc_wh.transpose() * dz;
  }
  return lg.loss;
}

/// Worst relative error between backprop and central differences over every parameter.
inline double model_grad_check(ToyModel m, const Eigen::MatrixXd& features, const Target& target,
                               const BandPlan& plan, double eps = 1e-5) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw InvalidArgument("eps must be in [1e-6, 1e-3]");
  ToyModel grad = m.zeros_like();
  utterance_loss(m, features, target, plan, &grad);
  std::vector<const Eigen::MatrixXd*> analytic;
  grad.visit([&](const std::string&, const Eigen::MatrixXd& g) { analytic.push_back(&g); });
  double worst = 0.0;
  std::size_t p = 0;
  m.visit([&](const std::string&, Eigen::MatrixXd& w) {
    const auto& g = *analytic[p++];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w(i);
      w(i) = saved + eps;
      const double up = utterance_loss(m, features, target, plan);
      w(i) = saved - eps;
      const double down = utterance_loss(m, features, target, plan);
      w(i) = saved;
      worst = std::max(worst, relative_error(g(i), (up - down) / (2.0 * eps)));
    }
  });
  return worst;
}

/// Streaming joint scorer over the toy model: the encoder advances as frames are requested.
class ModelScorer {
 public:
  ModelScorer(const ToyModel& model, const Eigen::MatrixXd& features)
      : model_(&model), features_(&features), h_(Eigen::VectorXd::Zero(model.dims.hidden)),
        pred_cache_(static_cast<std::size_t>(model.dims.vocab)) {}

  int vocab_size() const { return model_->dims.vocab; }
  int blank() const { return model_->dims.blank; }
  int frame_count() const { return static_cast<int>(features_->cols()); }

  std::vector<double> log_probs(int t, std::span<const int> prefix) {
    if (t < encoded_ - 1) throw InvalidArgument("frames must be scored in order");
    while (encoded_ <= t) {
      const auto& m = *model_;
      h_ = (m.enc_wx * features_->col(encoded_) + m.enc_wh * h_ + m.enc_b.col(0)).array().tanh().matrix();
      enc_ = m.join_enc * h_;
      ++encoded_;
    }
    const int last = prefix.empty() ? model_->dims.blank : prefix.back();
    auto& pred = pred_cache_[static_cast<std::size_t>(last)];
    if (pred.size() == 0) pred = model_->join_pred * predictor_output(*model_, last) + model_->join_b.col(0);
    const Eigen::VectorXd a = (enc_ + pred).array().tanh().matrix();
    const Eigen::VectorXd z = model_->out_w * a + model_->out_b.col(0);
    std::vector<double> out(z.data(), z.data() + z.size());
    log_softmax(out);
    return out;
  }

 private:
  const ToyModel* model_;
  const Eigen::MatrixXd* features_;
  Eigen::VectorXd h_;
  Eigen::VectorXd enc_;
  std::vector<Eigen::VectorXd> pred_cache_;
  int encoded_ = 0;
};

}  // namespace artl::toy
