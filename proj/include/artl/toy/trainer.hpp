#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/decoder.hpp"
#include "artl/error.hpp"
#include "artl/parallel.hpp"
#include "artl/toy/model.hpp"
#include "artl/toy/synth.hpp"

namespace artl::toy {

enum class LossKind { Standard, Restricted };
enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  LossKind loss = LossKind::Standard;
  int left = 0;   // b_l, encoder frames
  int right = 0;  // b_r, encoder frames
  double learning_rate = 0.003;
  int steps = 2000;
  int batch = 8;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  Optimizer optimizer = Optimizer::Adam;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> loss_curve;  // mean batch loss per step
};

/// Band plans for every utterance: vacuous for the standard loss, restricted
/// around the ground-truth end frames otherwise.
inline std::vector<BandPlan> make_plans(const TrainConfig& cfg, std::span<const SynthUtterance> corpus) {
  std::vector<BandPlan> plans;
  plans.reserve(corpus.size());
  for (const auto& utt : corpus) {
    try {
      plans.push_back(cfg.loss == LossKind::Standard ? BandPlan::vacuous(utt.frames(), utt.target.size())
                                                     : BandPlan::make(utt.ends, utt.frames(), cfg.left, cfg.right));
    } catch (const BandInfeasible& e) {
      throw BandInfeasible("utterance " + utt.id + ": " + e.what());
    }
  }
  return plans;
}

inline double squared_norm(const ToyModel& g) {
  double s = 0.0;
  g.visit([&](const std::string&, const Eigen::MatrixXd& m) { s += m.squaredNorm(); });
  return s;
}

/// Mean loss and mean gradient over a set of utterances. Per-utterance gradients
/// are reduced in index order so the result does not depend on the thread count.
inline double batch_gradient(const ToyModel& model, std::span<const SynthUtterance> corpus,
                             std::span<const BandPlan> plans, std::span<const std::size_t> indices, ToyModel& grad) {
  std::vector<ToyModel> parts(indices.size(), grad.zeros_like());
  std::vector<double> losses(indices.size());
  const double weight = 1.0 / static_cast<double>(indices.size());
  parallel_for(indices.size(), [&](std::size_t i) {
    const auto& utt = corpus[indices[i]];
    losses[i] = utterance_loss(model, utt.features, utt.target, plans[indices[i]], &parts[i], weight);
  });
  grad = grad.zeros_like();
  double mean = 0.0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::vector<Eigen::MatrixXd*> dst;
    grad.visit([&](const std::string&, Eigen::MatrixXd& m) { dst.push_back(&m); });
    std::size_t p = 0;
    parts[i].visit([&](const std::string&, const Eigen::MatrixXd& m) { *dst[p++] += m; });
    mean += losses[i] * weight;
  }
  return mean;
}

/// SGD or Adam on globally clipped gradients. Starts from `start` when given
/// (fine-tuning), otherwise from a seeded initialization.
inline TrainResult train(const TrainConfig& cfg, std::span<const SynthUtterance> corpus, const ToyDims& dims,
                         std::optional<ToyModel> start = std::nullopt) {
  if (corpus.empty()) throw EmptyCorpus("no training utterances");
  if (cfg.batch < 1 || cfg.steps < 0) throw InvalidArgument("batch must be >= 1 and steps >= 0");
  const auto plans = make_plans(cfg, corpus);
  TrainResult out{start ? *start : ToyModel::init(dims, cfg.seed), {}};
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  ToyModel grad = out.model.zeros_like();
  ToyModel m1 = out.model.zeros_like();
  ToyModel m2 = out.model.zeros_like();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch));
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& i : batch) i = pick(rng);
    out.loss_curve.push_back(batch_gradient(out.model, corpus, plans, batch, grad));
    const double norm = std::sqrt(squared_norm(grad));
    const double scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
    std::vector<Eigen::MatrixXd*> params, first, second;
    out.model.visit([&](const std::string&, Eigen::MatrixXd& m) { params.push_back(&m); });
    m1.visit([&](const std::string&, Eigen::MatrixXd& m) { first.push_back(&m); });
    m2.visit([&](const std::string&, Eigen::MatrixXd& m) { second.push_back(&m); });
    const double c1 = 1.0 - std::pow(kBeta1, step + 1);
    const double c2 = 1.0 - std::pow(kBeta2, step + 1);
    std::size_t p = 0;
    grad.visit([&](const std::string&, const Eigen::MatrixXd& g) {
      if (cfg.optimizer == Optimizer::Sgd) {
        *params[p] -= cfg.learning_rate * scale * g;
      } else {
        *first[p] = kBeta1 * *first[p] + (1.0 - kBeta1) * scale * g;
        *second[p] = kBeta2 * *second[p] + (1.0 - kBeta2) * (scale * g).cwiseAbs2();
        *params[p] -= (cfg.learning_rate / c1) *
                      first[p]->cwiseQuotient(((*second[p] / c2).cwiseSqrt().array() + kEps).matrix());
      }
      ++p;
    });
  }
  return out;
}

/// Mean per-utterance objective of `cfg` over the corpus.
inline double corpus_loss(const ToyModel& model, const TrainConfig& cfg, std::span<const SynthUtterance> corpus) {
  const auto plans = make_plans(cfg, corpus);
  std::vector<double> losses(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    losses[i] = utterance_loss(model, corpus[i].features, corpus[i].target, plans[i]);
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(corpus.size());
}

inline int edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<int> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

struct EvalResult {
  int ref_tokens = 0;
  int errors = 0;
  DelayStats delays;
  double token_error() const { return ref_tokens ? static_cast<double>(errors) / ref_tokens : 0.0; }
};

struct DecodedUtterance {
  DecodeResult decode;
  EmissionTimeline timeline;
};

inline DecodedUtterance decode_utterance(const ToyModel& model, const SynthUtterance& utt, const DecoderOptions& opts,
                                         double frame_seconds) {
  ModelScorer scorer(model, utt.features);
  DecodedUtterance out{beam_decode(scorer, utt.frames(), opts), {}};
  out.timeline = measure_delays(out.decode.best, out.decode.partials, utt.target.tokens, utt.ends, frame_seconds);
  return out;
}

/// Token error rate (edit distance over reference tokens) and ED/FD on exactly matched utterances.
inline EvalResult evaluate(const ToyModel& model, std::span<const SynthUtterance> corpus, const DecoderOptions& opts,
                           double frame_seconds) {
  std::vector<DecodedUtterance> decoded(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) { decoded[i] = decode_utterance(model, corpus[i], opts, frame_seconds); });
  EvalResult r;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    r.ref_tokens += corpus[i].target.size();
    r.errors += edit_distance(decoded[i].decode.best.tokens, corpus[i].target.tokens);
    r.delays.add(decoded[i].timeline);
  }
  return r;
}

struct SweepRow {
  std::optional<int> right;  // nullopt: vacuous band (standard loss)
  double token_error = 0.0;
  double avg_ed = 0.0;  // seconds
  double avg_fd = 0.0;  // seconds
  int matched_tokens = 0;
  double final_loss = 0.0;
};

/// Trains one model per b_r value (same corpus, same seed) and decodes the held-out set.
inline std::vector<SweepRow> sweep_br(std::span<const std::optional<int>> rights, const TrainConfig& base,
                                      std::span<const SynthUtterance> train_set,
                                      std::span<const SynthUtterance> heldout, const ToyDims& dims,
                                      const DecoderOptions& opts, double frame_seconds) {
  if (rights.size() < 2) throw InvalidArgument("sweep needs at least two b_r values");
  std::vector<SweepRow> rows;
  for (const auto& right : rights) {
    TrainConfig cfg = base;
    cfg.loss = right ? LossKind::Restricted : LossKind::Standard;
    cfg.right = right.value_or(0);
    auto trained = train(cfg, train_set, dims);
    auto eval = evaluate(trained.model, heldout, opts, frame_seconds);
    rows.push_back({right, eval.token_error(), eval.delays.avg_ed(), eval.delays.avg_fd(), eval.delays.count,
                    corpus_loss(trained.model, cfg, train_set)});
  }
  return rows;
}

}  // namespace artl::toy
