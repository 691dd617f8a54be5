#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/error.hpp"
#include "artl/lattice.hpp"

namespace artl::toy {

/// Shape of the synthetic aligned-speech task.
///
/// Every token is rendered as a fixed 3-6 frame pattern followed by silence.
/// Tokens come in confusable groups of two or three that share their pattern;
/// which member was spoken is revealed by a token-specific one-frame cue that lands
/// `min_cue_lag..max_cue_lag` frames after the token's end, inside the following silence. A causal encoder has to
/// look past the ground-truth end to be sure, which is what makes emission
/// delay trade against accuracy. With max_cue_lag = 0 every pattern is unique.
struct SynthConfig {
  int feature_dim = 8;
  Vocab vocab{6, 0, std::nullopt};
  int min_tokens = 1;
  int max_tokens = 4;
  int min_pattern = 3;
  int max_pattern = 6;
  int min_cue_lag = 1;
  int max_cue_lag = 7;
  double noise = 0.15;
  double frame_seconds = 0.06;
  std::uint64_t pattern_seed = 1234;  // fixes the token inventory across corpora
};

struct SynthUtterance {
  std::string id;
  Eigen::MatrixXd features;  // feature_dim x T
  Target target;
  AlignLabels ends;          // ET_gt per token, strictly increasing

  int frames() const { return static_cast<int>(features.cols()); }
};

/// Fixed per-token rendering: pattern frames and the cue vector (zero when cues are off).
struct TokenInventory {
  std::vector<Eigen::MatrixXd> patterns;  // indexed by token id; blank slot empty
  std::vector<Eigen::VectorXd> cues;

  static TokenInventory make(const SynthConfig& cfg) {
    cfg.vocab.validate();
    if (cfg.feature_dim < 2) throw InvalidArgument("synthetic features need at least 2 dims");
    std::mt19937_64 rng(cfg.pattern_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> length(cfg.min_pattern, cfg.max_pattern);
    const int D = cfg.vocab.size;
    const int F = cfg.feature_dim;
    TokenInventory inv;
    inv.patterns.resize(D);
    inv.cues.assign(D, Eigen::VectorXd::Zero(F));
    std::vector<int> symbols;
    for (int k = 0; k < D; ++k)
      if (k != cfg.vocab.blank_id) symbols.push_back(k);
    const std::size_t n = symbols.size();
    for (std::size_t i = 0; i < n; ++i) {
      // Groups of two; an odd symbol out joins the previous group.
      std::size_t leader = i - i % 2;
      if (leader + 1 == n && n >= 3) leader -= 2;
      const bool grouped = cfg.max_cue_lag > 0;
      const int k = symbols[i];
      if (grouped && leader != i) {
        inv.patterns[k] = inv.patterns[symbols[leader]];
      } else {
        Eigen::MatrixXd p(F, length(rng));
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
          Eigen::VectorXd v(F);
          for (int f = 0; f < F; ++f) v[f] = normal(rng);
          p.col(c) = 2.0 * v.normalized();
        }
        inv.patterns[k] = p;
      }
      if (grouped) {
        Eigen::VectorXd v(F);
        for (int f = 0; f < F; ++f) v[f] = normal(rng);
        inv.cues[k] = 2.0 * v.normalized();
      }
    }
    return inv;
  }
};

/// Deterministic per seed.
inline std::vector<SynthUtterance> synth_corpus(int n, const SynthConfig& cfg, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("corpus size must be >= 1");
  const auto inv = TokenInventory::make(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, cfg.noise);
  std::uniform_int_distribution<int> count(cfg.min_tokens, cfg.max_tokens);
  std::uniform_int_distribution<int> lead(2, 4);
  std::uniform_int_distribution<int> slack(1, 3);
  std::uniform_int_distribution<int> lag(std::clamp(cfg.min_cue_lag, 1, std::max(cfg.max_cue_lag, 1)),
                                        std::max(cfg.max_cue_lag, 1));
  std::vector<int> symbols;
  for (int k = 0; k < cfg.vocab.size; ++k)
    if (k != cfg.vocab.blank_id) symbols.push_back(k);
  std::uniform_int_distribution<std::size_t> pick(0, symbols.size() - 1);

  std::vector<SynthUtterance> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SynthUtterance utt;
    utt.id = "synth-" + std::to_string(seed) + "-" + std::to_string(i);
    const int tokens = count(rng);
    std::vector<Eigen::VectorXd> frames;
    auto silence = [&] {
      Eigen::VectorXd v(cfg.feature_dim);
      for (int f = 0; f < cfg.feature_dim; ++f) v[f] = normal(rng);
      return v;
    };
    for (int s = lead(rng); s > 0; --s) frames.push_back(silence());
    for (int j = 0; j < tokens; ++j) {
      // No immediate repeats: the predictor only sees the last token.
      int k = symbols[pick(rng)];
      while (j > 0 && k == utt.target.tokens.back()) k = symbols[pick(rng)];
      const auto& pat = inv.patterns[k];
      for (Eigen::Index c = 0; c < pat.cols(); ++c) {
        Eigen::VectorXd v = pat.col(c);
        for (int f = 0; f < cfg.feature_dim; ++f) v[f] += normal(rng);
        frames.push_back(v);
      }
      utt.target.tokens.push_back(k);
      utt.ends.frames.push_back(static_cast<int>(frames.size()) - 1);
      const int gap = std::max(cfg.max_cue_lag, 0) + slack(rng);
      const int cue_at = cfg.max_cue_lag > 0 ? lag(rng) : 0;
      for (int g = 1; g <= gap; ++g) {
        Eigen::VectorXd v = silence();
        if (g == cue_at) v += inv.cues[k];
        frames.push_back(v);
      }
    }
    utt.features.resize(cfg.feature_dim, static_cast<Eigen::Index>(frames.size()));
    for (std::size_t t = 0; t < frames.size(); ++t) utt.features.col(static_cast<Eigen::Index>(t)) = frames[t];
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

}  // namespace artl::toy
