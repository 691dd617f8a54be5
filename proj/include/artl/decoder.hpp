#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/error.hpp"
#include "artl/lattice.hpp"
#include "artl/logmath.hpp"

namespace artl {

/// A decoding hypothesis. `log_prob` is the mass of every explored alignment of
/// `tokens`; `frames` are the emission frames of the single most probable one.
struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  std::vector<int> frames;
  double path_log_prob = 0.0;
};

/// Total order used for pruning: higher score, then fewer tokens, then smaller token ids.
inline bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

/// Source of joiner rows: log-distribution over the vocab at frame t given the emitted prefix.
template <class S>
concept JointScorer = requires(S& s, int t, std::span<const int> prefix) {
  { s.vocab_size() } -> std::convertible_to<int>;
  { s.blank() } -> std::convertible_to<int>;
  { s.log_probs(t, prefix) } -> std::convertible_to<std::vector<double>>;
};

/// Scores from a fixed lattice: the row is selected by prefix length and no
/// emission is possible past the last row.
class LatticeScorer {
 public:
  explicit LatticeScorer(const Lattice& lattice) : lattice_(&lattice) {}

  int vocab_size() const { return lattice_->vocab(); }
  int blank() const { return lattice_->blank(); }
  int frame_count() const { return lattice_->frames(); }

  std::vector<double> log_probs(int t, std::span<const int> prefix) const {
    const int u = static_cast<int>(prefix.size());
    if (u > lattice_->tokens()) throw DimensionMismatch("prefix longer than the lattice allows");
    auto row = lattice_->cell(t, u);
    std::vector<double> out(row.begin(), row.end());
    if (u == lattice_->tokens())
      for (int k = 0; k < lattice_->vocab(); ++k)
        if (k != lattice_->blank()) out[k] = kLogZero;
    return out;
  }

 private:
  const Lattice* lattice_;
};

struct DecoderOptions {
  int beam = 4;
  int max_symbols_per_frame = 3;
  std::optional<int> eos_id;  // when set, P(eos) of the 1-best is recorded per frame
};

struct DecodeResult {
  Hypothesis best;
  std::vector<Hypothesis> partials;  // 1-best after each frame
  std::vector<double> eos_probs;     // per frame, empty unless eos_id is set
  std::vector<Hypothesis> beam;      // final beam, best first
};

/// Breadth-first transducer beam search advanced one encoder frame at a time.
///
/// Within a frame every hypothesis may emit up to `max_symbols_per_frame`
/// tokens before the blank that moves it to the next frame. Hypotheses with the
/// same token sequence are merged by log-sum-exp; the emission frames of the
/// constituent with the better single alignment are kept.
template <JointScorer Scorer>
class StreamingDecoder {
 public:
  StreamingDecoder(Scorer& scorer, DecoderOptions options) : scorer_(&scorer), options_(options) {
    if (options_.beam < 1) throw InvalidArgument("beam must be >= 1");
    if (options_.max_symbols_per_frame < 0) throw InvalidArgument("max_symbols_per_frame must be >= 0");
    beam_.push_back(Hypothesis{});
  }

  int frames_consumed() const { return frame_; }

  /// Consumes the next frame.
  void advance() {
    const int t = frame_;
    const int blank = scorer_->blank();
    const int vocab = scorer_->vocab_size();
    Pool next;
    std::vector<Hypothesis> level = beam_;
    for (int emitted = 0; !level.empty(); ++emitted) {
      Pool grown;
      for (const auto& h : level) {
        const std::vector<double> lp = scorer_->log_probs(t, h.tokens);
        Hypothesis stay = h;
        stay.log_prob += lp[blank];
        stay.path_log_prob += lp[blank];
        merge(next, std::move(stay));
        if (emitted >= options_.max_symbols_per_frame) continue;
        for (int k = 0; k < vocab; ++k) {
          if (k == blank || lp[k] == kLogZero) continue;
          Hypothesis child = h;
          child.tokens.push_back(k);
          child.frames.push_back(t);
          child.log_prob += lp[k];
          child.path_log_prob += lp[k];
          merge(grown, std::move(child));
        }
      }
      level = prune(std::move(grown));
    }
    beam_ = prune(std::move(next));
    partials_.push_back(beam_.front());
    if (options_.eos_id) eos_probs_.push_back(std::exp(scorer_->log_probs(t, beam_.front().tokens)[*options_.eos_id]));
    ++frame_;
  }

  const Hypothesis& partial() const { return beam_.front(); }

  DecodeResult finish() const {
    if (frame_ == 0) throw EmptyInput("no frames were decoded");
    return {beam_.front(), partials_, eos_probs_, beam_};
  }

 private:
  using Pool = std::map<std::vector<int>, Hypothesis>;

  static void merge(Pool& pool, Hypothesis h) {
    auto [it, inserted] = pool.try_emplace(h.tokens, h);
    if (inserted) return;
    Hypothesis& kept = it->second;
    kept.log_prob = log_add(kept.log_prob, h.log_prob);
    if (h.path_log_prob > kept.path_log_prob) {
      kept.path_log_prob = h.path_log_prob;
      kept.frames = std::move(h.frames);
    }
  }

  std::vector<Hypothesis> prune(Pool pool) const {
    std::vector<Hypothesis> out;
    out.reserve(pool.size());
    for (auto& [key, h] : pool) out.push_back(std::move(h));
    std::sort(out.begin(), out.end(), ranks_before);
    if (out.size() > static_cast<std::size_t>(options_.beam)) out.resize(static_cast<std::size_t>(options_.beam));
    return out;
  }

  Scorer* scorer_;
  DecoderOptions options_;
  std::vector<Hypothesis> beam_;
  std::vector<Hypothesis> partials_;
  std::vector<double> eos_probs_;
  int frame_ = 0;
};

/// Decodes `frames` frames in one call.
template <JointScorer Scorer>
DecodeResult beam_decode(Scorer& scorer, int frames, DecoderOptions options = {}) {
  if (frames <= 0) throw EmptyInput("no frames to decode");
  StreamingDecoder<Scorer> decoder(scorer, options);
  for (int t = 0; t < frames; ++t) decoder.advance();
  return decoder.finish();
}

inline DecodeResult beam_decode(const Lattice& lattice, DecoderOptions options = {}) {
  LatticeScorer scorer(lattice);
  return beam_decode(scorer, lattice.frames(), options);
}

/// Timing of one recognized token, in frames.
struct TokenTiming {
  int token = 0;
  int gt_frame = 0;     // ET_gt
  int emit_frame = 0;   // ET_asr
  int final_frame = 0;  // FT_asr
};

/// Per-token emission and finalization times of one utterance.
struct EmissionTimeline {
  std::vector<TokenTiming> tokens;
  int excluded = 0;  // reference tokens skipped because the hypothesis did not match
  double frame_seconds = 0.0;

  double emission_delay(std::size_t i) const {
    return (tokens[i].emit_frame - tokens[i].gt_frame) * frame_seconds;
  }
  double finalization_delay(std::size_t i) const {
    return (tokens[i].final_frame - tokens[i].gt_frame) * frame_seconds;
  }
  double avg_ed_seconds() const {
    double s = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) s += emission_delay(i);
    return tokens.empty() ? 0.0 : s / static_cast<double>(tokens.size());
  }
  double avg_fd_seconds() const {
    double s = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) s += finalization_delay(i);
    return tokens.empty() ? 0.0 : s / static_cast<double>(tokens.size());
  }
};

/// ED/FD of `best` against the reference end frames. Delays are only defined on
/// correct recognitions: a hypothesis that differs from the reference contributes
/// no timings and all its reference tokens are counted as excluded.
inline EmissionTimeline measure_delays(const Hypothesis& best, std::span<const Hypothesis> partials,
                                       std::span<const int> ref_tokens, const AlignLabels& ref_ends,
                                       double frame_seconds) {
  if (static_cast<int>(ref_tokens.size()) != ref_ends.size())
    throw DimensionMismatch("reference tokens and end frames differ in length");
  EmissionTimeline out;
  out.frame_seconds = frame_seconds;
  if (!std::equal(best.tokens.begin(), best.tokens.end(), ref_tokens.begin(), ref_tokens.end())) {
    out.excluded = static_cast<int>(ref_tokens.size());
    return out;
  }
  for (std::size_t i = 0; i < best.tokens.size(); ++i) {
    TokenTiming timing{best.tokens[i], ref_ends.frames[i], best.frames[i], best.frames[i]};
    // First frame at which this token (with its whole prefix) was in the 1-best partial.
    for (std::size_t f = 0; f < partials.size(); ++f) {
      const auto& p = partials[f].tokens;
      if (p.size() > i && std::equal(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(i) + 1, best.tokens.begin())) {
        timing.final_frame = static_cast<int>(f);
        break;
      }
    }
    out.tokens.push_back(timing);
  }
  return out;
}

/// Corpus-level ED/FD accumulator.
struct DelayStats {
  double ed_sum = 0.0;
  double fd_sum = 0.0;
  int count = 0;
  int excluded = 0;

  void add(const EmissionTimeline& tl) {
    for (std::size_t i = 0; i < tl.tokens.size(); ++i) {
      ed_sum += tl.emission_delay(i);
      fd_sum += tl.finalization_delay(i);
    }
    count += static_cast<int>(tl.tokens.size());
    excluded += tl.excluded;
  }
  double avg_ed() const { return count ? ed_sum / count : 0.0; }
  double avg_fd() const { return count ? fd_sum / count : 0.0; }
};

}  // namespace artl
