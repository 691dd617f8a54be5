#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "artl/error.hpp"
#include "artl/lattice.hpp"
#include "artl/logmath.hpp"

namespace artl {

using ShapeMismatch = DimensionMismatch;

/// One entry of a word-level forced alignment. Frames are inclusive.
struct WordSpan {
  std::string text;
  int start = 0;
  int end = 0;
  std::vector<int> pieces;  // word-piece token ids
  bool silence = false;
};

struct WordAlignment {
  std::vector<WordSpan> words;

  void validate() const {
    int prev_end = -1;
    for (std::size_t j = 0; j < words.size(); ++j) {
      const auto& w = words[j];
      const std::string where = "word " + std::to_string(j) + " ('" + w.text + "')";
      if (w.start < 0 || w.start > w.end) throw InvalidArgument(where + ": need 0 <= start <= end");
      if (w.start < prev_end) throw InvalidArgument(where + ": overlaps the previous word");
      if (w.silence && !w.pieces.empty()) throw InvalidArgument(where + ": silence carries pieces");
      prev_end = w.end;
    }
  }

  /// Concatenated word-piece ids, silence skipped.
  std::vector<int> tokens() const {
    std::vector<int> out;
    for (const auto& w : words)
      if (!w.silence) out.insert(out.end(), w.pieces.begin(), w.pieces.end());
    return out;
  }
};

/// a_1..a_U: frame at which each target token ends.
struct AlignLabels {
  std::vector<int> frames;

  int size() const { return static_cast<int>(frames.size()); }
  bool monotone() const { return std::is_sorted(frames.begin(), frames.end()); }
  friend bool operator==(const AlignLabels&, const AlignLabels&) = default;
};

namespace detail {

template <class PieceRule>
AlignLabels label_words(const WordAlignment& words, PieceRule rule) {
  words.validate();
  AlignLabels out;
  for (std::size_t j = 0; j < words.words.size(); ++j) {
    const auto& w = words.words[j];
    if (w.silence) continue;
    if (w.pieces.empty())
      throw EmptyWordPieces("word " + std::to_string(j) + " ('" + w.text + "') has no word pieces");
    const int count = static_cast<int>(w.pieces.size());
    for (int r = 1; r <= count; ++r) out.frames.push_back(rule(w, r, count));
  }
  return out;
}

}  // namespace detail

/// AS1: every piece of word j is labelled with the word end e_j.
inline AlignLabels align_as1(const WordAlignment& words) {
  return detail::label_words(words, [](const WordSpan& w, int, int) { return w.end; });
}

/// AS2: pieces split the word interval evenly, a = s + (r/r')(e - s), rounded half away from zero.
inline AlignLabels align_as2(const WordAlignment& words) {
  return detail::label_words(words, [](const WordSpan& w, int r, int count) {
    // Numerator is non-negative, so floor(x + 1/2) is round-half-away-from-zero.
    const long long num = static_cast<long long>(r) * (w.end - w.start);
    return w.start + static_cast<int>((2 * num + count) / (2LL * count));
  });
}

/// Acoustic-frame labels to encoder frames: floor division, clamped to [0, frames).
/// frames <= 0 disables the upper clamp.
inline AlignLabels subsample_labels(const AlignLabels& labels, int divisor, int frames = 0) {
  if (divisor < 1) throw InvalidArgument("subsample divisor must be >= 1");
  AlignLabels out;
  out.frames.reserve(labels.frames.size());
  for (int a : labels.frames) {
    int e = std::max(a, 0) / divisor;
    if (frames > 0) e = std::min(e, frames - 1);
    out.frames.push_back(e);
  }
  return out;
}

/// Number of encoder frames produced from `acoustic_frames` inputs.
inline int encoder_frames(int acoustic_frames, int divisor) {
  return (acoustic_frames + divisor - 1) / divisor;
}

/// The end-of-sentence token is pinned to the last encoder frame.
inline AlignLabels append_eos_label(AlignLabels labels, int frames) {
  labels.frames.push_back(frames - 1);
  return labels;
}

/// Emission windows and packed row spans of the restricted lattice.
///
/// Token u (1-based) may only be emitted at t in [v_l(u), v_r(u)] with
/// v_l(u) = max(0, a_u - b_l) and v_r(u) = min(T-1, a_u + b_r). Row u of the
/// DP grid is materialized on [lo(u), hi(u)]: lo(u) = v_l(u) (lo(0) = 0) is the
/// earliest frame the row is reachable, hi(u) = v_r(u+1) (hi(U) = T-1) the
/// latest frame from which the rest of the target can still be emitted.
/// Rows are concatenated, so cell (t, u) lives at offset(u) + t - lo(u).
class BandPlan {
 public:
  static BandPlan make(const AlignLabels& labels, int frames, int left, int right) {
    if (frames <= 0) throw DimensionMismatch("band needs at least one frame");
    if (left < 0 || right < 0) throw InvalidArgument("band buffers must be non-negative");
    if (!labels.monotone()) throw BandInfeasible("alignment labels are decreasing");
    BandPlan p;
    p.T_ = frames;
    p.U_ = labels.size();
    p.left_ = left;
    p.right_ = right;
    p.win_lo_.resize(p.U_);
    p.win_hi_.resize(p.U_);
    for (int i = 0; i < p.U_; ++i) {
      const long long a = labels.frames[i];
      p.win_lo_[i] = static_cast<int>(std::max<long long>(0, a - left));
      p.win_hi_[i] = static_cast<int>(std::min<long long>(frames - 1, a + right));
      if (p.win_lo_[i] > p.win_hi_[i])
        throw BandInfeasible("token " + std::to_string(i + 1) + " has an empty emission window");
    }
    p.build_rows();
    return p;
  }

  /// Band that admits every alignment.
  static BandPlan vacuous(int frames, int tokens) {
    if (frames <= 0 || tokens < 0) throw DimensionMismatch("band needs T >= 1, U >= 0");
    BandPlan p;
    p.T_ = frames;
    p.U_ = tokens;
    p.left_ = frames;
    p.right_ = frames;
    p.win_lo_.assign(tokens, 0);
    p.win_hi_.assign(tokens, frames - 1);
    p.build_rows();
    return p;
  }

  int frames() const { return T_; }
  int tokens() const { return U_; }
  int left_buffer() const { return left_; }
  int right_buffer() const { return right_; }

  /// Emission window of token `token` (1-based).
  int window_begin(int token) const { return win_lo_[token - 1]; }
  int window_end(int token) const { return win_hi_[token - 1]; }

  /// Whether y*_{u+1} may be emitted from row u at frame t.
  bool emit_allowed(int u, int t) const { return t >= win_lo_[u] && t <= win_hi_[u]; }

  int row_begin(int u) const { return row_lo_[u]; }
  int row_end(int u) const { return row_hi_[u]; }
  bool contains(int t, int u) const {
    return u >= 0 && u <= U_ && t >= row_lo_[u] && t <= row_hi_[u];
  }
  std::size_t cell(int t, int u) const {
    return offsets_[u] + static_cast<std::size_t>(t - row_lo_[u]);
  }
  /// Packed cell count V.
  std::size_t cell_count() const { return offsets_.back(); }
  std::span<const std::size_t> offsets() const { return offsets_; }

 private:
  void build_rows() {
    row_lo_.resize(U_ + 1);
    row_hi_.resize(U_ + 1);
    offsets_.assign(U_ + 2, 0);
    for (int u = 0; u <= U_; ++u) {
      row_lo_[u] = u == 0 ? 0 : win_lo_[u - 1];
      row_hi_[u] = u == U_ ? T_ - 1 : win_hi_[u];
      offsets_[u + 1] = offsets_[u] + static_cast<std::size_t>(row_hi_[u] - row_lo_[u] + 1);
    }
  }

  int T_ = 0;
  int U_ = 0;
  int left_ = 0;
  int right_ = 0;
  std::vector<int> win_lo_, win_hi_;
  std::vector<int> row_lo_, row_hi_;
  std::vector<std::size_t> offsets_;
};

/// Lattice values stored only on the band rows: a (V x D) buffer plus the plan's index map.
class PackedLattice {
 public:
  PackedLattice(BandPlan plan, int vocab, std::vector<double> values, int blank = 0)
      : plan_(std::move(plan)), D_(vocab), blank_(blank), values_(std::move(values)) {
    if (D_ < 2 || blank_ < 0 || blank_ >= D_) throw ShapeMismatch("packed lattice needs D >= 2 and a valid blank");
    if (values_.size() != plan_.cell_count() * static_cast<std::size_t>(D_))
      throw ShapeMismatch("packed payload does not match V x D");
  }

  const BandPlan& plan() const { return plan_; }
  const BandPlan& layout() const { return plan_; }
  int frames() const { return plan_.frames(); }
  int tokens() const { return plan_.tokens(); }
  int vocab() const { return D_; }
  int blank() const { return blank_; }

  /// Log-probability, log 0 outside the band.
  double operator()(int k, int t, int u) const {
    if (!plan_.contains(t, u)) return kLogZero;
    return values_[plan_.cell(t, u) * static_cast<std::size_t>(D_) + static_cast<std::size_t>(k)];
  }

  std::span<double> cell(std::size_t c) {
    return {values_.data() + c * static_cast<std::size_t>(D_), static_cast<std::size_t>(D_)};
  }
  std::span<const double> cell(std::size_t c) const {
    return {values_.data() + c * static_cast<std::size_t>(D_), static_cast<std::size_t>(D_)};
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

 private:
  BandPlan plan_;
  int D_;
  int blank_;
  std::vector<double> values_;
};

inline PackedLattice pack(const Lattice& dense, const BandPlan& plan) {
  if (dense.frames() != plan.frames() || dense.tokens() != plan.tokens())
    throw ShapeMismatch("lattice is " + std::to_string(dense.frames()) + "x" +
                        std::to_string(dense.tokens() + 1) + " but band plan is " +
                        std::to_string(plan.frames()) + "x" + std::to_string(plan.tokens() + 1));
  const auto D = static_cast<std::size_t>(dense.vocab());
  std::vector<double> values(plan.cell_count() * D);
  for (int u = 0; u <= plan.tokens(); ++u)
    for (int t = plan.row_begin(u); t <= plan.row_end(u); ++t) {
      auto src = dense.cell(t, u);
      std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(plan.cell(t, u) * D));
    }
  return {plan, dense.vocab(), std::move(values), dense.blank()};
}

/// Dense view of a packed lattice; cells outside the band read as log 0.
inline Lattice unpack(const PackedLattice& packed) {
  const auto& plan = packed.plan();
  Lattice out(plan.frames(), plan.tokens(), packed.vocab(), packed.blank());
  for (double& v : out.values()) v = kLogZero;
  const auto D = static_cast<std::size_t>(packed.vocab());
  for (int u = 0; u <= plan.tokens(); ++u)
    for (int t = plan.row_begin(u); t <= plan.row_end(u); ++t) {
      auto src = packed.cell(plan.cell(t, u));
      std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(out.layout().cell(t, u) * D));
    }
  return out;
}

}  // namespace artl
