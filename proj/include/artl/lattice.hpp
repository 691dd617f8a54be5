#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "artl/error.hpp"
#include "artl/logmath.hpp"

namespace artl {

/// Output symbol inventory of a transducer.
struct Vocab {
  int size = 0;
  int blank_id = 0;
  std::optional<int> eos_id;

  void validate() const {
    if (size <= 0) throw InvalidArgument("vocab size must be positive");
    if (blank_id < 0 || blank_id >= size) throw InvalidArgument("blank_id out of range");
    if (eos_id && (*eos_id < 0 || *eos_id >= size || *eos_id == blank_id))
      throw InvalidArgument("eos_id must be a non-blank symbol below the vocab size");
  }
};

/// Reference token sequence y*_1..y*_U (no blanks).
struct Target {
  std::vector<int> tokens;

  int size() const { return static_cast<int>(tokens.size()); }

  void validate(int vocab_size, int blank) const {
    for (int tok : tokens) {
      if (tok < 0 || tok >= vocab_size)
        throw DimensionMismatch("target token " + std::to_string(tok) + " outside vocab of size " +
                                std::to_string(vocab_size));
      if (tok == blank) throw DimensionMismatch("target contains the blank symbol");
    }
  }
};

/// Dense addressing of the T x (U+1) grid: cell = t * (U+1) + u.
class DenseLayout {
 public:
  DenseLayout(int frames, int tokens) : frames_(frames), tokens_(tokens) {}

  int frames() const { return frames_; }
  int tokens() const { return tokens_; }
  int row_begin(int /*u*/) const { return 0; }
  int row_end(int /*u*/) const { return frames_ - 1; }
  bool contains(int t, int u) const { return t >= 0 && t < frames_ && u >= 0 && u <= tokens_; }
  std::size_t cell(int t, int u) const {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(tokens_ + 1) +
           static_cast<std::size_t>(u);
  }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(frames_) * static_cast<std::size_t>(tokens_ + 1);
  }

 private:
  int frames_;
  int tokens_;
};

/// Joiner output in the log domain: logz(k, t, u) for t in [0,T), u in [0,U], k in [0,D),
/// stored row-major as [t][u][k].
class Lattice {
 public:
  Lattice() = default;

  Lattice(int frames, int tokens, int vocab, int blank = 0)
      : Lattice(frames, tokens, vocab,
                std::vector<double>(static_cast<std::size_t>(std::max(frames, 0)) *
                                        static_cast<std::size_t>(std::max(tokens + 1, 0)) *
                                        static_cast<std::size_t>(std::max(vocab, 0)),
                                    0.0),
                blank) {}

  Lattice(int frames, int tokens, int vocab, std::vector<double> logz, int blank = 0)
      : T_(frames), U_(tokens), D_(vocab), blank_(blank), logz_(std::move(logz)) {
    if (T_ <= 0 || U_ < 0 || D_ < 2) throw DimensionMismatch("lattice needs T >= 1, U >= 0, D >= 2");
    if (blank_ < 0 || blank_ >= D_) throw DimensionMismatch("blank outside vocab");
    if (logz_.size() != layout().cell_count() * static_cast<std::size_t>(D_))
      throw DimensionMismatch("lattice payload does not match T x (U+1) x D");
  }

  /// Builds a normalized lattice from unnormalized joiner logits (per-cell log-softmax).
  static Lattice from_logits(int frames, int tokens, int vocab, std::vector<double> logits,
                             int blank = 0) {
    Lattice lat(frames, tokens, vocab, std::move(logits), blank);
    for (std::size_t c = 0; c < lat.layout().cell_count(); ++c) log_softmax(lat.cell(c));
    return lat;
  }

  /// Every cell equal to log(1/D).
  static Lattice uniform(int frames, int tokens, int vocab, int blank = 0) {
    Lattice lat(frames, tokens, vocab, blank);
    for (double& v : lat.logz_) v = -std::log(static_cast<double>(vocab));
    return lat;
  }

  int frames() const { return T_; }
  int tokens() const { return U_; }
  int vocab() const { return D_; }
  int blank() const { return blank_; }
  DenseLayout layout() const { return {T_, U_}; }

  double operator()(int k, int t, int u) const { return logz_[offset(t, u) + k]; }
  double& operator()(int k, int t, int u) { return logz_[offset(t, u) + k]; }

  std::span<double> cell(std::size_t c) {
    return {logz_.data() + c * static_cast<std::size_t>(D_), static_cast<std::size_t>(D_)};
  }
  std::span<const double> cell(std::size_t c) const {
    return {logz_.data() + c * static_cast<std::size_t>(D_), static_cast<std::size_t>(D_)};
  }
  std::span<const double> cell(int t, int u) const { return cell(layout().cell(t, u)); }

  std::span<const double> values() const { return logz_; }
  std::span<double> values() { return logz_; }

  /// Throws unless every cell is a finite, normalized log distribution.
  void validate(double tol = 1e-6) const {
    for (std::size_t c = 0; c < layout().cell_count(); ++c) {
      auto z = cell(c);
      for (double v : z)
        if (!std::isfinite(v) || v > tol) throw InvalidArgument("lattice entry not a finite log-probability");
      if (std::abs(log_sum_exp(z)) > tol) throw InvalidArgument("lattice cell is not normalized");
    }
  }

 private:
  std::size_t offset(int t, int u) const { return layout().cell(t, u) * static_cast<std::size_t>(D_); }

  int T_ = 0;
  int U_ = 0;
  int D_ = 0;
  int blank_ = 0;
  std::vector<double> logz_;
};

}  // namespace artl
