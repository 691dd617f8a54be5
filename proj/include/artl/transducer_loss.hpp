#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/error.hpp"
#include "artl/lattice.hpp"
#include "artl/logmath.hpp"
#include "artl/parallel.hpp"

namespace artl {

/// Addressing of the DP grid: per-row materialized frame span and a flat cell index.
template <class L>
concept CellLayout = requires(const L& l, int t, int u) {
  { l.frames() } -> std::convertible_to<int>;
  { l.tokens() } -> std::convertible_to<int>;
  { l.row_begin(u) } -> std::convertible_to<int>;
  { l.row_end(u) } -> std::convertible_to<int>;
  { l.cell(t, u) } -> std::convertible_to<std::size_t>;
  { l.cell_count() } -> std::convertible_to<std::size_t>;
};

/// Scalar loss and dL/dlogz in the layout of the input lattice.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Log-domain forward/backward tables, one entry per cell of the layout.
/// beta(t, u) includes the outgoing transition at (t, u).
struct AlphaBeta {
  std::vector<double> alpha;
  std::vector<double> beta;
};

struct ForwardBackward {
  LossGrad loss_grad;
  AlphaBeta tables;
};

namespace detail {

struct Unrestricted {
  bool emit_allowed(int, int) const { return true; }
};

template <CellLayout Layout>
bool row_has(const Layout& l, int t, int u) {
  return t >= l.row_begin(u) && t <= l.row_end(u);
}

/// Forward-backward over the transducer grid with optional emission masking.
/// Cells outside a row's span are treated as unreachable (log 0).
template <CellLayout Layout, class Window>
ForwardBackward forward_backward(const Layout& layout, std::span<const double> logz, int D, int blank,
                                 std::span<const int> y, const Window& window) {
  const int T = layout.frames();
  const int U = layout.tokens();
  const auto stride = static_cast<std::size_t>(D);
  const std::size_t cells = layout.cell_count();
  auto z = [&](std::size_t c, int k) { return logz[c * stride + static_cast<std::size_t>(k)]; };

  ForwardBackward out;
  auto& alpha = out.tables.alpha;
  auto& beta = out.tables.beta;
  alpha.assign(cells, kLogZero);
  beta.assign(cells, kLogZero);

  for (int u = 0; u <= U; ++u) {
    for (int t = layout.row_begin(u); t <= layout.row_end(u); ++t) {
      double a = (t == 0 && u == 0) ? 0.0 : kLogZero;
      if (t - 1 >= layout.row_begin(u)) {
        const std::size_t prev = layout.cell(t - 1, u);
        a = alpha[prev] + z(prev, blank);
      }
      if (u > 0 && row_has(layout, t, u - 1) && window.emit_allowed(u - 1, t)) {
        const std::size_t below = layout.cell(t, u - 1);
        a = log_add(a, alpha[below] + z(below, y[u - 1]));
      }
      alpha[layout.cell(t, u)] = a;
    }
  }

  for (int u = U; u >= 0; --u) {
    for (int t = layout.row_end(u); t >= layout.row_begin(u); --t) {
      const std::size_t c = layout.cell(t, u);
      double b = kLogZero;
      if (t == T - 1 && u == U) {
        b = z(c, blank);
      } else if (t + 1 <= layout.row_end(u)) {
        b = beta[layout.cell(t + 1, u)] + z(c, blank);
      }
      if (u < U && row_has(layout, t, u + 1) && window.emit_allowed(u, t))
        b = log_add(b, beta[layout.cell(t, u + 1)] + z(c, y[u]));
      beta[c] = b;
    }
  }

  const std::size_t last = layout.cell(T - 1, U);
  const double log_prob = layout.row_end(U) == T - 1 ? alpha[last] + z(last, blank) : kLogZero;
  if (!std::isfinite(log_prob))
    throw BandInfeasible("no alignment of the target fits the lattice restrictions");

  auto& loss = out.loss_grad;
  loss.loss = -log_prob;
  loss.grad.assign(cells * stride, 0.0);
  for (int u = 0; u <= U; ++u) {
    for (int t = layout.row_begin(u); t <= layout.row_end(u); ++t) {
      const std::size_t c = layout.cell(t, u);
      if (alpha[c] == kLogZero) continue;
      double next_blank = kLogZero;
      if (t == T - 1 && u == U)
        next_blank = 0.0;
      else if (t + 1 <= layout.row_end(u))
        next_blank = beta[layout.cell(t + 1, u)];
      if (next_blank != kLogZero)
        loss.grad[c * stride + blank] = -std::exp(alpha[c] + z(c, blank) + next_blank - log_prob);
      if (u < U && row_has(layout, t, u + 1) && window.emit_allowed(u, t)) {
        const double next_emit = beta[layout.cell(t, u + 1)];
        if (next_emit != kLogZero)
          loss.grad[c * stride + static_cast<std::size_t>(y[u])] =
              -std::exp(alpha[c] + z(c, y[u]) + next_emit - log_prob);
      }
    }
  }
  return out;
}

inline void check_target(int tokens, int vocab, int blank, const Target& target) {
  if (target.size() != tokens)
    throw DimensionMismatch("lattice has " + std::to_string(tokens + 1) + " rows but target has " +
                            std::to_string(target.size()) + " tokens");
  target.validate(vocab, blank);
}

inline void check_band(const Lattice& lattice, const BandPlan& band) {
  if (band.frames() != lattice.frames() || band.tokens() != lattice.tokens())
    throw DimensionMismatch("band plan geometry does not match the lattice");
}

}  // namespace detail

/// Standard transducer loss -log Pr(y*|x) summed over every alignment.
inline ForwardBackward loss_forward_backward(const Lattice& lattice, const Target& target) {
  detail::check_target(lattice.tokens(), lattice.vocab(), lattice.blank(), target);
  return detail::forward_backward(lattice.layout(), lattice.values(), lattice.vocab(), lattice.blank(),
                                  target.tokens, detail::Unrestricted{});
}

/// Alignment-restricted loss on dense storage: non-blank emissions outside the
/// band are masked to log 0, blank transitions are untouched.
inline ForwardBackward loss_forward_backward(const Lattice& lattice, const Target& target,
                                             const BandPlan& band) {
  detail::check_target(lattice.tokens(), lattice.vocab(), lattice.blank(), target);
  detail::check_band(lattice, band);
  return detail::forward_backward(lattice.layout(), lattice.values(), lattice.vocab(), lattice.blank(),
                                  target.tokens, band);
}

inline ForwardBackward loss_forward_backward(const Lattice& lattice, const Target& target,
                                             const BandPlan* band) {
  return band ? loss_forward_backward(lattice, target, *band) : loss_forward_backward(lattice, target);
}

/// Alignment-restricted loss on packed storage. Tables and gradient are packed too.
inline ForwardBackward loss_forward_backward(const PackedLattice& lattice, const Target& target) {
  detail::check_target(lattice.tokens(), lattice.vocab(), lattice.blank(), target);
  return detail::forward_backward(lattice.plan(), lattice.values(), lattice.vocab(), lattice.blank(),
                                  target.tokens, lattice.plan());
}

/// Chains dL/dlogz through the per-cell log-softmax: dL/dx_j = g_j - p_j * sum_k g_k.
inline std::vector<double> logit_gradient(std::span<const double> logz, std::span<const double> grad_logz,
                                          int vocab) {
  if (logz.size() != grad_logz.size()) throw DimensionMismatch("gradient and lattice sizes differ");
  const auto D = static_cast<std::size_t>(vocab);
  std::vector<double> out(logz.size(), 0.0);
  for (std::size_t c = 0; c + D <= logz.size(); c += D) {
    double total = 0.0;
    for (std::size_t k = 0; k < D; ++k) total += grad_logz[c + k];
    for (std::size_t k = 0; k < D; ++k) out[c + k] = grad_logz[c + k] - std::exp(logz[c + k]) * total;
  }
  return out;
}

/// Loss with softmax fused in: `logits` holds unnormalized joiner outputs and is
/// normalized in place; the returned gradient is with respect to those logits.
inline LossGrad fused_loss(Lattice& logits, const Target& target, const BandPlan* band = nullptr) {
  for (std::size_t c = 0; c < logits.layout().cell_count(); ++c) log_softmax(logits.cell(c));
  auto fb = loss_forward_backward(logits, target, band);
  fb.loss_grad.grad = logit_gradient(logits.values(), fb.loss_grad.grad, logits.vocab());
  return std::move(fb.loss_grad);
}

inline LossGrad fused_loss(PackedLattice& logits, const Target& target) {
  for (std::size_t c = 0; c < logits.plan().cell_count(); ++c) log_softmax(logits.cell(c));
  auto fb = loss_forward_backward(logits, target);
  fb.loss_grad.grad = logit_gradient(logits.values(), fb.loss_grad.grad, logits.vocab());
  return std::move(fb.loss_grad);
}

struct BatchLoss {
  double mean_loss = 0.0;
  std::vector<LossGrad> items;
};

/// Per-utterance losses (un-normalized sums) reduced by their arithmetic mean.
inline BatchLoss batch_loss(std::span<const Lattice> lattices, std::span<const Target> targets,
                            std::span<const BandPlan* const> bands = {}) {
  if (lattices.size() != targets.size() || (!bands.empty() && bands.size() != lattices.size()))
    throw DimensionMismatch("batch components differ in length");
  if (lattices.empty()) throw EmptyInput("empty batch");
  BatchLoss out;
  out.items.resize(lattices.size());
  parallel_for(lattices.size(), [&](std::size_t i) {
    out.items[i] =
        loss_forward_backward(lattices[i], targets[i], bands.empty() ? nullptr : bands[i]).loss_grad;
  });
  for (const auto& item : out.items) out.mean_loss += item.loss;
  out.mean_loss /= static_cast<double>(out.items.size());
  return out;
}

}  // namespace artl
