#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/error.hpp"
#include "artl/lattice.hpp"
#include "artl/logmath.hpp"
#include "artl/transducer_loss.hpp"

namespace artl {

inline constexpr int kBruteForceMaxSteps = 20;

namespace detail {

inline void enumerate_paths(const Lattice& lat, const Target& target, const BandPlan* band, int t, int u,
                            double log_prob, double& total) {
  const int T = lat.frames();
  const int U = lat.tokens();
  // Emit the next target token at this frame.
  if (u < U) {
    const int tok = target.tokens[u];
    const bool allowed = !band || (t >= band->window_begin(u + 1) && t <= band->window_end(u + 1));
    if (allowed) enumerate_paths(lat, target, band, t, u + 1, log_prob + lat(tok, t, u), total);
  }
  // Or emit blank: advance a frame, or finish on the last frame once the target is complete.
  const double with_blank = log_prob + lat(lat.blank(), t, u);
  if (t + 1 < T)
    enumerate_paths(lat, target, band, t + 1, u, with_blank, total);
  else if (u == U)
    total = log_add(total, with_blank);
}

}  // namespace detail

/// Explicit sum over every monotone alignment path; exponential, guarded by T + U <= 20.
/// Returns +inf when no path satisfies the band.
inline double brute_force_loss(const Lattice& lattice, const Target& target, const BandPlan* band = nullptr) {
  if (lattice.frames() + lattice.tokens() > kBruteForceMaxSteps)
    throw SizeGuardExceeded("brute force enumeration limited to T + U <= 20");
  detail::check_target(lattice.tokens(), lattice.vocab(), lattice.blank(), target);
  if (band) detail::check_band(lattice, *band);
  double total = kLogZero;
  detail::enumerate_paths(lattice, target, band, 0, 0, 0.0, total);
  return -total;
}

/// Relative-error denominator floor; below it the comparison is effectively absolute.
inline constexpr double kGradCheckFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

/// Central finite differences of the loss with respect to every pre-softmax logit.
/// The lattice values are taken as the logits (a normalized lattice is its own
/// log-softmax). Returns the largest relative error against the fused analytic gradient.
inline double grad_check(const Lattice& lattice, const Target& target, const BandPlan* band, double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw InvalidArgument("grad_check eps must lie in [1e-6, 1e-3]");
  Lattice logits = lattice;
  const auto analytic = fused_loss(logits, target, band).grad;

  auto loss_at = [&](std::size_t index, double delta) {
    Lattice probe = lattice;
    probe.values()[index] += delta;
    return fused_loss(probe, target, band).loss;
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double numeric = (loss_at(i, eps) - loss_at(i, -eps)) / (2.0 * eps);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace artl
