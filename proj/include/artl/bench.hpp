#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/transducer_loss.hpp"

namespace artl {

struct BenchConfig {
  int frames = 200;
  int tokens = 40;
  int vocab = 512;
  int left = 0;
  int right = 10;
  int iters = 5;
  std::uint64_t seed = 1;
  bool vacuous = false;  // ignore left/right and use the full lattice
};

struct BenchResult {
  std::size_t cells_dense = 0;   // T (U+1)
  std::size_t cells_packed = 0;  // V
  int vocab = 0;
  double dense_seconds = 0.0;    // mean per fused loss call
  double packed_seconds = 0.0;
  double dense_loss = 0.0;
  double packed_loss = 0.0;

  double cell_ratio() const { return static_cast<double>(cells_dense) / static_cast<double>(cells_packed); }
  double speedup() const { return dense_seconds / packed_seconds; }
};

/// Labels spread evenly over the utterance: a_u = floor(u (T-1) / (U+1)).
inline AlignLabels even_labels(int frames, int tokens) {
  AlignLabels a;
  for (int u = 1; u <= tokens; ++u)
    a.frames.push_back(static_cast<int>(static_cast<long long>(u) * (frames - 1) / (tokens + 1)));
  return a;
}

/// Fused restricted loss (log-softmax + forward-backward + logit gradient) on
/// dense masked storage versus packed storage of the same band.
inline BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.iters < 1) throw InvalidArgument("iters must be >= 1");
  const auto plan = cfg.vacuous ? BandPlan::vacuous(cfg.frames, cfg.tokens)
                                : BandPlan::make(even_labels(cfg.frames, cfg.tokens), cfg.frames, cfg.left, cfg.right);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> symbol(1, cfg.vocab - 1);
  Lattice logits(cfg.frames, cfg.tokens, cfg.vocab);
  for (double& v : logits.values()) v = normal(rng);
  Target target;
  for (int u = 0; u < cfg.tokens; ++u) target.tokens.push_back(symbol(rng));
  const PackedLattice packed_logits = pack(logits, plan);

  BenchResult r;
  r.cells_dense = logits.layout().cell_count();
  r.cells_packed = plan.cell_count();
  r.vocab = cfg.vocab;
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < cfg.iters; ++i) {
    Lattice dense = logits;
    auto t0 = clock::now();
    r.dense_loss = fused_loss(dense, target, &plan).loss;
    r.dense_seconds += std::chrono::duration<double>(clock::now() - t0).count();

    PackedLattice packed = packed_logits;
    t0 = clock::now();
    r.packed_loss = fused_loss(packed, target).loss;
    r.packed_seconds += std::chrono::duration<double>(clock::now() - t0).count();
  }
  r.dense_seconds /= cfg.iters;
  r.packed_seconds /= cfg.iters;
  return r;
}

}  // namespace artl
