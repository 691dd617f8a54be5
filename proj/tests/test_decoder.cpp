#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "artl/decoder.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace artl;
using artl::testing::exhaustive_best;
using artl::testing::random_lattice;

TEST(Decoder, NearDeterministicLattice) {
  const double tiny = std::log(1e-9);
  Lattice lat(5, 1, 3);
  for (int t = 0; t < 5; ++t)
    for (int u = 0; u <= 1; ++u) {
      lat(0, t, u) = std::log1p(-2e-9);
      lat(1, t, u) = tiny;
      lat(2, t, u) = tiny;
    }
  lat(0, 2, 0) = tiny;
  lat(1, 2, 0) = std::log1p(-2e-9);
  auto r = beam_decode(lat, {.beam = 4, .max_symbols_per_frame = 1});
  EXPECT_EQ(r.best.tokens, (std::vector<int>{1}));
  EXPECT_EQ(r.best.frames, (std::vector<int>{2}));
}

TEST(Decoder, SaturatedBeamEqualsExhaustive) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 1 + static_cast<int>(rng() % 4);
    const int U = static_cast<int>(rng() % 3);
    auto lat = random_lattice(rng, T, U, 3, 1.5);
    auto [tokens, oracle] = exhaustive_best(lat, std::max(U, 1));
    auto r = beam_decode(lat, {.beam = 1000, .max_symbols_per_frame = std::max(U, 1)});
    EXPECT_EQ(r.best.tokens, tokens);
    EXPECT_NEAR(r.best.log_prob, oracle.total, 1e-9);
    EXPECT_EQ(r.best.frames, oracle.frames);
    EXPECT_NEAR(r.best.path_log_prob, oracle.best_path, 1e-9);
  }
}

TEST(Decoder, GreedyIsBoundedByExhaustive) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto lat = random_lattice(rng, 3, 2, 3, 1.5);
    auto greedy = beam_decode(lat, {.beam = 1, .max_symbols_per_frame = 2});
    auto [tokens, oracle] = exhaustive_best(lat, 2);
    EXPECT_LE(greedy.best.log_prob, oracle.total + 1e-12);
  }
}

// Strict monotonicity in the beam width does not hold for pruned search (a wider
// beam can admit competitors that evict the eventual winner); every width is
// bounded by the saturated beam, which is exact.
TEST(Decoder, EveryBeamBoundedBySaturatedBeam) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    auto lat = random_lattice(rng, 3 + static_cast<int>(rng() % 3), 2, 3, 1.0);
    const double exact = beam_decode(lat, {.beam = 100000, .max_symbols_per_frame = 2}).best.log_prob;
    for (int beam : {1, 2, 3, 4, 8, 16}) {
      auto r = beam_decode(lat, {.beam = beam, .max_symbols_per_frame = 2});
      EXPECT_LE(r.best.log_prob, exact + 1e-12) << "trial " << trial << " beam " << beam;
    }
  }
}

TEST(Decoder, StreamingMatchesOneShot) {
  std::mt19937_64 rng(15);
  auto lat = random_lattice(rng, 8, 3, 4);
  LatticeScorer scorer(lat);
  StreamingDecoder<LatticeScorer> dec(scorer, {.beam = 3, .max_symbols_per_frame = 2});
  std::vector<std::vector<int>> seen;
  for (int t = 0; t < lat.frames(); ++t) {
    dec.advance();
    seen.push_back(dec.partial().tokens);
  }
  auto streamed = dec.finish();
  auto oneshot = beam_decode(lat, {.beam = 3, .max_symbols_per_frame = 2});
  EXPECT_EQ(streamed.best.tokens, oneshot.best.tokens);
  EXPECT_EQ(streamed.best.frames, oneshot.best.frames);
  EXPECT_EQ(streamed.best.log_prob, oneshot.best.log_prob);
  ASSERT_EQ(oneshot.partials.size(), seen.size());
  for (std::size_t f = 0; f < seen.size(); ++f) EXPECT_EQ(oneshot.partials[f].tokens, seen[f]);
}

TEST(Decoder, EmptyInputAndBadBeam) {
  auto lat = Lattice::uniform(2, 1, 3);
  LatticeScorer scorer(lat);
  EXPECT_THROW(beam_decode(scorer, 0), EmptyInput);
  EXPECT_THROW(StreamingDecoder<LatticeScorer>(scorer, {.beam = 0}), InvalidArgument);
  StreamingDecoder<LatticeScorer> dec(scorer, {});
  EXPECT_THROW(dec.finish(), EmptyInput);
}

TEST(Delays, HandArithmetic) {
  Hypothesis best{{3, 4}, -1.0, {5, 9}, -1.0};
  std::vector<Hypothesis> partials(10);
  for (int f = 5; f < 10; ++f) partials[f].tokens = {3};
  partials[9].tokens = {3, 4};
  auto tl = measure_delays(best, partials, std::vector<int>{3, 4}, AlignLabels{{4, 8}}, 0.06);
  EXPECT_NEAR(tl.avg_ed_seconds(), 0.06, 1e-12);
  EXPECT_EQ(tl.tokens[0].final_frame, 5);
  EXPECT_EQ(tl.tokens[1].final_frame, 9);
  EXPECT_NEAR(tl.avg_fd_seconds(), 0.06, 1e-12);
  EXPECT_EQ(tl.excluded, 0);
}

TEST(Delays, ZeroWhenOnTime) {
  Hypothesis best{{1, 2, 1}, -1.0, {2, 3, 7}, -1.0};
  std::vector<Hypothesis> partials(8);
  auto tl = measure_delays(best, partials, std::vector<int>{1, 2, 1}, AlignLabels{{2, 3, 7}}, 0.06);
  EXPECT_EQ(tl.avg_ed_seconds(), 0.0);
}

TEST(Delays, FirstAppearanceEvenIfLaterDropped) {
  Hypothesis best{{2}, -1.0, {6}, -1.0};
  std::vector<Hypothesis> partials(8);
  partials[3].tokens = {2};  // enters, leaves, re-enters
  partials[6].tokens = {2};
  partials[7].tokens = {2};
  auto tl = measure_delays(best, partials, std::vector<int>{2}, AlignLabels{{5}}, 0.1);
  EXPECT_EQ(tl.tokens[0].final_frame, 3);
  EXPECT_NEAR(tl.avg_fd_seconds(), -0.2, 1e-12);
}

TEST(Delays, MismatchIsExcluded) {
  Hypothesis best{{1, 3}, -1.0, {1, 2}, -1.0};
  auto tl = measure_delays(best, {}, std::vector<int>{1, 2}, AlignLabels{{1, 2}}, 0.1);
  EXPECT_TRUE(tl.tokens.empty());
  EXPECT_EQ(tl.excluded, 2);
  DelayStats stats;
  stats.add(tl);
  EXPECT_EQ(stats.count, 0);
  EXPECT_EQ(stats.excluded, 2);
}
