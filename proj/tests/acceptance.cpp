// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "artl/bench.hpp"
#include "artl/decoder.hpp"
#include "artl/endpointing.hpp"
#include "artl/io/records.hpp"
#include "artl/toy/trainer.hpp"
#include "artl/transducer_loss.hpp"
#include "artl/verify.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace artl;
using namespace artl::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  std::function<Verdict()> check;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int draw(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;  // covers equal infinities
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

Verdict oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int T = draw(rng, 1, 5), U = draw(rng, 0, 3), D = draw(rng, 2, 4);
    auto lat = random_lattice(rng, T, U, D);
    auto y = random_target(rng, U, D);
    worst = std::max(worst, std::abs(loss_forward_backward(lat, y).loss_grad.loss - brute_force_loss(lat, y)));
    const auto band = BandPlan::make(random_labels(rng, U, T), T, draw(rng, 0, 2), draw(rng, 0, 2));
    worst = std::max(worst, std::abs(loss_forward_backward(lat, y, band).loss_grad.loss -
                                     brute_force_loss(lat, y, &band)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 10.0,
          fmt("500 lattices, unbanded + banded: max |DP - brute force| = %.2e (tol 1e-8), %.3f s (limit 10 s)", worst,
              secs)};
}

Verdict gradient_correctness() {
  std::mt19937_64 rng(202);
  double loss_worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int T = draw(rng, 1, 5), U = draw(rng, 0, 3), D = draw(rng, 2, 5);
    auto lat = random_lattice(rng, T, U, D);
    auto y = random_target(rng, U, D);
    if (trial % 2) {
      const auto band = BandPlan::make(random_labels(rng, U, T), T, draw(rng, 0, 2), draw(rng, 0, 2));
      loss_worst = std::max(loss_worst, grad_check(lat, y, &band, 1e-5));
    } else {
      loss_worst = std::max(loss_worst, grad_check(lat, y, nullptr, 1e-5));
    }
  }
  toy::SynthConfig sc;
  const auto utts = toy::synth_corpus(2, sc, 17);
  const auto model = toy::ToyModel::init(toy::ToyDims{}, 3);
  double model_worst = 0.0;
  for (const auto& u : utts) {
    model_worst = std::max(model_worst, toy::model_grad_check(model, u.features, u.target,
                                                              BandPlan::vacuous(u.frames(), u.target.size())));
    model_worst = std::max(model_worst, toy::model_grad_check(model, u.features, u.target,
                                                              BandPlan::make(u.ends, u.frames(), 0, 3)));
  }
  return {loss_worst <= 1e-4 && model_worst <= 1e-3,
          fmt("50 lattices: max rel err %.2e (tol 1e-4); toy model at init: %.2e (tol 1e-3)", loss_worst,
              model_worst)};
}

Verdict band_vacuity() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int T = draw(rng, 1, 12), U = draw(rng, 0, 5), D = draw(rng, 2, 5);
    auto lat = random_lattice(rng, T, U, D);
    auto y = random_target(rng, U, D);
    const auto band = BandPlan::make(random_labels(rng, U, T), T, T, T);
    const auto plain = loss_forward_backward(lat, y).loss_grad;
    const auto banded = loss_forward_backward(lat, y, band).loss_grad;
    worst = std::max({worst, std::abs(plain.loss - banded.loss), max_abs_diff(plain.grad, banded.grad)});
  }
  return {worst <= 1e-12, fmt("100 cases with b_l = b_r = T: max |loss or gradient difference| = %.2e (tol 1e-12)", worst)};
}

Verdict packed_equals_dense() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  int bound_violations = 0, occupancy_mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int T = draw(rng, 2, 30), U = draw(rng, 0, 6), D = draw(rng, 2, 5);
    const int bl = draw(rng, 0, 3), br = draw(rng, 0, 5);
    auto lat = random_lattice(rng, T, U, D);
    auto y = random_target(rng, U, D);
    const auto labels = random_labels(rng, U, T);
    const auto band = BandPlan::make(labels, T, bl, br);
    const auto dense = loss_forward_backward(lat, y, band).loss_grad;
    const auto packed = loss_forward_backward(pack(lat, band), y).loss_grad;
    worst = std::max(worst, std::abs(dense.loss - packed.loss));
    for (int u = 0; u <= U; ++u)
      for (int t = 0; t < T; ++t)
        for (int k = 0; k < D; ++k) {
          const double gd = dense.grad[lat.layout().cell(t, u) * D + k];
          const double gp = band.contains(t, u) ? packed.grad[band.cell(t, u) * D + k] : 0.0;
          worst = std::max(worst, std::abs(gd - gp));
        }
    if (band.cell_count() > static_cast<std::size_t>(T + U * (bl + br + 1) + (U + 1))) ++bound_violations;
    if (band.cell_count() != dense_occupancy(labels, T, bl, br)) ++occupancy_mismatches;
  }
  return {worst <= 1e-12 && bound_violations == 0 && occupancy_mismatches == 0,
          fmt("100 cases: max |packed - dense| = %.2e (tol 1e-12); V bound violations %d; V != occupied cells %d",
              worst, bound_violations, occupancy_mismatches)};
}

WordSpan word(int s, int e, int pieces) {
  WordSpan w{"w", s, e, {}, false};
  for (int i = 0; i < pieces; ++i) w.pieces.push_back(i + 1);
  return w;
}

Verdict alignment_strategies() {
  int failures = 0;
  auto expect = [&](const AlignLabels& got, std::vector<int> want) { failures += got.frames != want; };
  expect(align_as1({{word(8, 14, 3)}}), {14, 14, 14});
  expect(align_as1({{word(0, 0, 1)}}), {0});
  expect(align_as1({{word(0, 4, 2), WordSpan{"SIL", 5, 7, {}, true}, word(8, 9, 1)}}), {4, 4, 9});
  expect(align_as2({{word(8, 14, 3)}}), {10, 12, 14});
  expect(align_as2({{word(5, 5, 2)}}), {5, 5});
  expect(align_as2({{word(0, 10, 4)}}), {3, 5, 8, 10});

  // The same fixtures read back from JSONL.
  const auto records = io::read_utterances(std::string(ARTL_TEST_DATA) + "/words.jsonl");
  if (records.size() != 3) return {false, "words.jsonl fixture missing records"};
  expect(align_as1(records[0].words), {14, 14, 14});
  expect(align_as1(records[1].words), {4, 4, 9});
  expect(align_as2(records[0].words), {10, 12, 14});
  expect(align_as2(records[2].words), {3, 5, 8, 10});

  std::mt19937_64 rng(505);
  int sil_changes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    WordAlignment plain, padded;
    int t = 0;
    for (int j = 0; j < 4; ++j) {
      const int len = draw(rng, 0, 5), gap = draw(rng, 1, 3);
      const auto w = word(t, t + len, draw(rng, 1, 4));
      plain.words.push_back(w);
      padded.words.push_back(w);
      padded.words.push_back(WordSpan{"SIL", t + len, t + len + gap, {}, true});
      t += len + gap;
    }
    sil_changes += align_as1(plain) != align_as1(padded);
    sil_changes += align_as2(plain) != align_as2(padded);
  }
  return {failures == 0 && sil_changes == 0,
          fmt("10 AS1/AS2 fixtures (6 direct, 4 via JSONL): %d mismatches; SIL insertion changed labels in %d of 200",
              failures, sil_changes)};
}

Verdict tradeoff_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  toy::SynthConfig sc;
  const auto train_set = toy::synth_corpus(600, sc, 1);
  const auto heldout = toy::synth_corpus(200, sc, 2);
  toy::TrainConfig base;
  base.steps = 4000;
  const std::vector<std::optional<int>> rights{0, 5, std::nullopt};
  const auto rows = toy::sweep_br(rights, base, train_set, heldout, toy::ToyDims{},
                                  {.beam = 4, .max_symbols_per_frame = 2}, sc.frame_seconds);
  bool ed_ok = true, ter_ok = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ed_ok = ed_ok && rows[i].avg_ed >= rows[i - 1].avg_ed;
    ter_ok = ter_ok && rows[i].token_error <= rows[i - 1].token_error;
  }
  const bool near_gt = std::abs(rows[0].avg_ed) <= sc.frame_seconds;
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "800 utterances; b_r 0/5/vacuous: TER " << fmt("%.4f/%.4f/%.4f", rows[0].token_error, rows[1].token_error,
                                                      rows[2].token_error)
     << ", Avg ED " << fmt("%.3f/%.3f/%.3f s", rows[0].avg_ed, rows[1].avg_ed, rows[2].avg_ed) << " (frame "
     << fmt("%.3f s", sc.frame_seconds) << "), " << fmt("%.1f s", secs) << " (limit 1800 s)";
  return {ed_ok && ter_ok && near_gt && secs < 1800.0, os.str()};
}

bool close(std::optional<double> a, double b) { return a && std::abs(*a - b) <= 1e-9; }

Verdict endpointing() {
  const auto records = io::read_endpoint_records(std::string(ARTL_TEST_DATA) + "/endpoint_static.jsonl");
  std::vector<EndpointOutcome> outcomes;
  for (const auto& r : records) outcomes.push_back(run_static(with_trailing_silence(r.timing(), 2.0), 1.0));
  const auto rep = aggregate(outcomes);
  const bool fixture = records.size() == 5 && close(rep.l_avg, 0.725) && close(rep.l_p90, 0.9) &&
                       rep.early_cut_pct == 20.0 && rep.noep_pct == 0.0;

  // Static grid: later thresholds never decide earlier and never cut more.
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<UtteranceTiming> corpus;
  for (int i = 0; i < 40; ++i) {
    UtteranceTiming u;
    u.speech_end = 1.0 + 3.0 * unit(rng);
    u.emissions = {u.speech_end - 0.5 * unit(rng), u.speech_end - 0.2 + 0.6 * unit(rng)};
    u.audio_seconds = u.speech_end + 1.0 + unit(rng);
    u.frame_seconds = 0.06;
    corpus.push_back(u);
  }
  int violations = 0;
  std::vector<EndpointOutcome> prev;
  double prev_early = 101.0;
  for (int g = 0; g < 10; ++g) {
    std::vector<EndpointOutcome> cur;
    for (const auto& u : corpus) cur.push_back(run_static(u, 0.1 + 0.2 * g));
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (prev[i].decision_time && cur[i].decision_time && *cur[i].decision_time < *prev[i].decision_time) ++violations;
    const double early = aggregate(cur).early_cut_pct;
    violations += early > prev_early;
    prev_early = early;
    prev = cur;
  }
  // Dwell grid over alpha and dwell time, with and without the static fallback.
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> p(60);
    for (double& v : p) v = unit(rng);
    UtteranceTiming u;
    u.emissions = {1.0 + unit(rng)};
    u.audio_seconds = 3.6;
    u.speech_end = 1.5;
    u.frame_seconds = 0.06;
    std::optional<double> fb;
    if (trial % 2) fb = 1.0;
    double last_alpha = -1.0, last_dwell = -1.0;
    for (int g = 0; g < 10; ++g) {
      const double a = run_dwell(p, 0.1 * g, 120.0, u, fb).decision_time.value_or(1e9);
      const double d = run_dwell(p, 0.5, 60.0 * g, u, fb).decision_time.value_or(1e9);
      violations += a < last_alpha;
      violations += d < last_dwell;
      last_alpha = a;
      last_dwell = d;
    }
  }
  std::ostringstream os;
  os << "fixture L_avg " << (rep.l_avg ? fmt("%.3f", *rep.l_avg) : "-") << " L_p90 "
     << (rep.l_p90 ? fmt("%.3f", *rep.l_p90) : "-") << fmt(" EarlyCut %.1f%% NoEP %.1f%%", rep.early_cut_pct, rep.noep_pct)
     << " (want 0.725/0.900/20.0%/0.0%); monotonicity violations on 10-point grids: " << violations;
  return {fixture && violations == 0, os.str()};
}

Verdict throughput() {
  BenchConfig cfg;
  cfg.frames = 200;
  cfg.tokens = 40;
  cfg.vocab = 512;
  cfg.left = 0;
  cfg.right = 10;
  cfg.iters = 5;
  const auto r = run_bench(cfg);
  const bool same = std::abs(r.dense_loss - r.packed_loss) <= 1e-9 * std::abs(r.dense_loss);
  return {r.cell_ratio() >= 4.0 && r.speedup() >= 2.0 && same,
          fmt("T=200 U=40 D=512 b_l=0 b_r=10: cells %zu -> %zu (ratio %.2f, need >= 4); dense %.3f s vs packed %.3f s "
              "(speedup %.2f, need >= 2)",
              r.cells_dense, r.cells_packed, r.cell_ratio(), r.dense_seconds, r.packed_seconds, r.speedup())};
}

Verdict decoder_oracle() {
  std::mt19937_64 rng(909);
  int mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int T = draw(rng, 1, 6);
    const int U = draw(rng, 0, std::min(3, 8 - T));
    auto lat = random_lattice(rng, T, U, 3, 1.5);
    const int cap = std::max(U, 1);
    auto [tokens, oracle] = exhaustive_best(lat, cap);
    const auto r = beam_decode(lat, {.beam = 1000, .max_symbols_per_frame = cap});
    worst = std::max(worst, std::abs(r.best.log_prob - oracle.total));
    if (r.best.tokens != tokens || r.best.frames != oracle.frames) ++mismatches;
  }
  return {mismatches == 0 && worst <= 1e-9,
          fmt("200 lattices with T+U <= 8: %d hypothesis/frame mismatches; max score difference %.2e", mismatches, worst)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", "oracle equivalence", oracle_equivalence},
      {"AC2", "gradient correctness", gradient_correctness},
      {"AC3", "band vacuity", band_vacuity},
      {"AC4", "packed equals dense", packed_equals_dense},
      {"AC5", "alignment strategies", alignment_strategies},
      {"AC6", "trade-off trend", tradeoff_trend},
      {"AC7", "end-pointing", endpointing},
      {"AC8", "throughput proxy", throughput},
      {"AC9", "decoder oracle", decoder_oracle},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("[%s] %s %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.title, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
