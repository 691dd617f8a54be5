// artl: command-line front end for the restricted transducer loss, alignment
// labels, decoding, end-pointing and the toy trade-off sweep.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "artl/bench.hpp"
#include "artl/decoder.hpp"
#include "artl/endpointing.hpp"
#include "artl/io/checkpoint.hpp"
#include "artl/io/config.hpp"
#include "artl/io/records.hpp"
#include "artl/io/report.hpp"
#include "artl/io/tensor.hpp"
#include "artl/toy/trainer.hpp"
#include "artl/transducer_loss.hpp"

namespace {

using namespace artl;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;

/// Output stream that is stdout unless a path is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw FormatError("cannot write " + path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

/// A JSON integer array given inline ("[1,2]") or as a file holding one.
std::vector<int> int_list(const std::string& arg, const char* what) {
  std::string text = arg;
  if (io::trim(arg).rfind('[', 0) != 0) {
    std::ifstream in(arg);
    if (!in) throw FormatError(std::string("cannot open ") + what + " " + arg);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    auto j = json::parse(text);
    if (j.is_object() && j.contains("tokens")) j = j["tokens"];
    return j.get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": expected a JSON integer array (" + e.what() + ")");
  }
}

// ---- loss ----

struct LossArgs {
  std::string lattice, target, align, grad;
  int left = 0, right = 0, blank = 0;
  bool logits = false;
};

int run_loss(const LossArgs& a) {
  auto lattice = io::tensor_lattice(io::read_tensor(a.lattice), a.blank);
  const Target target{int_list(a.target, "target")};
  std::optional<BandPlan> band;
  if (!a.align.empty()) {
    const AlignLabels labels{int_list(a.align, "alignment")};
    if (labels.size() != target.size())
      throw DimensionMismatch("alignment has " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(target.size()) + " tokens");
    band = BandPlan::make(labels, lattice.frames(), a.left, a.right);
  }
  LossGrad lg;
  if (a.logits) {
    lg = fused_loss(lattice, target, band ? &*band : nullptr);
  } else {
    lattice.validate();
    lg = loss_forward_backward(lattice, target, band ? &*band : nullptr).loss_grad;
  }
  std::cout << io::fixed(lg.loss, 6) << '\n';
  if (!a.grad.empty()) {
    auto t = io::lattice_tensor(lattice);
    t.data = lg.grad;
    io::write_tensor(a.grad, t);
  }
  return 0;
}

// ---- align ----

struct AlignArgs {
  std::string in, out, strategy = "as1";
  int subsample = 4;
  std::optional<int> eos_id;
};

int run_align(const AlignArgs& a) {
  if (a.strategy != "as1" && a.strategy != "as2") throw InvalidArgument("strategy must be as1 or as2");
  auto records = io::read_utterances(a.in);
  Output out(a.out);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    try {
      const auto acoustic = a.strategy == "as1" ? align_as1(r.words) : align_as2(r.words);
      const int frames = r.frames ? encoder_frames(*r.frames, a.subsample) : 0;
      auto labels = subsample_labels(acoustic, a.subsample, frames);
      auto tokens = r.tokens;
      if (a.eos_id) {
        if (!r.frames) throw FormatError("an EOS label needs 'frames'");
        labels = append_eos_label(labels, frames);
        tokens.push_back(*a.eos_id);
      }
      json j{{"id", r.id}, {"tokens", tokens}, {"labels", labels.frames}};
      if (r.frames) j["encoder_frames"] = frames;
      out.get() << j.dump() << '\n';
    } catch (const Error& e) {
      throw FormatError(a.in + ":" + std::to_string(r.line) + ": record '" + r.id + "': " + e.what());
    }
  }
  return 0;
}

// ---- decode ----

struct DecodeArgs {
  std::string lattice, reference, out;
  int beam = 4, max_symbols = 3, blank = 0;
  double frame_seconds = 0.04;
};

int run_decode(const DecodeArgs& a) {
  const auto lattice = io::tensor_lattice(io::read_tensor(a.lattice), a.blank);
  lattice.validate();
  const auto result = beam_decode(lattice, {.beam = a.beam, .max_symbols_per_frame = a.max_symbols});
  json j{{"tokens", result.best.tokens},
         {"emit_frames", result.best.frames},
         {"log_prob", result.best.log_prob},
         {"path_log_prob", result.best.path_log_prob}};
  json partials = json::array();
  for (const auto& p : result.partials) partials.push_back(p.tokens);
  j["partials"] = partials;
  if (!a.reference.empty()) {
    auto in = io::open_input(a.reference);
    json ref = json::parse(in);
    const auto tokens = io::detail::get_frames(ref, "tokens");
    const AlignLabels ends{io::detail::get_frames(ref, "ends")};
    const auto tl = measure_delays(result.best, result.partials, tokens, ends, a.frame_seconds);
    json timeline = json::array();
    for (std::size_t i = 0; i < tl.tokens.size(); ++i) {
      const auto& t = tl.tokens[i];
      timeline.push_back({{"token", t.token},
                          {"gt_frame", t.gt_frame},
                          {"emit_frame", t.emit_frame},
                          {"final_frame", t.final_frame},
                          {"ed_s", io::rounded(tl.emission_delay(i))},
                          {"fd_s", io::rounded(tl.finalization_delay(i))}});
    }
    j["timeline"] = timeline;
    j["excluded"] = tl.excluded;
    j["matched"] = tl.excluded == 0;
  }
  Output out(a.out);
  out.get() << j.dump() << '\n';
  return 0;
}

// ---- endpoint ----

struct EndpointArgs {
  std::string in, out, report, policy = "static";
  double t_static = 1.0, alpha = 0.5, dwell_ms = 200.0, append_silence = 0.0;
  std::optional<double> fallback;
};

int run_endpoint(const EndpointArgs& a) {
  EndpointConfig cfg;
  cfg.policy = parse_policy(a.policy);
  cfg.t_static = a.t_static;
  cfg.alpha_eoq = cfg.alpha_e2e = a.alpha;
  cfg.t_eoq_ms = cfg.t_e2e_ms = a.dwell_ms;
  cfg.fallback_static = a.fallback;
  cfg.validate();
  if (a.append_silence < 0.0) throw InvalidArgument("append-silence must be >= 0");
  const auto records = io::read_endpoint_records(a.in);
  if (records.empty()) throw EmptyCorpus(a.in + ": no records");
  std::vector<EndpointOutcome> outcomes;
  std::unique_ptr<Output> out;
  if (!a.out.empty()) out = std::make_unique<Output>(a.out);
  for (const auto& r : records) {
    const auto utt = with_trailing_silence(r.timing(), a.append_silence);
    if (cfg.policy == EndpointPolicy::Neural && utt.eoq.empty())
      throw FormatError(a.in + ":" + std::to_string(r.line) + ": record '" + r.id + "' has no eoq stream");
    if (cfg.policy == EndpointPolicy::EndToEnd && utt.eos.empty())
      throw FormatError(a.in + ":" + std::to_string(r.line) + ": record '" + r.id + "' has no eos stream");
    const auto o = run_endpointer(cfg, utt);
    outcomes.push_back(o);
    if (out) {
      json j{{"id", r.id},
             {"decision_s", o.decision_time ? json(io::rounded(*o.decision_time)) : json(nullptr)},
             {"latency_s", o.no_endpoint ? json(nullptr) : json(io::rounded(o.latency))},
             {"early_cut", o.early_cut},
             {"no_endpoint", o.no_endpoint},
             {"truncated_tokens", o.truncated_tokens}};
      out->get() << j.dump() << '\n';
    }
  }
  Output report(a.report);
  io::write_endpoint_csv(report.get(), aggregate(outcomes));
  return 0;
}

// ---- toy training ----

struct ToyArgs {
  int steps = 4000, batch = 8, n_train = 600, n_heldout = 200, beam = 4, max_symbols = 2, max_cue_lag = 7;
  int left = 0, right = 0;
  double lr = 0.003;
  std::uint64_t seed = 1;
  std::string optimizer = "adam", loss = "standard";
};

toy::TrainConfig train_config(const ToyArgs& a) {
  toy::TrainConfig cfg;
  cfg.steps = a.steps;
  cfg.batch = a.batch;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  cfg.left = a.left;
  cfg.right = a.right;
  if (a.optimizer == "adam")
    cfg.optimizer = toy::Optimizer::Adam;
  else if (a.optimizer == "sgd")
    cfg.optimizer = toy::Optimizer::Sgd;
  else
    throw InvalidArgument("optimizer must be adam or sgd");
  if (a.loss == "standard")
    cfg.loss = toy::LossKind::Standard;
  else if (a.loss == "ar")
    cfg.loss = toy::LossKind::Restricted;
  else
    throw InvalidArgument("loss must be standard or ar");
  return cfg;
}

toy::SynthConfig synth_config(const ToyArgs& a) {
  toy::SynthConfig sc;
  sc.max_cue_lag = a.max_cue_lag;
  return sc;
}

// Held-out utterances use a seed disjoint from the training corpus.
std::uint64_t heldout_seed(std::uint64_t seed) { return seed + 1; }

struct SweepArgs {
  ToyArgs toy;
  std::vector<std::string> rights{"0", "5", "inf"};
  std::string out;
};

int run_sweep(const SweepArgs& a) {
  std::vector<std::optional<int>> rights;
  for (const auto& s : a.rights) {
    if (s == "inf" || s == "vacuous") {
      rights.push_back(std::nullopt);
      continue;
    }
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
    }
    if (used != s.size() || v < 0) throw InvalidArgument("--br: '" + s + "' is not a frame count or 'inf'");
    rights.push_back(v);
  }
  const auto sc = synth_config(a.toy);
  const auto train_set = toy::synth_corpus(a.toy.n_train, sc, a.toy.seed);
  const auto heldout = toy::synth_corpus(a.toy.n_heldout, sc, heldout_seed(a.toy.seed));
  auto base = train_config(a.toy);
  base.loss = toy::LossKind::Restricted;
  const auto rows = toy::sweep_br(rights, base, train_set, heldout, toy::ToyDims{},
                                  {.beam = a.toy.beam, .max_symbols_per_frame = a.toy.max_symbols}, sc.frame_seconds);
  Output out(a.out);
  io::write_sweep_csv(out.get(), rows);
  return 0;
}

struct TrainArgs {
  ToyArgs toy;
  std::string out, init, curve;
};

int run_train(const TrainArgs& a) {
  const auto sc = synth_config(a.toy);
  const auto train_set = toy::synth_corpus(a.toy.n_train, sc, a.toy.seed);
  const auto heldout = toy::synth_corpus(a.toy.n_heldout, sc, heldout_seed(a.toy.seed));
  const auto cfg = train_config(a.toy);
  std::optional<toy::ToyModel> start;
  if (!a.init.empty()) start = io::load_checkpoint(a.init);
  auto res = toy::train(cfg, train_set, toy::ToyDims{}, start);
  const auto ev = toy::evaluate(res.model, heldout, {.beam = a.toy.beam, .max_symbols_per_frame = a.toy.max_symbols},
                                sc.frame_seconds);
  std::cout << "final_loss " << io::fixed(toy::corpus_loss(res.model, cfg, train_set), 6) << '\n'
            << "token_error " << io::fixed(ev.token_error(), 4) << '\n'
            << "avg_ed_s " << io::fixed(ev.delays.avg_ed(), 3) << '\n'
            << "avg_fd_s " << io::fixed(ev.delays.avg_fd(), 3) << '\n'
            << "matched_tokens " << ev.delays.count << '\n';
  if (!a.out.empty()) io::save_checkpoint(a.out, res.model);
  if (!a.curve.empty()) {
    Output curve(a.curve);
    curve.get() << "step,loss\n";
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i)
      curve.get() << i << ',' << io::fixed(res.loss_curve[i], 6) << '\n';
  }
  return 0;
}

// ---- bench ----

int run_bench_cmd(const BenchConfig& cfg) {
  const auto r = run_bench(cfg);
  const auto D = static_cast<std::size_t>(r.vocab);
  std::cout << "cells_dense " << r.cells_dense << '\n'
            << "cells_packed " << r.cells_packed << '\n'
            << "elements_dense " << r.cells_dense * D << '\n'
            << "elements_packed " << r.cells_packed * D << '\n'
            << "cell_ratio " << io::fixed(r.cell_ratio(), 3) << '\n'
            << "dense_s " << io::fixed(r.dense_seconds, 3) << '\n'
            << "packed_s " << io::fixed(r.packed_seconds, 3) << '\n'
            << "speedup " << io::fixed(r.speedup(), 3) << '\n'
            << "loss_dense " << io::fixed(r.dense_loss, 6) << '\n'
            << "loss_packed " << io::fixed(r.packed_loss, 6) << '\n';
  return 0;
}

void add_toy_options(CLI::App* cmd, ToyArgs& t) {
  cmd->add_option("--steps", t.steps, "SGD/Adam steps per model")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", t.batch, "utterances per step")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", t.lr, "learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--optimizer", t.optimizer, "adam | sgd");
  cmd->add_option("--seed", t.seed, "corpus and initialization seed");
  cmd->add_option("--n-train", t.n_train, "training utterances")->check(CLI::PositiveNumber);
  cmd->add_option("--n-heldout", t.n_heldout, "held-out utterances")->check(CLI::PositiveNumber);
  cmd->add_option("--beam", t.beam, "decoder beam")->check(CLI::PositiveNumber);
  cmd->add_option("--max-symbols", t.max_symbols, "emissions per frame")->check(CLI::NonNegativeNumber);
  cmd->add_option("--max-cue-lag", t.max_cue_lag, "synthetic cue lag in frames")->check(CLI::NonNegativeNumber);
  cmd->add_option("--bl", t.left, "left buffer b_l (frames)")->check(CLI::NonNegativeNumber);
}

/// Inserts `--key=value` pairs from the config file right after the subcommand
/// name, skipping keys already given on the command line.
std::vector<std::string> merge_config(CLI::App& app, std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  std::size_t sub_at = 0;
  CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size() && !sub; ++i) {
    if (args[i] == "--config") {
      ++i;
      continue;
    }
    if (auto* s = app.get_subcommand_no_throw(args[i])) {
      sub = s;
      sub_at = i;
    }
  }
  if (!sub) throw CLI::RequiredError("a subcommand");
  std::vector<std::string> extra;
  for (const auto& e : io::read_config(*path)) {
    const std::string flag = "--" + e.key;
    if (!sub->get_option_no_throw(flag))
      throw FormatError(*path + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "' for " + sub->get_name());
    bool given = false;
    for (std::size_t i = sub_at + 1; i < args.size(); ++i)
      given = given || args[i] == flag || args[i].rfind(flag + "=", 0) == 0;
    if (!given) extra.push_back(flag + "=" + e.value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alignment-restricted transducer toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config;
  app.add_option("--config", config, "key=value file; command-line flags take precedence");

  LossArgs loss;
  auto* c_loss = app.add_subcommand("loss", "transducer loss of one lattice");
  c_loss->add_option("--lattice", loss.lattice, "tensor file [T, U+1, D]")->required();
  c_loss->add_option("--target", loss.target, "JSON token array or file")->required();
  c_loss->add_option("--align", loss.align, "JSON encoder-frame labels or file; enables the band");
  c_loss->add_option("--bl", loss.left, "left buffer b_l")->check(CLI::NonNegativeNumber);
  c_loss->add_option("--br", loss.right, "right buffer b_r")->check(CLI::NonNegativeNumber);
  c_loss->add_option("--blank", loss.blank, "blank id");
  c_loss->add_option("--grad", loss.grad, "write the gradient tensor here");
  c_loss->add_flag("--logits", loss.logits, "input holds unnormalized logits; gradient is taken w.r.t. them");

  AlignArgs align;
  auto* c_align = app.add_subcommand("align", "word alignments to token end labels");
  c_align->add_option("--in", align.in, "utterance JSONL")->required();
  c_align->add_option("--strategy", align.strategy, "as1 | as2");
  c_align->add_option("--subsample", align.subsample, "acoustic frames per encoder frame")->check(CLI::PositiveNumber);
  c_align->add_option("--eos-id", align.eos_id, "append this EOS token pinned to the last encoder frame");
  c_align->add_option("--out", align.out, "output JSONL (default stdout)");

  DecodeArgs decode;
  auto* c_decode = app.add_subcommand("decode", "beam search over one lattice");
  c_decode->add_option("--lattice", decode.lattice, "normalized tensor file [T, U+1, D]")->required();
  c_decode->add_option("--beam", decode.beam, "beam width")->check(CLI::PositiveNumber);
  c_decode->add_option("--max-symbols", decode.max_symbols, "emissions per frame")->check(CLI::NonNegativeNumber);
  c_decode->add_option("--blank", decode.blank, "blank id");
  c_decode->add_option("--reference", decode.reference, "JSON file {tokens, ends} for ED/FD");
  c_decode->add_option("--frame-seconds", decode.frame_seconds, "encoder frame length")->check(CLI::PositiveNumber);
  c_decode->add_option("--out", decode.out, "output JSONL (default stdout)");

  EndpointArgs ep;
  auto* c_ep = app.add_subcommand("endpoint", "simulate an end-pointer over a corpus");
  c_ep->add_option("--in", ep.in, "endpoint JSONL")->required();
  c_ep->add_option("--policy", ep.policy, "static | nep | e2e");
  c_ep->add_option("--t-static", ep.t_static, "static trailing-silence threshold (s)");
  c_ep->add_option("--alpha", ep.alpha, "probability threshold");
  c_ep->add_option("--dwell-ms", ep.dwell_ms, "dwell time (ms)");
  c_ep->add_option("--fallback", ep.fallback, "static fallback threshold (s) for nep/e2e");
  c_ep->add_option("--append-silence", ep.append_silence, "silence appended to every utterance (s)");
  c_ep->add_option("--out", ep.out, "per-utterance JSONL");
  c_ep->add_option("--report", ep.report, "report CSV (default stdout)");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "train one toy model per b_r and report the trade-off");
  c_sweep->add_option("--br", sweep.rights, "comma-separated b_r values; 'inf' = standard loss")->delimiter(',');
  c_sweep->add_option("--out", sweep.out, "CSV (default stdout)");
  add_toy_options(c_sweep, sweep.toy);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train-toy", "train the toy transducer on synthetic data");
  add_toy_options(c_train, tr.toy);
  c_train->add_option("--loss", tr.toy.loss, "standard | ar");
  c_train->add_option("--br", tr.toy.right, "right buffer b_r (frames)")->check(CLI::NonNegativeNumber);
  c_train->add_option("--out", tr.out, "checkpoint to write");
  c_train->add_option("--init", tr.init, "checkpoint to fine-tune from");
  c_train->add_option("--curve", tr.curve, "loss curve CSV");

  BenchConfig bench;
  auto* c_bench = app.add_subcommand("bench", "dense vs packed fused loss");
  c_bench->add_option("--T", bench.frames, "encoder frames")->check(CLI::PositiveNumber);
  c_bench->add_option("--U", bench.tokens, "target tokens")->check(CLI::NonNegativeNumber);
  c_bench->add_option("--D", bench.vocab, "vocabulary incl. blank")->check(CLI::Range(2, 1 << 20));
  c_bench->add_option("--bl", bench.left, "left buffer")->check(CLI::NonNegativeNumber);
  c_bench->add_option("--br", bench.right, "right buffer")->check(CLI::NonNegativeNumber);
  c_bench->add_option("--iters", bench.iters, "timed repetitions")->check(CLI::PositiveNumber);
  c_bench->add_option("--seed", bench.seed, "random lattice seed");
  c_bench->add_flag("--vacuous", bench.vacuous, "use the full lattice as the band");

  try {
    auto args = merge_config(app, std::vector<std::string>(argv, argv + argc));
    std::vector<char*> cargs;
    for (auto& s : args) cargs.push_back(s.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*c_loss) return run_loss(loss);
    if (*c_align) return run_align(align);
    if (*c_decode) return run_decode(decode);
    if (*c_ep) return run_endpoint(ep);
    if (*c_sweep) return run_sweep(sweep);
    if (*c_train) return run_train(tr);
    if (*c_bench) return run_bench_cmd(bench);
  } catch (const BandInfeasible& e) {
    std::cerr << "error: band infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
