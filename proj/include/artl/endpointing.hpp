#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "artl/error.hpp"

namespace artl {

enum class EndpointPolicy { Static, Neural, EndToEnd };

inline EndpointPolicy parse_policy(const std::string& name) {
  if (name == "static") return EndpointPolicy::Static;
  if (name == "nep") return EndpointPolicy::Neural;
  if (name == "e2e") return EndpointPolicy::EndToEnd;
  throw InvalidArgument("unknown end-pointer policy '" + name + "' (static|nep|e2e)");
}

/// Thresholds are probabilities, dwells are milliseconds, static times seconds.
struct EndpointConfig {
  EndpointPolicy policy = EndpointPolicy::Static;
  double t_static = 1.0;
  double alpha_eoq = 0.5;
  double t_eoq_ms = 200.0;
  double alpha_e2e = 0.5;
  double t_e2e_ms = 200.0;
  std::optional<double> fallback_static;

  void validate() const {
    auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!unit(alpha_eoq) || !unit(alpha_e2e)) throw InvalidArgument("end-pointer thresholds must lie in [0,1]");
    if (t_eoq_ms < 0.0 || t_e2e_ms < 0.0) throw InvalidArgument("dwell times must be >= 0");
    if (t_static < 0.0 || (fallback_static && *fallback_static < 0.0))
      throw InvalidArgument("static thresholds must be >= 0");
  }
};

/// What the end-pointer knows about one utterance, in seconds.
struct UtteranceTiming {
  std::vector<double> emissions;  // ET_asr of the 1-best tokens
  double audio_seconds = 0.0;
  double speech_end = 0.0;        // annotated end of speech
  double frame_seconds = 0.0;
  std::vector<double> eoq;        // per-frame P(eoq) from a neural end-pointer
  std::vector<double> eos;        // per-frame P(eos) of the decoder's 1-best

  std::optional<double> last_emission() const {
    if (emissions.empty()) return std::nullopt;
    return *std::max_element(emissions.begin(), emissions.end());
  }
};

struct EndpointOutcome {
  std::optional<double> decision_time;
  double latency = 0.0;
  bool early_cut = false;
  bool no_endpoint = true;
  int truncated_tokens = 0;  // tokens emitted after the decision
};

namespace detail {

inline constexpr double kTimeTol = 1e-9;

inline EndpointOutcome decide(const UtteranceTiming& utt, std::optional<double> when) {
  EndpointOutcome out;
  if (!when) return out;
  out.decision_time = when;
  out.no_endpoint = false;
  out.latency = *when - utt.speech_end;
  out.early_cut = *when < utt.speech_end - kTimeTol;
  out.truncated_tokens = static_cast<int>(
      std::count_if(utt.emissions.begin(), utt.emissions.end(), [&](double e) { return e > *when + kTimeTol; }));
  return out;
}

inline std::optional<double> static_decision(const UtteranceTiming& utt, double t_static) {
  const double when = utt.last_emission().value_or(0.0) + t_static;
  if (when > utt.audio_seconds + kTimeTol) return std::nullopt;
  return when;
}

inline std::optional<double> dwell_decision(std::span<const double> probs, double frame_seconds, double alpha,
                                            double dwell_ms) {
  const double frame_ms = frame_seconds * 1000.0;
  int run = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    run = probs[i] >= alpha ? run + 1 : 0;
    if (run > 0 && run * frame_ms >= dwell_ms - 1e-6) return static_cast<double>(i + 1) * frame_seconds;
  }
  return std::nullopt;
}

}  // namespace detail

/// Trailing-silence rule: end-point T_static after the last emitted token (or
/// after the audio start if nothing was emitted), unless that lies past the audio.
inline EndpointOutcome run_static(const UtteranceTiming& utt, double t_static) {
  return detail::decide(utt, detail::static_decision(utt, t_static));
}

/// End-points at the end of the first window where the probability stays at or
/// above `alpha` for at least `dwell_ms`. A static fallback, when given, runs
/// alongside and wins if it fires first.
inline EndpointOutcome run_dwell(std::span<const double> probs, double alpha, double dwell_ms,
                                 const UtteranceTiming& utt, std::optional<double> fallback_static = std::nullopt) {
  if (utt.frame_seconds <= 0.0) throw InvalidArgument("frame duration must be positive");
  auto when = detail::dwell_decision(probs, utt.frame_seconds, alpha, dwell_ms);
  if (fallback_static) {
    auto fb = detail::static_decision(utt, *fallback_static);
    if (fb && (!when || *fb < *when)) when = fb;
  }
  return detail::decide(utt, when);
}

inline EndpointOutcome run_endpointer(const EndpointConfig& cfg, const UtteranceTiming& utt) {
  cfg.validate();
  switch (cfg.policy) {
    case EndpointPolicy::Static:
      return run_static(utt, cfg.t_static);
    case EndpointPolicy::Neural:
      return run_dwell(utt.eoq, cfg.alpha_eoq, cfg.t_eoq_ms, utt, cfg.fallback_static);
    case EndpointPolicy::EndToEnd:
      return run_dwell(utt.eos, cfg.alpha_e2e, cfg.t_e2e_ms, utt, cfg.fallback_static);
  }
  return {};
}

/// Evaluation protocol: silence appended after the audio. Probability streams are
/// extended by holding their last value.
inline UtteranceTiming with_trailing_silence(UtteranceTiming utt, double seconds) {
  if (seconds <= 0.0) return utt;
  utt.audio_seconds += seconds;
  if (utt.frame_seconds > 0.0) {
    const auto extra = static_cast<std::size_t>(std::llround(seconds / utt.frame_seconds));
    for (auto* stream : {&utt.eoq, &utt.eos})
      if (!stream->empty()) stream->insert(stream->end(), extra, stream->back());
  }
  return utt;
}

struct EndpointReport {
  int utterances = 0;
  int decided = 0;                // decided and not early-cut: the latency population
  std::optional<double> l_avg;    // seconds
  std::optional<double> l_p90;    // nearest rank
  double early_cut_pct = 0.0;
  double noep_pct = 0.0;
  int truncated_tokens = 0;
};

/// Corpus metrics. Early cuts are reported separately and excluded from the
/// latency statistics; percentages are over all utterances.
inline EndpointReport aggregate(std::span<const EndpointOutcome> outcomes) {
  if (outcomes.empty()) throw EmptyCorpus("no end-pointing outcomes to aggregate");
  EndpointReport r;
  r.utterances = static_cast<int>(outcomes.size());
  std::vector<double> lat;
  int early = 0, noep = 0;
  for (const auto& o : outcomes) {
    r.truncated_tokens += o.truncated_tokens;
    if (o.no_endpoint) {
      ++noep;
    } else if (o.early_cut) {
      ++early;
    } else {
      lat.push_back(o.latency);
    }
  }
  r.decided = static_cast<int>(lat.size());
  r.early_cut_pct = 100.0 * early / r.utterances;
  r.noep_pct = 100.0 * noep / r.utterances;
  if (!lat.empty()) {
    double sum = 0.0;
    for (double l : lat) sum += l;
    r.l_avg = sum / static_cast<double>(lat.size());
    std::sort(lat.begin(), lat.end());
    const std::size_t rank = (9 * lat.size() + 9) / 10;  // ceil(0.9 n)
    r.l_p90 = lat[rank - 1];
  }
  return r;
}

}  // namespace artl
