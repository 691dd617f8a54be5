#pragma once

#include <json.hpp>

#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "artl/band_plan.hpp"
#include "artl/endpointing.hpp"
#include "artl/error.hpp"

namespace artl::io {

using nlohmann::json;

/// Calls `fn(record, line_number)` for every non-blank line. Parse and
/// validation errors are rethrown as FormatError prefixed with the 1-based line.
inline void for_each_jsonl(std::istream& in, const std::string& source,
                           const std::function<void(const json&, int)>& fn) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), number);
    } catch (const json::exception& e) {
      throw FormatError(source + ":" + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw FormatError("record must be a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::type_error&) {
    throw FormatError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_as<T>(j, key);
}

/// Frames are integers on disk; 3.0 or 1.5 are rejected rather than truncated.
inline int get_frame(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw FormatError(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

inline std::vector<int> get_frames(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_array()) throw FormatError(std::string("field '") + key + "' must be an integer array");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw FormatError(std::string("field '") + key + "' must be an integer array");
    out.push_back(x.get<int>());
  }
  return out;
}

}  // namespace detail

/// One utterance with its word-level forced alignment, frames in acoustic frames.
/// A word is silence when it says so or its text is "<sil>"/"SIL"; silence has no pieces.
struct UtteranceRecord {
  std::string id;
  std::vector<int> tokens;
  WordAlignment words;
  std::optional<int> frames;  // acoustic frame count
  double frame_seconds = 0.01;
  std::optional<std::vector<double>> eoq_stream;
  int line = 0;  // 1-based source line, 0 when not read from a file

  void validate() const {
    words.validate();
    if (words.tokens() != tokens) throw FormatError("word pieces do not spell 'tokens'");
    if (frames && !words.words.empty() && words.words.back().end >= *frames)
      throw FormatError("word end beyond 'frames'");
    if (!(frame_seconds > 0.0)) throw FormatError("frame_seconds must be > 0");
  }
};

inline UtteranceRecord parse_utterance(const json& j) {
  UtteranceRecord r;
  r.id = detail::get_as<std::string>(j, "id");
  r.tokens = detail::get_frames(j, "tokens");
  const auto& words = detail::field(j, "words");
  if (!words.is_array()) throw FormatError("field 'words' must be an array");
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    WordSpan s;
    s.text = detail::get_as<std::string>(w, "text");
    s.start = detail::get_frame(w, "start");
    s.end = detail::get_frame(w, "end");
    if (w.contains("pieces")) s.pieces = detail::get_frames(w, "pieces");
    s.silence = detail::get_opt<bool>(w, "silence").value_or(s.text == "<sil>" || s.text == "SIL");
    r.words.words.push_back(std::move(s));
  }
  if (j.contains("frames")) r.frames = detail::get_frame(j, "frames");
  r.frame_seconds = detail::get_opt<double>(j, "frame_seconds").value_or(r.frame_seconds);
  r.eoq_stream = detail::get_opt<std::vector<double>>(j, "eoq_stream");
  r.validate();
  return r;
}

inline json to_json(const UtteranceRecord& r) {
  json words = json::array();
  for (const auto& w : r.words.words) {
    json o{{"text", w.text}, {"start", w.start}, {"end", w.end}, {"pieces", w.pieces}};
    if (w.silence) o["silence"] = true;
    words.push_back(std::move(o));
  }
  json j{{"id", r.id}, {"tokens", r.tokens}, {"words", words}, {"frame_seconds", r.frame_seconds}};
  if (r.frames) j["frames"] = *r.frames;
  if (r.eoq_stream) j["eoq_stream"] = *r.eoq_stream;
  return j;
}

inline std::vector<UtteranceRecord> read_utterances(const std::string& path) {
  auto in = open_input(path);
  std::vector<UtteranceRecord> out;
  for_each_jsonl(in, path, [&](const json& j, int line) {
    out.push_back(parse_utterance(j));
    out.back().line = line;
  });
  return out;
}

/// End-pointer input for one utterance. Times are integer frames on disk.
struct EndpointRecord {
  std::string id;
  double frame_seconds = 0.0;
  std::vector<int> emission_frames;  // ET_asr of the 1-best tokens
  int audio_frames = 0;
  int speech_end_frame = 0;
  std::vector<double> eoq;
  std::vector<double> eos;
  int line = 0;

  UtteranceTiming timing() const {
    UtteranceTiming u;
    for (int f : emission_frames) u.emissions.push_back(f * frame_seconds);
    u.audio_seconds = audio_frames * frame_seconds;
    u.speech_end = speech_end_frame * frame_seconds;
    u.frame_seconds = frame_seconds;
    u.eoq = eoq;
    u.eos = eos;
    return u;
  }
};

inline EndpointRecord parse_endpoint(const json& j) {
  EndpointRecord r;
  r.id = detail::get_as<std::string>(j, "id");
  r.frame_seconds = detail::get_as<double>(j, "frame_seconds");
  r.emission_frames = detail::get_frames(j, "emission_frames");
  r.audio_frames = detail::get_frame(j, "audio_frames");
  r.speech_end_frame = detail::get_frame(j, "speech_end_frame");
  r.eoq = detail::get_opt<std::vector<double>>(j, "eoq").value_or(std::vector<double>{});
  r.eos = detail::get_opt<std::vector<double>>(j, "eos").value_or(std::vector<double>{});
  if (!(r.frame_seconds > 0.0)) throw FormatError("frame_seconds must be > 0");
  if (r.audio_frames < 0 || r.speech_end_frame < 0) throw FormatError("frame counts must be >= 0");
  for (int f : r.emission_frames)
    if (f < 0 || f >= r.audio_frames) throw FormatError("emission frame outside the audio");
  for (const auto* s : {&r.eoq, &r.eos})
    for (double p : *s)
      if (!(p >= 0.0 && p <= 1.0)) throw FormatError("stream probabilities must lie in [0,1]");
  return r;
}

inline std::vector<EndpointRecord> read_endpoint_records(const std::string& path) {
  auto in = open_input(path);
  std::vector<EndpointRecord> out;
  for_each_jsonl(in, path, [&](const json& j, int line) {
    out.push_back(parse_endpoint(j));
    out.back().line = line;
  });
  return out;
}

}  // namespace artl::io
