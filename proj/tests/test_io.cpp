#include <gtest/gtest.h>

#include <sstream>

#include "artl/io/checkpoint.hpp"
#include "artl/io/config.hpp"
#include "artl/io/records.hpp"
#include "artl/io/report.hpp"
#include "artl/io/tensor.hpp"

using namespace artl;
using namespace artl::io;

namespace {

std::string bytes_of(const Tensor& t, DType d = DType::F64) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t, d);
  return os.str();
}

Tensor parse_bytes(const std::string& s) {
  std::istringstream is(s, std::ios::binary);
  return read_tensor(is);
}

template <class Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "<no error>";
}

}  // namespace

TEST(Tensor, RoundTripF64) {
  Tensor t{{2, 3}, {1.5, -2.0, 0.0, 1e-300, -1e300, 3.25}};
  const auto s = bytes_of(t);
  EXPECT_EQ(s.size(), 4 + 4 * 3 + 8 * 2 + 8 * 6u);
  EXPECT_EQ(s.substr(0, 4), "ARTL");
  auto back = parse_bytes(s);
  EXPECT_EQ(back.dims, t.dims);
  EXPECT_EQ(back.data, t.data);
}

TEST(Tensor, LayoutIsLittleEndian) {
  const auto s = bytes_of(Tensor{{1}, {1.0}}, DType::F32);
  // version 1, dtype 0, rank 1, dim 1, then 1.0f = 0x3f800000.
  const std::string expected("ARTL\x01\0\0\0\0\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0\0\0\x80\x3f", 28);
  EXPECT_EQ(s, expected);
}

TEST(Tensor, F32RoundsThroughFloat) {
  auto back = parse_bytes(bytes_of(Tensor{{2}, {0.1, -3.0}}, DType::F32));
  EXPECT_EQ(back.data[0], static_cast<double>(0.1f));
  EXPECT_EQ(back.data[1], -3.0);
}

TEST(Tensor, RejectsMalformedInput) {
  const auto good = bytes_of(Tensor{{2}, {1.0, 2.0}});
  EXPECT_EQ(error_of([&] { parse_bytes("ARTX" + good.substr(4)); }), "bad tensor header");
  EXPECT_EQ(error_of([&] { parse_bytes("AR"); }), "bad tensor header");
  EXPECT_EQ(error_of([&] { parse_bytes(good + "x"); }), "trailing bytes after tensor payload");
  EXPECT_EQ(error_of([&] { parse_bytes(good.substr(0, good.size() - 1)); }), "truncated tensor payload");
  auto wrong_version = good;
  wrong_version[4] = 2;
  EXPECT_THROW(parse_bytes(wrong_version), FormatError);
  auto wrong_dtype = good;
  wrong_dtype[8] = 7;
  EXPECT_THROW(parse_bytes(wrong_dtype), FormatError);
  EXPECT_THROW(bytes_of(Tensor{{3}, {1.0}}), DimensionMismatch);
}

TEST(Tensor, LatticeRoundTrip) {
  auto lat = Lattice::uniform(3, 2, 4);
  lat(1, 2, 1) = -0.5;
  auto back = tensor_lattice(parse_bytes(bytes_of(lattice_tensor(lat))));
  EXPECT_EQ(back.frames(), 3);
  EXPECT_EQ(back.tokens(), 2);
  EXPECT_EQ(back.vocab(), 4);
  EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), lat.values().begin()));
  EXPECT_THROW(tensor_lattice(Tensor{{3, 4}, std::vector<double>(12)}), DimensionMismatch);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto m = toy::ToyModel::init(toy::ToyDims{}, 9);
  std::ostringstream os(std::ios::binary);
  save_checkpoint(os, m);
  std::istringstream is(os.str(), std::ios::binary);
  auto back = load_checkpoint(is);
  std::vector<const Eigen::MatrixXd*> got;
  back.visit([&](const std::string&, const Eigen::MatrixXd& w) { got.push_back(&w); });
  std::size_t p = 0;
  m.visit([&](const std::string& name, const Eigen::MatrixXd& w) { EXPECT_EQ(*got[p++], w) << name; });

  std::istringstream bad("ARTL" + os.str().substr(4), std::ios::binary);
  EXPECT_EQ(error_of([&] { load_checkpoint(bad); }), "bad checkpoint header");
  std::istringstream trailing(os.str() + "!", std::ios::binary);
  EXPECT_THROW(load_checkpoint(trailing), FormatError);
}

TEST(Jsonl, ReportsOneBasedLines) {
  std::istringstream in("{\"id\":\"a\"}\n\n{\"id\": \"b\"} trailing\n");
  std::vector<int> lines;
  auto msg = error_of([&] { for_each_jsonl(in, "x.jsonl", [&](const json&, int line) { lines.push_back(line); }); });
  EXPECT_EQ(lines, (std::vector<int>{1}));
  EXPECT_EQ(msg.rfind("x.jsonl:3: ", 0), 0u) << msg;
}

TEST(Jsonl, UtteranceRecordFields) {
  auto r = parse_utterance(json::parse(
      R"({"id":"u","tokens":[1,2,3],"words":[{"text":"a","start":0,"end":4,"pieces":[1,2]},)"
      R"({"text":"SIL","start":5,"end":6},{"text":"b","start":7,"end":9,"pieces":[3]}],"frames":10,"frame_seconds":0.01})"));
  EXPECT_EQ(r.id, "u");
  ASSERT_EQ(r.words.words.size(), 3u);
  EXPECT_TRUE(r.words.words[1].silence);
  EXPECT_EQ(align_as1(r.words).frames, (std::vector<int>{4, 4, 9}));
  auto again = parse_utterance(to_json(r));
  EXPECT_EQ(again.tokens, r.tokens);
  EXPECT_EQ(again.frames, r.frames);
}

TEST(Jsonl, UtteranceRecordValidation) {
  auto bad = [](const char* text) { return error_of([&] { parse_utterance(json::parse(text)); }); };
  EXPECT_NE(bad(R"({"tokens":[1],"words":[]})").find("missing field 'id'"), std::string::npos);
  EXPECT_NE(bad(R"({"id":"u","tokens":[2],"words":[{"text":"a","start":0,"end":1,"pieces":[1]}]})").find("spell"),
            std::string::npos);
  EXPECT_NE(bad(R"({"id":"u","tokens":"x","words":[]})").find("integer array"), std::string::npos);
  EXPECT_THROW(parse_utterance(json::parse(R"({"id":"u","tokens":[1],"words":[{"text":"a","start":3,"end":1,"pieces":[1]}]})")),
               InvalidArgument);
  EXPECT_THROW(parse_utterance(json::parse(R"({"id":"u","tokens":[1],"words":[{"text":"a","start":0,"end":9,"pieces":[1]}],"frames":5})")),
               FormatError);
}

TEST(Jsonl, EndpointRecordUsesIntegerFrames) {
  auto r = parse_endpoint(json::parse(
      R"({"id":"e","frame_seconds":0.1,"emission_frames":[3,7],"audio_frames":20,"speech_end_frame":8,"eoq":[0.1,0.9]})"));
  const auto u = r.timing();
  EXPECT_DOUBLE_EQ(u.emissions[1], 0.7);
  EXPECT_DOUBLE_EQ(u.audio_seconds, 2.0);
  EXPECT_DOUBLE_EQ(u.speech_end, 0.8);
  EXPECT_EQ(u.eoq.size(), 2u);
  EXPECT_THROW(parse_endpoint(json::parse(
                   R"({"id":"e","frame_seconds":0.1,"emission_frames":[1.5],"audio_frames":20,"speech_end_frame":8})")),
               FormatError);
  EXPECT_THROW(parse_endpoint(json::parse(
                   R"({"id":"e","frame_seconds":0.1,"emission_frames":[30],"audio_frames":20,"speech_end_frame":8})")),
               FormatError);
  EXPECT_THROW(parse_endpoint(json::parse(
                   R"({"id":"e","frame_seconds":0.1,"emission_frames":[],"audio_frames":20,"speech_end_frame":8,"eos":[1.5]})")),
               FormatError);
}

TEST(Config, KeyValueLines) {
  std::istringstream in("# comment\npolicy = static\n\nt_static=1.5  # trailing comment\n");
  auto entries = parse_config(in, "c.cfg");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].key, "policy");
  EXPECT_EQ(entries[0].value, "static");
  EXPECT_EQ(entries[1].key, "t-static");
  EXPECT_EQ(entries[1].value, "1.5");
  EXPECT_EQ(entries[1].line, 4);
}

TEST(Config, ErrorsCarryLineNumbers) {
  std::istringstream missing("a = 1\njust words\n");
  EXPECT_EQ(error_of([&] { parse_config(missing, "c.cfg"); }), "c.cfg:2: expected key=value");
  std::istringstream dup("a = 1\na=2\n");
  EXPECT_EQ(error_of([&] { parse_config(dup, "c.cfg"); }), "c.cfg:2: duplicate key 'a'");
  std::istringstream empty(" = 3\n");
  EXPECT_EQ(error_of([&] { parse_config(empty, "c.cfg"); }), "c.cfg:1: empty key");
}

TEST(Report, EndpointCsvUsesThreeDecimals) {
  EndpointReport r;
  r.utterances = 5;
  r.decided = 4;
  r.l_avg = 0.725;
  r.l_p90 = 0.9;
  r.early_cut_pct = 20.0;
  std::ostringstream os;
  write_endpoint_csv(os, r);
  EXPECT_EQ(os.str(),
            "utterances,decided,l_avg_s,l_p90_s,early_cut_pct,noep_pct,truncated_tokens\n"
            "5,4,0.725,0.900,20.0,0.0,0\n");
  r.l_avg.reset();
  r.l_p90.reset();
  std::ostringstream none;
  write_endpoint_csv(none, r);
  EXPECT_NE(none.str().find("5,4,,,20.0"), std::string::npos);
}

TEST(Report, SweepCsv) {
  std::vector<toy::SweepRow> rows{{0, 0.5, -0.0001, 0.01, 10, 1.25}, {std::nullopt, 0.0, 0.2, 0.25, 40, 0.001}};
  std::ostringstream os;
  write_sweep_csv(os, rows);
  EXPECT_EQ(os.str(),
            "b_r,token_error,avg_ed_s,avg_fd_s,matched_tokens,final_loss\n"
            "0,0.5000,0.000,0.010,10,1.250000\n"
            "inf,0.0000,0.200,0.250,40,0.001000\n");
}
