#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "artl/io/tensor.hpp"
#include "artl/toy/model.hpp"

namespace artl::io {

// "ARTM" | u32 version | u32 dims[7] | u32 count |
// count x (u32 name length | name | u64 rows | u64 cols | f64 payload, column-major).
inline constexpr char kCheckpointMagic[4] = {'A', 'R', 'T', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& os, const toy::ToyModel& m) {
  os.write(kCheckpointMagic, 4);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  const auto& d = m.dims;
  for (int v : {d.features, d.hidden, d.embed, d.predictor, d.joint, d.vocab, d.blank})
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  std::uint32_t count = 0;
  m.visit([&](const std::string&, const Eigen::MatrixXd&) { ++count; });
  detail::put<std::uint32_t>(os, count);
  m.visit([&](const std::string& name, const Eigen::MatrixXd& w) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(w.rows()));
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) detail::put(os, std::bit_cast<std::uint64_t>(w(i)));
  });
  if (!os) throw FormatError("checkpoint write failed");
}

/// Tensors must appear with the names and shapes of a freshly built model of the stored dims.
inline toy::ToyModel load_checkpoint(std::istream& is) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint header");
  const auto version = detail::get<std::uint32_t>(is, "checkpoint header");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  toy::ToyDims d;
  for (int* v : {&d.features, &d.hidden, &d.embed, &d.predictor, &d.joint, &d.vocab, &d.blank}) {
    const auto x = detail::get<std::uint32_t>(is, "checkpoint header");
    if (x > 1u << 16) throw FormatError("implausible model dimension");
    *v = static_cast<int>(x);
  }
  if (d.vocab < 2 || d.blank >= d.vocab) throw FormatError("bad vocab in checkpoint");
  auto m = toy::ToyModel::init(d, 0);
  std::uint32_t expected = 0;
  m.visit([&](const std::string&, const Eigen::MatrixXd&) { ++expected; });
  if (detail::get<std::uint32_t>(is, "checkpoint header") != expected) throw FormatError("checkpoint tensor count");
  m.visit([&](const std::string& name, Eigen::MatrixXd& w) {
    const auto len = detail::get<std::uint32_t>(is, "tensor name");
    if (len != name.size()) throw FormatError("expected tensor '" + name + "'");
    std::string got(len, '\0');
    if (!is.read(got.data(), len) || got != name) throw FormatError("expected tensor '" + name + "'");
    const auto rows = detail::get<std::uint64_t>(is, "tensor shape");
    const auto cols = detail::get<std::uint64_t>(is, "tensor shape");
    if (rows != static_cast<std::uint64_t>(w.rows()) || cols != static_cast<std::uint64_t>(w.cols()))
      throw FormatError("tensor '" + name + "' has the wrong shape");
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w(i) = std::bit_cast<double>(detail::get<std::uint64_t>(is, "tensor payload"));
  });
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return m;
}

inline void save_checkpoint(const std::string& path, const toy::ToyModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  save_checkpoint(out, m);
}

inline toy::ToyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace artl::io
