#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "artl/error.hpp"
#include "artl/lattice.hpp"

namespace artl::io {

// "ARTL" | u32 version | u32 dtype | u32 rank | u64 dims[rank] | row-major payload.
// Everything little-endian.
inline constexpr char kTensorMagic[4] = {'A', 'R', 'T', 'L'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kMaxRank = 8;

enum class DType : std::uint32_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

namespace detail {

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | (v & 0xff));
      v = static_cast<U>(v >> 8);
    }
    return out;
  }
  return v;
}

template <class U>
void put(std::ostream& os, U v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get(std::istream& is, const char* what) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("truncated ") + what);
  return to_little(v);
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor& t, DType dtype = DType::F64) {
  if (t.dims.size() > kMaxRank) throw InvalidArgument("tensor rank above " + std::to_string(kMaxRank));
  if (t.element_count() != t.data.size()) throw DimensionMismatch("tensor payload does not match its dims");
  os.write(kTensorMagic, 4);
  detail::put<std::uint32_t>(os, kTensorVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(dtype));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put<std::uint64_t>(os, d);
  for (double v : t.data) {
    if (dtype == DType::F32)
      detail::put(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    else
      detail::put(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw FormatError("tensor write failed");
}

/// Reads exactly one tensor; anything after the payload is an error.
inline Tensor read_tensor(std::istream& is) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError("bad tensor header");
  const auto version = detail::get<std::uint32_t>(is, "tensor header");
  if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  const auto code = detail::get<std::uint32_t>(is, "tensor header");
  if (code > 1) throw FormatError("unknown tensor dtype " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const auto rank = detail::get<std::uint32_t>(is, "tensor header");
  if (rank > kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " above " + std::to_string(kMaxRank));
  Tensor t;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = detail::get<std::uint64_t>(is, "tensor dims");
    if (d != 0 && count > std::numeric_limits<std::uint32_t>::max() / d) throw FormatError("tensor too large");
    count *= d;
    t.dims.push_back(d);
  }
  t.data.resize(static_cast<std::size_t>(count));
  for (auto& v : t.data) {
    if (dtype == DType::F32)
      v = std::bit_cast<float>(detail::get<std::uint32_t>(is, "tensor payload"));
    else
      v = std::bit_cast<double>(detail::get<std::uint64_t>(is, "tensor payload"));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after tensor payload");
  return t;
}

inline Tensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_tensor(in);
}

inline void write_tensor(const std::string& path, const Tensor& t, DType dtype = DType::F64) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_tensor(out, t, dtype);
}

/// A lattice is stored as a rank-3 tensor [T, U+1, D].
inline Tensor lattice_tensor(const Lattice& lat) {
  return {{static_cast<std::uint64_t>(lat.frames()), static_cast<std::uint64_t>(lat.tokens() + 1),
           static_cast<std::uint64_t>(lat.vocab())},
          {lat.values().begin(), lat.values().end()}};
}

inline Lattice tensor_lattice(Tensor t, int blank = 0) {
  if (t.dims.size() != 3) throw DimensionMismatch("lattice tensor must have rank 3 [T, U+1, D]");
  if (t.dims[1] < 1) throw DimensionMismatch("lattice tensor needs U+1 >= 1");
  return Lattice(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]) - 1, static_cast<int>(t.dims[2]),
                 std::move(t.data), blank);
}

}  // namespace artl::io
