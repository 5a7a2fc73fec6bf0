// Copyright (c) 2026, sttts contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STTTS_IO_HPP_
#define STTTS_IO_HPP_

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sttts/core.hpp"

namespace sttts {

// Mel file: "MEL1" magic, uint32 T, uint32 D (little-endian), then T*D
// float32, frames outermost (row-major).

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32_le(os, bits);
}

inline float read_f32_le(std::istream& is) {
  const std::uint32_t bits = read_u32_le(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

template <typename Scalar>
void write_mel(const std::filesystem::path& path, const Matrix<Scalar>& mel) {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "write_mel: cannot open " + path.string());
  os.write("MEL1", 4);
  write_u32_le(os, static_cast<std::uint32_t>(mel.rows()));
  write_u32_le(os, static_cast<std::uint32_t>(mel.cols()));
  for (Eigen::Index t = 0; t < mel.rows(); ++t)
    for (Eigen::Index d = 0; d < mel.cols(); ++d) write_f32_le(os, static_cast<float>(mel(t, d)));
  check(os.good(), "write_mel: write failed for " + path.string());
}

template <typename Scalar = float>
Matrix<Scalar> read_mel(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "read_mel: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  check(is.good() && std::memcmp(magic, "MEL1", 4) == 0,
        "read_mel: bad magic in " + path.string());
  const std::uint32_t t = read_u32_le(is);
  const std::uint32_t d = read_u32_le(is);
  check(is.good(), "read_mel: truncated header in " + path.string());
  Matrix<Scalar> mel(t, d);
  for (std::uint32_t i = 0; i < t; ++i)
    for (std::uint32_t j = 0; j < d; ++j) mel(i, j) = static_cast<Scalar>(read_f32_le(is));
  check(is.good(), "read_mel: payload shorter than header T*D in " + path.string());
  is.peek();
  check(is.eof(), "read_mel: payload longer than header T*D in " + path.string());
  return mel;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  check(is.good(), "read_lines: cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "write_text: cannot open " + path.string());
  os << content;
  check(os.good(), "write_text: write failed for " + path.string());
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Shortest round-trip decimal form, locale independent.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  check(res.ec == std::errc() && res.ptr == s.data() + s.size(),
        "parse_double: bad value '" + s + "' for " + what);
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  check(res.ec == std::errc() && res.ptr == s.data() + s.size(),
        "parse_int: bad value '" + s + "' for " + what);
  return v;
}

}  // namespace sttts

#endif  // STTTS_IO_HPP_
