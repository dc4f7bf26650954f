#ifndef OTROLL_MATRIX_FILE_HPP
#define OTROLL_MATRIX_FILE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/matrix.hpp"

// OTPR1 matrix files: one text line "OTPR1 <n_frames> <n_pitches>\n", then
// n_frames * n_pitches float32 values, little-endian, frames outer.

namespace otroll {

inline constexpr const char* kMatrixMagic = "OTPR1";

inline std::vector<std::uint8_t> encode_matrix(const Matrix<float>& m) {
  const std::string header = std::string(kMatrixMagic) + " " + std::to_string(m.rows()) + " " +
                             std::to_string(m.cols()) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * m.size());
  for (float v : m.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  return out;
}

inline Matrix<float> decode_matrix(std::span<const std::uint8_t> bytes) {
  std::size_t nl = 0;
  while (nl < bytes.size() && nl < 64 && bytes[nl] != '\n') ++nl;
  if (nl == bytes.size() || bytes[nl] != '\n')
    throw FormatError("matrix file: missing header line", 0);
  std::istringstream header(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(nl)));
  std::string magic;
  long long rows = -1, cols = -1;
  header >> magic >> rows >> cols;
  if (magic != kMatrixMagic) throw FormatError("matrix file: bad magic, expected OTPR1", 0);
  std::string rest;
  if (!header || rows < 0 || cols < 0 || (header >> rest))
    throw FormatError("matrix file: malformed header", 0);

  const std::size_t payload = bytes.size() - nl - 1;
  const auto expected = 4ull * static_cast<unsigned long long>(rows) * static_cast<unsigned long long>(cols);
  if (payload != expected)
    throw FormatError("matrix file: payload is " + std::to_string(payload) + " bytes, header implies " +
                          std::to_string(expected),
                      nl + 1);

  Matrix<float> m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  const std::uint8_t* p = bytes.data() + nl + 1;
  for (std::size_t i = 0; i < m.size(); ++i, p += 4) {
    const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                               (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
    m[i] = std::bit_cast<float>(bits);
  }
  return m;
}

inline Matrix<float> to_float(const Matrix<double>& m) {
  Matrix<float> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = static_cast<float>(m[i]);
  return out;
}

inline Matrix<double> to_double(const Matrix<float>& m) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i];
  return out;
}

inline void save_matrix(const std::string& path, const Matrix<float>& m) {
  const auto bytes = encode_matrix(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

inline Matrix<float> load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  return decode_matrix(bytes);
}

}  // namespace otroll

#endif  // OTROLL_MATRIX_FILE_HPP
