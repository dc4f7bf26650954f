#include "otroll/matrix_file.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

namespace otroll {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

TEST(MatrixFileTest, HeaderAndLittleEndianPayload) {
  Matrix<float> m(1, 2);
  m(0, 0) = 1.0f;   // 0x3F800000
  m(0, 1) = -2.0f;  // 0xC0000000
  const auto b = encode_matrix(m);
  const std::string head = "OTPR1 1 2\n";
  ASSERT_EQ(b.size(), head.size() + 8);
  EXPECT_EQ(std::string(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(head.size())), head);
  const Bytes payload(b.begin() + static_cast<std::ptrdiff_t>(head.size()), b.end());
  EXPECT_EQ(payload, (Bytes{0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0}));
}

TEST(MatrixFileTest, RoundTripIsBitIdentical) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix<float> m(rng() % 20, rng() % 20);
    for (float& v : m.values()) v = std::bit_cast<float>(static_cast<std::uint32_t>(rng()) & 0xBF7FFFFFu);
    if (m.size() > 1) {
      m[0] = -0.0f;
      m[1] = std::numeric_limits<float>::denorm_min();
    }
    const auto back = decode_matrix(encode_matrix(m));
    ASSERT_EQ(back.rows(), m.rows());
    ASSERT_EQ(back.cols(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(m[i]));
  }
}

TEST(MatrixFileTest, RejectsMalformedInput) {
  EXPECT_THROW(decode_matrix(bytes_of("")), FormatError);
  EXPECT_THROW(decode_matrix(bytes_of("OTPR1 1 1")), FormatError);  // no newline
  EXPECT_THROW(decode_matrix(bytes_of("OTPR2 0 0\n")), FormatError);
  EXPECT_THROW(decode_matrix(bytes_of("OTPR1 x 0\n")), FormatError);
  EXPECT_THROW(decode_matrix(bytes_of("OTPR1 -1 2\n")), FormatError);
  EXPECT_THROW(decode_matrix(bytes_of("OTPR1 1 1 1\n")), FormatError);
  EXPECT_THROW(decode_matrix(bytes_of("OTPR1 1 1\nabc")), FormatError);
  EXPECT_THROW(decode_matrix(bytes_of("OTPR1 1 1\nabcde")), FormatError);
  EXPECT_NO_THROW(decode_matrix(bytes_of("OTPR1 0 5\n")));
}

TEST(MatrixFileTest, FileRoundTripAndDoubleConversion) {
  Matrix<double> m(3, 2);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.125 * static_cast<double>(i);
  const auto path = (std::filesystem::temp_directory_path() / "otroll_matrix_test.otpr").string();
  save_matrix(path, to_float(m));
  EXPECT_EQ(to_double(load_matrix(path)), m);
  std::filesystem::remove(path);
  EXPECT_THROW(load_matrix(path), Error);
}

}  // namespace
}  // namespace otroll
