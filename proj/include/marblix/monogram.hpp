#pragma once

#include "marblix/common.hpp"

#include <cstdint>
#include <string>

namespace marblix {

inline constexpr int kMonogramSide = 8;
inline constexpr int kCodeBits = kMonogramSide * kMonogramSide;  // 64

// An 8x8 binary patient code packed into one 64-bit word (bit index
// row * 8 + col, bit 0 least significant) together with the real-valued
// tanh output it was thresholded from.
struct Monogram {
  std::uint64_t bits = 0;
  VectorXr real_code;

  int bit(int row, int col) const {
    return static_cast<int>((bits >> (row * kMonogramSide + col)) & 1u);
  }
};

// bit i = 1 iff real_code[i] > threshold. The default threshold 0 splits
// tanh's (-1, 1) range; exact zeros map to 0.
template <typename Scalar>
std::uint64_t binarize(const VectorX<Scalar>& real_code, double threshold = 0.0) {
  if (real_code.size() != kCodeBits) {
    throw DimensionError("binarize: code has " + std::to_string(real_code.size()) +
                         " entries, expected " + std::to_string(kCodeBits));
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < kCodeBits; ++i) {
    if (static_cast<double>(real_code[i]) > threshold) bits |= std::uint64_t(1) << i;
  }
  return bits;
}

// 16 uppercase hex characters; bit 0 of the code is the least significant
// bit of the parsed integer.
std::string code_to_hex(std::uint64_t bits);
std::uint64_t hex_to_code(const std::string& hex);

}  // namespace marblix
