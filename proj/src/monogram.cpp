#include "marblix/monogram.hpp"

namespace marblix {

std::string code_to_hex(std::uint64_t bits) {
  static const char* digits = "0123456789ABCDEF";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[bits & 0xF];
    bits >>= 4;
  }
  return out;
}

std::uint64_t hex_to_code(const std::string& hex) {
  if (hex.size() != 16) {
    throw ParseError("monogram code '" + hex + "' must be 16 hex characters");
  }
  std::uint64_t bits = 0;
  for (char c : hex) {
    int digit;
    if (c >= '0' && c <= '9') {
      digit = c - '0';
    } else if (c >= 'A' && c <= 'F') {
      digit = c - 'A' + 10;
    } else if (c >= 'a' && c <= 'f') {
      digit = c - 'a' + 10;
    } else {
      throw ParseError("monogram code '" + hex + "' contains a non-hex character");
    }
    bits = (bits << 4) | static_cast<std::uint64_t>(digit);
  }
  return bits;
}

}  // namespace marblix
