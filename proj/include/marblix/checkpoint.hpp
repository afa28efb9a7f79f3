#pragma once

#include "marblix/nn.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

namespace marblix {

// Model checkpoint, format version 1:
//   magic "MBLX", u32 version, u32 layer count,
//   per layer: u32 in_dim, u32 out_dim, u32 activation tag,
//   then per layer: weights as little-endian float32 row-major, then bias.

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw ParseError("checkpoint " + path + ": truncated");
  }
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline float read_f32(std::istream& in, const std::string& path) {
  std::uint32_t bits = read_u32(in, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const Mlp<Scalar>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write("MBLX", 4);
  detail::write_u32(out, 1u);
  detail::write_u32(out, static_cast<std::uint32_t>(model.layer_count()));
  for (const auto& layer : model.layers()) {
    detail::write_u32(out, static_cast<std::uint32_t>(layer.in_dim()));
    detail::write_u32(out, static_cast<std::uint32_t>(layer.out_dim()));
    detail::write_u32(out, static_cast<std::uint32_t>(layer.activation));
  }
  for (const auto& layer : model.layers()) {
    for (Index i = 0; i < layer.out_dim(); ++i) {
      for (Index j = 0; j < layer.in_dim(); ++j) {
        detail::write_f32(out, static_cast<float>(layer.weights(i, j)));
      }
    }
    for (Index i = 0; i < layer.out_dim(); ++i) {
      detail::write_f32(out, static_cast<float>(layer.bias[i]));
    }
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

template <typename Scalar>
Mlp<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MBLX", 4) != 0) {
    throw ParseError("checkpoint " + path + ": bad magic bytes");
  }
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != 1u) {
    throw ParseError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t layer_count = detail::read_u32(in, path);
  Mlp<Scalar> model;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const std::uint32_t in_dim = detail::read_u32(in, path);
    const std::uint32_t out_dim = detail::read_u32(in, path);
    const std::uint32_t act = detail::read_u32(in, path);
    if (act > 2u) {
      throw ParseError("checkpoint " + path + ": unknown activation tag " + std::to_string(act));
    }
    model.add_layer(static_cast<Index>(in_dim), static_cast<Index>(out_dim),
                    static_cast<Activation>(act));
  }
  for (auto& layer : model.layers()) {
    for (Index i = 0; i < layer.out_dim(); ++i) {
      for (Index j = 0; j < layer.in_dim(); ++j) {
        layer.weights(i, j) = static_cast<Scalar>(detail::read_f32(in, path));
      }
    }
    for (Index i = 0; i < layer.out_dim(); ++i) {
      layer.bias[i] = static_cast<Scalar>(detail::read_f32(in, path));
    }
  }
  in.peek();
  if (!in.eof()) throw ParseError("checkpoint " + path + ": trailing bytes");
  return model;
}

}  // namespace marblix
