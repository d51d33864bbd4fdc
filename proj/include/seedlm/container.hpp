// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seedlm/codec.hpp"

namespace seedlm {

// SDLM1 container layout (all integers little-endian):
//
//   magic   4 bytes  53 44 4C 4D ("SDLM")
//   version 1 byte   0x01
//   K       u8       LFSR length
//   C       u16      block size
//   P       u16      latent dimension
//   count   u32      number of tensors
//   per tensor:
//     name length  u16, then that many UTF-8 bytes
//     rank         u8
//     dims         rank x u64
//     elements     u64
//     payload len  u32, then that many payload bytes
//
// A payload packs one record per block, LSB-first within the bitstream:
// seed (K bits), shared exponent (4 bits, two's complement), then P
// coefficients (4 bits each, two's complement). Blocks are concatenated
// without gaps; the final byte of a tensor's payload is zero-padded.

inline constexpr std::uint8_t kContainerMagic[4] = {0x53, 0x44, 0x4C, 0x4D};
inline constexpr std::uint8_t kContainerVersion = 0x01;

struct NamedTensor {
  std::string name;
  CompressedTensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Container {
  BlockConfig config;
  std::vector<NamedTensor> tensors;
};

/// Exact payload size in bytes for a tensor of `element_count` elements:
/// ceil(block_count * (K + 4 + 4P) / 8).
std::uint64_t encoded_payload_bytes(std::uint64_t element_count, const BlockConfig& config);

/// Bit-packs the blocks of a valid tensor into its canonical payload.
std::vector<std::uint8_t> encode_payload(const CompressedTensor& ct);

/// Inverse of encode_payload. Enforces the exact payload size, nonzero
/// seeds, and zero padding bits; `name` is used in error messages only.
CompressedTensor decode_payload(std::span<const std::uint8_t> bytes, const BlockConfig& config,
                                std::vector<std::uint64_t> shape, std::uint64_t element_count,
                                std::string_view name = {});

void write_container(std::ostream& out, const BlockConfig& config,
                     std::span<const NamedTensor> tensors);
void write_container(const std::filesystem::path& path, const BlockConfig& config,
                     std::span<const NamedTensor> tensors);

Container read_container(std::istream& in);
Container read_container(const std::filesystem::path& path);

/// Raw float32 tensor files: little-endian values, flat row-major, no
/// header. The shape travels out of band.
void write_plain_tensor(const std::filesystem::path& path, std::span<const float> data);
std::vector<float> read_plain_tensor(const std::filesystem::path& path,
                                     std::span<const std::uint64_t> shape);

}  // namespace seedlm
