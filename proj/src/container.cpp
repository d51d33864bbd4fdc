// SPDX-License-Identifier: Apache-2.0
#include "seedlm/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace seedlm {

namespace {

std::string tensor_label(std::string_view name) {
  return name.empty() ? std::string("tensor") : "tensor '" + std::string(name) + "'";
}

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void write(std::uint32_t value, int bits) {
    acc_ |= static_cast<std::uint64_t>(value & mask(bits)) << filled_;
    filled_ += bits;
    while (filled_ >= 8) {
      out_.push_back(static_cast<std::uint8_t>(acc_ & 0xFFu));
      acc_ >>= 8;
      filled_ -= 8;
    }
  }

  void pad_to_byte() {
    if (filled_ > 0) {
      out_.push_back(static_cast<std::uint8_t>(acc_ & 0xFFu));
      acc_ = 0;
      filled_ = 0;
    }
  }

 private:
  static std::uint32_t mask(int bits) {
    return bits >= 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << bits) - 1u;
  }
  std::vector<std::uint8_t>& out_;
  std::uint64_t acc_ = 0;
  int filled_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t read(int bits) {
    std::uint32_t value = 0;
    for (int i = 0; i < bits; ++i) {
      const std::size_t bit = pos_ + i;
      const std::uint32_t b = (bytes_[bit >> 3] >> (bit & 7)) & 1u;
      value |= b << i;
    }
    pos_ += bits;
    return value;
  }

  std::size_t bit_position() const { return pos_; }

  bool padding_is_zero() const {
    for (std::size_t bit = pos_; bit < bytes_.size() * 8; ++bit) {
      if ((bytes_[bit >> 3] >> (bit & 7)) & 1u) return false;
    }
    return true;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::int32_t sign_extend4(std::uint32_t v) {
  return static_cast<std::int32_t>(v << 28) >> 28;
}

// Little-endian scalar I/O. Reads throw bad_format naming the context so a
// short file surfaces as a truncation error, not a silent zero.
void put_bytes(std::ostream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint8_t buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu);
  }
  put_bytes(out, buf, sizeof(T));
}

void get_bytes(std::istream& in, void* data, std::size_t size, const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) {
    raise(errc::bad_format, "truncated container: " + what);
  }
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
  std::uint8_t buf[sizeof(T)];
  get_bytes(in, buf, sizeof(T), what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::uint64_t encoded_payload_bytes(std::uint64_t element_count, const BlockConfig& config) {
  config.validate();
  if (element_count == 0) raise(errc::shape_mismatch, "tensor has no elements");
  const std::uint64_t blocks =
      (element_count + static_cast<std::uint64_t>(config.c) - 1) / config.c;
  const std::uint64_t bits = blocks * static_cast<std::uint64_t>(config.payload_bits_per_block());
  return (bits + 7) / 8;
}

std::vector<std::uint8_t> encode_payload(const CompressedTensor& ct) {
  ct.validate();
  std::vector<std::uint8_t> out;
  out.reserve(encoded_payload_bytes(ct.element_count, ct.config));
  BitWriter writer(out);
  for (const CompressedBlock& block : ct.blocks) {
    writer.write(block.seed, ct.config.k);
    writer.write(static_cast<std::uint32_t>(block.coeffs.e), 4);
    for (Eigen::Index i = 0; i < block.coeffs.q.size(); ++i) {
      writer.write(static_cast<std::uint32_t>(block.coeffs.q[i]), 4);
    }
  }
  writer.pad_to_byte();
  return out;
}

CompressedTensor decode_payload(std::span<const std::uint8_t> bytes, const BlockConfig& config,
                                std::vector<std::uint64_t> shape, std::uint64_t element_count,
                                std::string_view name) {
  config.validate();
  CompressedTensor ct;
  ct.config = config;
  ct.shape = std::move(shape);
  ct.element_count = element_count;

  const std::uint64_t expect = encoded_payload_bytes(element_count, config);
  if (bytes.size() != expect) {
    raise(errc::bad_format, tensor_label(name) + ": payload is " + std::to_string(bytes.size()) +
                                " bytes, expected " + std::to_string(expect));
  }
  const std::uint64_t nblocks = ct.block_count();
  ct.tail_length =
      static_cast<std::uint32_t>(element_count - static_cast<std::uint64_t>(config.c) * (nblocks - 1));
  ct.blocks.reserve(nblocks);

  BitReader reader(bytes);
  for (std::uint64_t b = 0; b < nblocks; ++b) {
    CompressedBlock block;
    block.seed = reader.read(config.k);
    if (block.seed == 0) {
      raise(errc::bad_format,
            tensor_label(name) + ": zero seed in block " + std::to_string(b));
    }
    block.coeffs.e = static_cast<std::int8_t>(sign_extend4(reader.read(4)));
    block.coeffs.q.resize(config.p);
    for (int i = 0; i < config.p; ++i) {
      block.coeffs.q[i] = static_cast<std::int8_t>(sign_extend4(reader.read(4)));
    }
    ct.blocks.push_back(std::move(block));
  }
  if (!reader.padding_is_zero()) {
    raise(errc::bad_format, tensor_label(name) + ": nonzero padding bits");
  }
  ct.validate();
  return ct;
}

void write_container(std::ostream& out, const BlockConfig& config,
                     std::span<const NamedTensor> tensors) {
  config.validate();
  if (tensors.size() > std::numeric_limits<std::uint32_t>::max()) {
    raise(errc::invalid_config, "too many tensors for one container");
  }
  put_bytes(out, kContainerMagic, sizeof(kContainerMagic));
  put_le<std::uint8_t>(out, kContainerVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(config.k));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(config.c));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(config.p));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));

  for (const NamedTensor& nt : tensors) {
    if (!(nt.tensor.config == config)) {
      raise(errc::invalid_config,
            tensor_label(nt.name) + " does not use the container's block config");
    }
    const std::vector<std::uint8_t> payload = encode_payload(nt.tensor);
    if (nt.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      raise(errc::invalid_config, "tensor name too long");
    }
    if (nt.tensor.shape.size() > std::numeric_limits<std::uint8_t>::max()) {
      raise(errc::invalid_config, "tensor rank too large");
    }
    if (payload.size() > std::numeric_limits<std::uint32_t>::max()) {
      raise(errc::invalid_config, "tensor payload too large for the format");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(nt.name.size()));
    put_bytes(out, nt.name.data(), nt.name.size());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(nt.tensor.shape.size()));
    for (std::uint64_t d : nt.tensor.shape) put_le<std::uint64_t>(out, d);
    put_le<std::uint64_t>(out, nt.tensor.element_count);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
    put_bytes(out, payload.data(), payload.size());
  }
  if (!out) raise(errc::io, "failed writing container stream");
}

void write_container(const std::filesystem::path& path, const BlockConfig& config,
                     std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(errc::io, "cannot open '" + path.string() + "' for writing");
  write_container(out, config, tensors);
  out.flush();
  if (!out) raise(errc::io, "failed writing '" + path.string() + "'");
}

Container read_container(std::istream& in) {
  std::uint8_t magic[4];
  get_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kContainerMagic, sizeof(magic)) != 0) {
    raise(errc::bad_format, "bad magic: not an SDLM1 container");
  }
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kContainerVersion) {
    raise(errc::bad_format, "unsupported container version " + std::to_string(version));
  }
  Container container;
  container.config.k = get_le<std::uint8_t>(in, "header K");
  container.config.c = get_le<std::uint16_t>(in, "header C");
  container.config.p = get_le<std::uint16_t>(in, "header P");
  try {
    container.config.validate();
  } catch (const Error& e) {
    raise(errc::bad_format, std::string("invalid header config: ") + e.what());
  }
  const auto count = get_le<std::uint32_t>(in, "tensor count");

  container.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto name_len = get_le<std::uint16_t>(in, "name length");
    nt.name.resize(name_len);
    if (name_len > 0) get_bytes(in, nt.name.data(), name_len, "tensor name");

    const auto rank = get_le<std::uint8_t>(in, tensor_label(nt.name) + " rank");
    if (rank == 0) raise(errc::bad_format, tensor_label(nt.name) + ": rank must be positive");
    std::vector<std::uint64_t> shape(rank);
    std::uint64_t product = 1;
    for (int d = 0; d < rank; ++d) {
      shape[d] = get_le<std::uint64_t>(in, tensor_label(nt.name) + " dims");
      if (shape[d] == 0) {
        raise(errc::bad_format, tensor_label(nt.name) + ": zero dimension");
      }
      product *= shape[d];
    }
    const auto elements = get_le<std::uint64_t>(in, tensor_label(nt.name) + " element count");
    if (product != elements) {
      raise(errc::bad_format, tensor_label(nt.name) + ": dims product " +
                                  std::to_string(product) + " != element count " +
                                  std::to_string(elements));
    }
    const auto payload_len = get_le<std::uint32_t>(in, tensor_label(nt.name) + " payload length");
    const std::uint64_t expect = encoded_payload_bytes(elements, container.config);
    if (payload_len != expect) {
      raise(errc::bad_format, tensor_label(nt.name) + ": payload length " +
                                  std::to_string(payload_len) + " != expected " +
                                  std::to_string(expect));
    }
    std::vector<std::uint8_t> payload(payload_len);
    get_bytes(in, payload.data(), payload.size(), tensor_label(nt.name) + " payload");
    nt.tensor = decode_payload(payload, container.config, std::move(shape), elements, nt.name);
    container.tensors.push_back(std::move(nt));
  }
  return container;
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::io, "cannot open '" + path.string() + "' for reading");
  return read_container(in);
}

void write_plain_tensor(const std::filesystem::path& path, std::span<const float> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(errc::io, "cannot open '" + path.string() + "' for writing");
  for (float f : data) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    put_le<std::uint32_t>(out, bits);
  }
  out.flush();
  if (!out) raise(errc::io, "failed writing '" + path.string() + "'");
}

std::vector<float> read_plain_tensor(const std::filesystem::path& path,
                                     std::span<const std::uint64_t> shape) {
  if (shape.empty()) raise(errc::shape_mismatch, "tensor shape is empty");
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d == 0) raise(errc::shape_mismatch, "tensor shape has a zero dimension");
    n *= d;
  }
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) raise(errc::io, "cannot stat '" + path.string() + "': " + ec.message());
  if (size != n * 4) {
    raise(errc::shape_mismatch, "'" + path.string() + "' is " + std::to_string(size) +
                                    " bytes but the declared shape needs " +
                                    std::to_string(n * 4));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::io, "cannot open '" + path.string() + "' for reading");
  std::vector<float> data(n);
  std::vector<std::uint8_t> buf(n * 4);
  get_bytes(in, buf.data(), buf.size(), "tensor data");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
    }
    data[i] = std::bit_cast<float>(bits);
  }
  return data;
}

}  // namespace seedlm
