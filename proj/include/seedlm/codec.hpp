// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seedlm/errors.hpp"
#include "seedlm/lfsr.hpp"

namespace seedlm {

/// Block geometry: C weights are approximated by P coefficients on a basis
/// drawn from a K-bit LFSR. The stored bits per block are K + 4 + 4P (seed,
/// shared exponent, coefficients), so the bit budget per element is
/// (K + 4 + 4P) / C.
struct BlockConfig {
  int c = 0;  ///< block size
  int p = 0;  ///< latent dimension
  int k = 0;  ///< LFSR register length

  int payload_bits_per_block() const noexcept { return k + 4 + 4 * p; }
  double bits_per_element() const noexcept {
    return static_cast<double>(payload_bits_per_block()) / static_cast<double>(c);
  }
  std::uint32_t seed_count() const noexcept { return (std::uint32_t{1} << k) - 1u; }

  /// Canonical presets: 3 bits/element -> (C=12, P=4, K=16),
  /// 4 bits/element -> (C=8, P=3, K=16).
  static BlockConfig preset_for_bits(int bits);

  /// Throws Error(invalid_config) unless 1 <= P < C and K has a standard
  /// tap set.
  void validate() const;

  friend bool operator==(const BlockConfig&, const BlockConfig&) = default;
};

/// P signed 4-bit mantissas with one shared power-of-two exponent. Element i
/// decodes to q[i] * 2^e.
struct QuantizedCoefficients {
  static constexpr int kMinMantissa = -8;
  static constexpr int kMaxMantissa = 7;
  static constexpr int kMinExponent = -8;
  static constexpr int kMaxExponent = 7;

  Eigen::Matrix<std::int8_t, Eigen::Dynamic, 1> q;
  std::int8_t e = kMinExponent;

  friend bool operator==(const QuantizedCoefficients& a, const QuantizedCoefficients& b) {
    return a.e == b.e && a.q.size() == b.q.size() && (a.q.array() == b.q.array()).all();
  }
};

/// How the shared exponent is chosen.
///  - kSearch: try every e in [-8, 7] and keep the one minimizing the
///    squared round-trip error. Never worse than the literal rule.
///  - kMaxFloorLog2: e = max_i floor(log2 |t_i|), clamped to [-8, 7].
enum class ExponentRule { kSearch, kMaxFloorLog2 };

/// Quantizes t elementwise as q_i = clamp(round(t_i / 2^e), -8, 7) with a
/// shared e per ExponentRule. Rounding is half-to-even. An all-zero input
/// yields q = 0, e = -8. Rejects non-finite input.
QuantizedCoefficients quantize_coefficients(Eigen::Ref<const Eigen::VectorXd> t,
                                            ExponentRule rule = ExponentRule::kSearch);

/// Exact dyadic decode: element i is q[i] * 2^e, no rounding.
template <typename Scalar = double>
Eigen::VectorX<Scalar> dequantize(const QuantizedCoefficients& coeffs) {
  Eigen::VectorX<Scalar> out(coeffs.q.size());
  for (Eigen::Index i = 0; i < coeffs.q.size(); ++i) {
    out[i] = static_cast<Scalar>(std::ldexp(static_cast<double>(coeffs.q[i]), coeffs.e));
  }
  return out;
}

/// One compressed weight block: the winning seed and its coefficients.
struct CompressedBlock {
  std::uint32_t seed = 0;
  QuantizedCoefficients coeffs;

  friend bool operator==(const CompressedBlock&, const CompressedBlock&) = default;
};

/// A compressed tensor: shape metadata plus one block per C contiguous
/// elements of the flattened data. The final block may cover fewer than C
/// real elements; tail_length records how many (in [1, C]).
struct CompressedTensor {
  BlockConfig config;
  std::vector<std::uint64_t> shape;
  std::uint64_t element_count = 0;
  std::uint32_t tail_length = 0;
  std::vector<CompressedBlock> blocks;

  std::uint64_t block_count() const noexcept {
    return (element_count + config.c - 1) / static_cast<std::uint64_t>(config.c);
  }
  /// Structural validation; throws Error on any violated invariant.
  void validate() const;

  friend bool operator==(const CompressedTensor&, const CompressedTensor&) = default;
};

/// Least-squares operators U(s)^+ (P x C) for every candidate seed of one
/// block configuration, plus the normalized cycle values needed to
/// materialize U(s) without walking the successor table.
///
/// Candidates are the seeds {1, 1+stride, 1+2*stride, ...} up to 2^K - 1;
/// stride 1 covers every seed. Operators are computed by SVD in double
/// precision; singular values below 1e-10 of the largest are treated as
/// zero, so rank-deficient bases get the minimum-norm operator.
class PseudoInverseCache {
 public:
  PseudoInverseCache(const BlockConfig& config, const CycleCache& cache,
                     std::uint32_t seed_stride = 1);

  const BlockConfig& config() const noexcept { return config_; }
  std::uint32_t seed_stride() const noexcept { return stride_; }
  std::size_t candidate_count() const noexcept { return count_; }
  std::uint32_t candidate_seed(std::size_t i) const {
    return 1u + stride_ * static_cast<std::uint32_t>(i);
  }
  bool covers(std::uint32_t seed) const noexcept {
    return seed >= 1 && seed <= max_seed_ && (seed - 1u) % stride_ == 0u;
  }

  using OperatorView = Eigen::Block<const Eigen::MatrixXd, Eigen::Dynamic, Eigen::Dynamic, true>;

  /// The P x C operator for `seed`; throws if the seed is not a candidate.
  OperatorView operator_for(std::uint32_t seed) const;

  /// Normalized cycle values in cycle order (starting at state 1), tiled
  /// past the period by C*P entries so any basis window reads contiguously.
  std::span<const double> basis_sequence() const noexcept { return seq_; }

  /// Basis U(seed) as a view into basis_sequence(); row-major C x P.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  basis_for(std::uint32_t seed, const CycleCache& cache) const;

 private:
  friend BlockCompression compress_block(Eigen::Ref<const Eigen::VectorXd>,
                                         const PseudoInverseCache&, const CycleCache&,
                                         std::span<const std::uint32_t>, ExponentRule);
  BlockConfig config_;
  std::uint32_t stride_;
  std::uint32_t max_seed_;
  std::size_t count_;
  Eigen::MatrixXd ops_;      // P x (C * count), column block per candidate
  std::vector<double> seq_;  // period + C*P normalized values
};

/// Compresses one block: for every candidate seed, project w onto U(s),
/// quantize the coefficients, measure the squared reconstruction error, and
/// keep the best pair. Ties go to the smallest seed. `candidates` restricts
/// the search (must be covered by `pinv`); empty means every pinv candidate.
BlockCompression compress_block(Eigen::Ref<const Eigen::VectorXd> w,
                                const PseudoInverseCache& pinv, const CycleCache& cache,
                                std::span<const std::uint32_t> candidates = {},
                                ExponentRule rule = ExponentRule::kSearch);

/// U(seed) * dequantize(coeffs). Deterministic; rejects out-of-range seeds.
template <typename Scalar = double>
Eigen::VectorX<Scalar> reconstruct_block(const CompressedBlock& block, const BlockConfig& config,
                                         const CycleCache& cache);

/// Per-tensor compression quality summary. Errors compare the original
/// elements with the float32 reconstruction the decoder will produce;
/// padding positions of the tail block are not counted.
struct ReconstructionStats {
  std::vector<double> block_errors;  ///< chosen squared error per block
  double total_squared_error = 0.0;
  double input_squared_norm = 0.0;
  double mse = 0.0;
  double relative_error = 0.0;  ///< total_squared_error / input_squared_norm
  std::map<std::uint32_t, std::uint32_t> seed_histogram;
};

struct TensorCompression {
  CompressedTensor tensor;
  ReconstructionStats stats;
};

/// Splits flat row-major data into ceil(n/C) contiguous blocks (the last one
/// zero-padded), compresses each independently, and gathers stats. The
/// result is bit-identical for any thread count. Rejects empty tensors,
/// shape/data size disagreement, and non-finite values.
TensorCompression compress_tensor(std::span<const float> data, std::vector<std::uint64_t> shape,
                                  const PseudoInverseCache& pinv, const CycleCache& cache,
                                  int threads = 0, ExponentRule rule = ExponentRule::kSearch);

/// Inverse of compress_tensor: concatenated float32 block reconstructions
/// with the tail padding dropped. Rejects corrupted blocks (seed 0 or out of
/// range), reporting the block index.
std::vector<float> decompress_tensor(const CompressedTensor& ct, const CycleCache& cache,
                                     int threads = 0);

template <typename Scalar>
Eigen::VectorX<Scalar> reconstruct_block(const CompressedBlock& block, const BlockConfig& config,
                                         const CycleCache& cache) {
  if (block.seed == 0 || block.seed > cache.spec().max_state()) {
    raise(errc::bad_format, "block seed " + std::to_string(block.seed) +
                                " out of range [1, " + std::to_string(cache.spec().max_state()) +
                                "]");
  }
  const Eigen::MatrixXd u = normalized_matrix<double>(cache, block.seed, config.c, config.p);
  const Eigen::VectorXd t = dequantize<double>(block.coeffs);
  return (u * t).cast<Scalar>();
}

}  // namespace seedlm
