// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "seedlm/errors.hpp"

namespace seedlm {

/// Fibonacci-configuration linear feedback shift register.
///
/// A state is a k-bit unsigned integer. Bit k-1 (most significant) holds the
/// newest sequence bit, bit 0 the oldest. One step shifts every bit right by
/// one position and inserts the XOR of the bits selected by `taps` at the
/// top. With the standard tap sets this visits all 2^k - 1 nonzero states
/// before repeating; the all-zero state is absorbing.
class LfsrSpec {
 public:
  static constexpr int kMinLength = 2;
  static constexpr int kMaxLength = 24;

  /// Builds a spec with explicit taps. Tap indices must lie in [0, k-1];
  /// maximality is *not* checked here (CycleCache verifies the period).
  LfsrSpec(int length, std::vector<int> taps);

  /// The hard-wired tap set for register length `length` (2..24). These are
  /// primitive-polynomial taps; every row is period-verified by the tests.
  static LfsrSpec standard(int length);
  static bool has_standard(int length) noexcept;

  int length() const noexcept { return k_; }
  const std::vector<int>& taps() const noexcept { return taps_; }
  std::uint32_t tap_mask() const noexcept { return mask_; }
  /// Largest valid state, 2^k - 1. Also the period of a maximal sequence.
  std::uint32_t max_state() const noexcept { return (std::uint32_t{1} << k_) - 1u; }

  friend bool operator==(const LfsrSpec& a, const LfsrSpec& b) {
    return a.k_ == b.k_ && a.mask_ == b.mask_;
  }

 private:
  int k_;
  std::vector<int> taps_;
  std::uint32_t mask_;
};

/// One LFSR step. Total on k-bit integers; next_state(0) == 0.
inline std::uint32_t next_state(const LfsrSpec& spec, std::uint32_t state) noexcept {
  const std::uint32_t bit = static_cast<std::uint32_t>(std::popcount(state & spec.tap_mask())) & 1u;
  return (state >> 1) | (bit << (spec.length() - 1));
}

/// Precomputed full cycle of a maximal-length LFSR.
///
/// Construction walks the cycle once, records the successor of every nonzero
/// state, and fails if the period is not exactly 2^k - 1 (a wrong tap set).
/// Immutable afterwards; concurrent reads are safe.
class CycleCache {
 public:
  explicit CycleCache(LfsrSpec spec);

  const LfsrSpec& spec() const noexcept { return spec_; }
  /// Cycle length, 2^k - 1.
  std::uint32_t period() const noexcept { return static_cast<std::uint32_t>(order_.size()); }

  /// Successor of `state`; successor(0) == 0.
  std::uint32_t successor(std::uint32_t state) const { return succ_[state]; }

  /// States in cycle order, starting from state 1.
  std::span<const std::uint32_t> order() const noexcept { return order_; }

  /// Index of a nonzero state within order().
  std::uint32_t position(std::uint32_t state) const { return pos_[state]; }

 private:
  LfsrSpec spec_;
  std::vector<std::uint32_t> succ_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> pos_;
};

using MatrixXu32 = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic>;

/// The rows x cols matrix of raw LFSR states that follow `seed` (the seed
/// itself excluded), filled row-major and wrapping around the cycle when
/// rows*cols exceeds the period. Rejects seed outside [1, 2^k - 1].
MatrixXu32 raw_matrix(const CycleCache& cache, std::uint32_t seed, Eigen::Index rows,
                      Eigen::Index cols);

/// Maps a raw state v to (v - 2^{k-1}) / (2^{k-1} - 1), the affine rescale
/// that sends [1, 2^k - 1] into [-1, 1] with 2^{k-1} at zero.
template <typename Scalar = double>
Scalar normalized_state(int k, std::uint32_t state) {
  const Scalar mid = static_cast<Scalar>(std::uint32_t{1} << (k - 1));
  return (static_cast<Scalar>(state) - mid) / (mid - Scalar{1});
}

/// Normalized pseudo-random basis matrix U(seed); see raw_matrix for layout.
template <typename Scalar = double>
Eigen::MatrixX<Scalar> normalized_matrix(const CycleCache& cache, std::uint32_t seed,
                                         Eigen::Index rows, Eigen::Index cols) {
  const MatrixXu32 v = raw_matrix(cache, seed, rows, cols);
  const int k = cache.spec().length();
  const Scalar mid = static_cast<Scalar>(std::uint32_t{1} << (k - 1));
  return ((v.template cast<Scalar>().array() - mid) / (mid - Scalar{1})).matrix();
}

}  // namespace seedlm
