// SPDX-License-Identifier: Apache-2.0
#include "seedlm/lfsr.hpp"

#include <array>
#include <string>
#include <utility>

namespace seedlm {

namespace {

// Tap index sets giving a maximal-length sequence for each register length.
// Index j means state bit j feeds the XOR (bit 0 = oldest bit).
struct TapRow {
  int count;
  std::array<int, 4> taps;
};

constexpr std::array<TapRow, LfsrSpec::kMaxLength + 1> kStandardTaps = {{
    {0, {}},               // 0 (unused)
    {0, {}},               // 1 (unused)
    {2, {0, 1}},           // 2
    {2, {0, 1}},           // 3
    {2, {0, 1}},           // 4
    {2, {0, 2}},           // 5
    {2, {0, 1}},           // 6
    {2, {0, 1}},           // 7
    {4, {0, 2, 3, 4}},     // 8
    {2, {0, 4}},           // 9
    {2, {0, 3}},           // 10
    {2, {0, 2}},           // 11
    {4, {0, 1, 2, 8}},     // 12
    {4, {0, 1, 2, 5}},     // 13
    {4, {0, 1, 2, 12}},    // 14
    {2, {0, 1}},           // 15
    {4, {0, 1, 3, 12}},    // 16
    {2, {0, 3}},           // 17
    {2, {0, 7}},           // 18
    {4, {0, 1, 2, 5}},     // 19
    {2, {0, 3}},           // 20
    {2, {0, 2}},           // 21
    {2, {0, 1}},           // 22
    {2, {0, 5}},           // 23
    {4, {0, 1, 2, 7}},     // 24
}};

}  // namespace

LfsrSpec::LfsrSpec(int length, std::vector<int> taps) : k_(length), taps_(std::move(taps)), mask_(0) {
  if (k_ < kMinLength || k_ > kMaxLength) {
    raise(errc::invalid_config,
          "LFSR length " + std::to_string(k_) + " outside [" + std::to_string(kMinLength) + ", " +
              std::to_string(kMaxLength) + "]");
  }
  if (taps_.empty()) {
    raise(errc::invalid_config, "LFSR tap set must not be empty");
  }
  for (int j : taps_) {
    if (j < 0 || j >= k_) {
      raise(errc::invalid_config,
            "tap index " + std::to_string(j) + " outside [0, " + std::to_string(k_ - 1) + "]");
    }
    mask_ |= (std::uint32_t{1} << j);
  }
}

bool LfsrSpec::has_standard(int length) noexcept {
  return length >= kMinLength && length <= kMaxLength;
}

LfsrSpec LfsrSpec::standard(int length) {
  if (!has_standard(length)) {
    raise(errc::invalid_config,
          "no standard tap set for LFSR length " + std::to_string(length));
  }
  const TapRow& row = kStandardTaps[static_cast<std::size_t>(length)];
  return LfsrSpec(length, std::vector<int>(row.taps.begin(), row.taps.begin() + row.count));
}

CycleCache::CycleCache(LfsrSpec spec) : spec_(std::move(spec)) {
  const std::uint32_t period = spec_.max_state();
  const std::size_t table = std::size_t{period} + 1;
  succ_.assign(table, 0);
  pos_.assign(table, 0);
  order_.reserve(period);

  std::uint32_t state = 1;
  for (std::uint32_t step = 0; step < period; ++step) {
    order_.push_back(state);
    pos_[state] = step;
    const std::uint32_t next = next_state(spec_, state);
    succ_[state] = next;
    state = next;
    if (state == 1 && step + 1 < period) {
      raise(errc::invalid_config,
            "tap set is not maximal length: cycle closed after " + std::to_string(step + 1) +
                " states, expected " + std::to_string(period));
    }
  }
  if (state != 1) {
    // The walk left the starting state's cycle without returning: some state
    // repeated, so the sequence cannot be maximal.
    raise(errc::invalid_config,
          "tap set is not maximal length: walk from state 1 did not return after " +
              std::to_string(period) + " steps");
  }
}

MatrixXu32 raw_matrix(const CycleCache& cache, std::uint32_t seed, Eigen::Index rows,
                      Eigen::Index cols) {
  if (seed == 0 || seed > cache.spec().max_state()) {
    raise(errc::invalid_config, "seed " + std::to_string(seed) + " outside [1, " +
                                    std::to_string(cache.spec().max_state()) + "]");
  }
  if (rows <= 0 || cols <= 0) {
    raise(errc::invalid_config, "matrix dimensions must be positive");
  }
  MatrixXu32 out(rows, cols);
  std::uint32_t state = seed;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      state = cache.successor(state);
      out(r, c) = state;
    }
  }
  return out;
}

}  // namespace seedlm
