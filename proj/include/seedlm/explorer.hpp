// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seedlm/codec.hpp"

namespace seedlm {

/// Measured reconstruction quality of one block configuration on
/// standard-Gaussian blocks.
struct DesignPoint {
  BlockConfig config;
  std::uint64_t trials = 0;
  double mean_relative_error = 0.0;  ///< mean of eps / ||w||^2 over trials
  double std_error = 0.0;            ///< sample std deviation / sqrt(trials)
};

/// All (C, P, K) with K + 4 + 4P == bits_per_element * C, 1 <= P < C and
/// 2 <= K <= max_k, ordered by (C, P). Returns empty when nothing fits.
std::vector<BlockConfig> enumerate_configs(double bits_per_element, int max_c, int max_k);

struct EvaluationOptions {
  std::uint64_t trials = 1000;
  std::uint64_t rng_seed = 0;
  int threads = 0;               ///< 0 = hardware concurrency
  std::uint32_t seed_stride = 0; ///< 0 = exhaustive for K <= 16, else 2^(K-16)
  ExponentRule rule = ExponentRule::kSearch;
};

/// Stride used when seed_stride is left at 0: exhaustive search up to
/// K = 16, a fixed power-of-two subsample (2^(K-16)) beyond that.
std::uint32_t default_seed_stride(int k);

/// Deterministic standard-Gaussian block: trial index and rng seed fully
/// determine the draw (Box-Muller over splitmix-seeded mt19937_64).
Eigen::VectorXf gaussian_block(std::uint64_t rng_seed, std::uint64_t trial, int c);

using BlockSampler = std::function<Eigen::VectorXf(std::uint64_t trial, int c)>;

DesignPoint evaluate_config(const BlockConfig& config, const EvaluationOptions& opts);
DesignPoint evaluate_config(const BlockConfig& config, const EvaluationOptions& opts,
                            const BlockSampler& sampler);

/// Evaluates every feasible configuration on a common rng seed schedule and
/// ranks ascending by mean relative error (ties by C, P, K).
std::vector<DesignPoint> search_designs(double bits_per_element, int max_c, int max_k,
                                        const EvaluationOptions& opts);

/// CSV table "C,P,K,M,trials,mean_rel_err,std_err" with one row per point.
std::string ranking_to_csv(std::span<const DesignPoint> points);

}  // namespace seedlm
