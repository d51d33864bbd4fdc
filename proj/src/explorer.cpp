// SPDX-License-Identifier: Apache-2.0
#include "seedlm/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "seedlm/detail/parallel.hpp"
#include "seedlm/lfsr.hpp"

namespace seedlm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<BlockConfig> enumerate_configs(double bits_per_element, int max_c, int max_k) {
  if (bits_per_element <= 0.0) {
    raise(errc::invalid_config, "bits per element must be positive");
  }
  if (max_k > LfsrSpec::kMaxLength) {
    raise(errc::invalid_config,
          "max K exceeds the tap table bound " + std::to_string(LfsrSpec::kMaxLength));
  }
  std::vector<BlockConfig> out;
  for (int c = 1; c <= max_c; ++c) {
    const double budget = bits_per_element * c;
    const double rounded = std::round(budget);
    if (std::abs(budget - rounded) > 1e-9) continue;  // M*C must be an integer bit count
    const int total_bits = static_cast<int>(rounded);
    for (int p = 1; p < c; ++p) {
      const int k = total_bits - 4 - 4 * p;
      if (k >= LfsrSpec::kMinLength && k <= max_k) {
        out.push_back(BlockConfig{c, p, k});
      }
    }
  }
  return out;
}

std::uint32_t default_seed_stride(int k) {
  return k <= 16 ? 1u : (std::uint32_t{1} << (k - 16));
}

Eigen::VectorXf gaussian_block(std::uint64_t rng_seed, std::uint64_t trial, int c) {
  std::mt19937_64 eng(splitmix64(rng_seed ^ splitmix64(trial)));
  const auto uniform = [&eng](bool open_at_zero) {
    // 53-bit mantissa; open_at_zero shifts into (0, 1] for the log.
    const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    return open_at_zero ? 1.0 - u : u;
  };
  Eigen::VectorXf out(c);
  for (int i = 0; i < c; i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform(true)));
    const double phi = 2.0 * std::numbers::pi * uniform(false);
    out[i] = static_cast<float>(r * std::cos(phi));
    if (i + 1 < c) out[i + 1] = static_cast<float>(r * std::sin(phi));
  }
  return out;
}

DesignPoint evaluate_config(const BlockConfig& config, const EvaluationOptions& opts) {
  const std::uint64_t rng_seed = opts.rng_seed;
  return evaluate_config(config, opts, [rng_seed](std::uint64_t trial, int c) {
    return gaussian_block(rng_seed, trial, c);
  });
}

DesignPoint evaluate_config(const BlockConfig& config, const EvaluationOptions& opts,
                            const BlockSampler& sampler) {
  config.validate();
  if (opts.trials == 0) raise(errc::invalid_config, "trials must be positive");

  const std::uint32_t stride =
      opts.seed_stride != 0 ? opts.seed_stride : default_seed_stride(config.k);
  const CycleCache cache(LfsrSpec::standard(config.k));
  const PseudoInverseCache pinv(config, cache, stride);

  std::vector<double> rel(opts.trials);
  detail::parallel_for(static_cast<std::size_t>(opts.trials), opts.threads,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const Eigen::VectorXf wf = sampler(static_cast<std::uint64_t>(t), config.c);
      const Eigen::VectorXd w = wf.cast<double>();
      const BlockCompression r = compress_block(w, pinv, cache, {}, opts.rule);
      const double denom = w.squaredNorm();
      rel[t] = denom > 0.0 ? r.error / denom : 0.0;
    }
  });

  DesignPoint point;
  point.config = config;
  point.trials = opts.trials;
  double sum = 0.0;
  for (double r : rel) sum += r;
  point.mean_relative_error = sum / static_cast<double>(opts.trials);
  if (opts.trials > 1) {
    double ss = 0.0;
    for (double r : rel) {
      const double d = r - point.mean_relative_error;
      ss += d * d;
    }
    const double variance = ss / static_cast<double>(opts.trials - 1);
    point.std_error = std::sqrt(variance / static_cast<double>(opts.trials));
  }
  return point;
}

std::vector<DesignPoint> search_designs(double bits_per_element, int max_c, int max_k,
                                        const EvaluationOptions& opts) {
  const std::vector<BlockConfig> configs = enumerate_configs(bits_per_element, max_c, max_k);
  std::vector<DesignPoint> points;
  points.reserve(configs.size());
  for (const BlockConfig& config : configs) {
    points.push_back(evaluate_config(config, opts));
  }
  std::sort(points.begin(), points.end(), [](const DesignPoint& a, const DesignPoint& b) {
    if (a.mean_relative_error != b.mean_relative_error) {
      return a.mean_relative_error < b.mean_relative_error;
    }
    return std::tie(a.config.c, a.config.p, a.config.k) <
           std::tie(b.config.c, b.config.p, b.config.k);
  });
  return points;
}

std::string ranking_to_csv(std::span<const DesignPoint> points) {
  std::ostringstream oss;
  oss << "C,P,K,M,trials,mean_rel_err,std_err\n";
  for (const DesignPoint& p : points) {
    oss << p.config.c << ',' << p.config.p << ',' << p.config.k << ','
        << std::setprecision(6) << p.config.bits_per_element() << ',' << p.trials << ','
        << std::setprecision(10) << p.mean_relative_error << ','
        << std::setprecision(10) << p.std_error << '\n';
  }
  return oss.str();
}

}  // namespace seedlm
