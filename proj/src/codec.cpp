// SPDX-License-Identifier: Apache-2.0
#include "seedlm/codec.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "seedlm/detail/parallel.hpp"

namespace seedlm {

namespace {

constexpr double kRankTolerance = 1e-10;  // relative to the largest singular value

// 2^e for e in [-8, 7], indexed by e + 8. Exact dyadic values.
constexpr std::array<double, 16> kPow2 = [] {
  std::array<double, 16> a{};
  double v = 1.0 / 256.0;
  for (int i = 0; i < 16; ++i) {
    a[i] = v;
    v *= 2.0;
  }
  return a;
}();
constexpr std::array<double, 16> kInvPow2 = [] {
  std::array<double, 16> a{};
  double v = 256.0;
  for (int i = 0; i < 16; ++i) {
    a[i] = v;
    v *= 0.5;
  }
  return a;
}();

// Round-to-nearest-even for |x| <= 9 without a libm call: adding and
// subtracting 1.5 * 2^52 forces the rounding at integer granularity.
inline double round_half_even_small(double x) {
  constexpr double kShift = 6755399441055744.0;
  return (x + kShift) - kShift;
}

// clamp(round(x), -8, 7) for arbitrary finite x. Pre-clamping into [-9, 8]
// keeps the magic-number rounding exact and cannot change the result.
inline double rounded_mantissa(double x) {
  const double y = x < -9.0 ? -9.0 : (x > 8.0 ? 8.0 : x);
  const double r = round_half_even_small(y);
  return r < -8.0 ? -8.0 : (r > 7.0 ? 7.0 : r);
}

// Quantizes t (p values) with the given rule. Writes mantissas to q and the
// exact dequantized values to deq; returns the squared round-trip error.
double quantize_into(const double* t, int p, ExponentRule rule, std::int8_t* q, std::int8_t* e,
                     double* deq) {
  constexpr int kEmin = QuantizedCoefficients::kMinExponent;
  constexpr int kEmax = QuantizedCoefficients::kMaxExponent;

  int best_slot = 0;
  if (rule == ExponentRule::kSearch) {
    double best_err = std::numeric_limits<double>::infinity();
    for (int slot = 0; slot < 16; ++slot) {
      const double inv_scale = kInvPow2[slot];
      const double scale = kPow2[slot];
      double err = 0.0;
      for (int i = 0; i < p; ++i) {
        const double m = rounded_mantissa(t[i] * inv_scale);
        const double d = t[i] - m * scale;
        err += d * d;
      }
      if (err < best_err) {
        best_err = err;
        best_slot = slot;
      }
    }
  } else {
    int top = std::numeric_limits<int>::min();
    for (int i = 0; i < p; ++i) {
      if (t[i] != 0.0) top = std::max(top, std::ilogb(std::abs(t[i])));
    }
    const int lit = top == std::numeric_limits<int>::min() ? kEmin : std::clamp(top, kEmin, kEmax);
    best_slot = lit - kEmin;
  }

  const double inv_scale = kInvPow2[best_slot];
  const double scale = kPow2[best_slot];
  double err = 0.0;
  for (int i = 0; i < p; ++i) {
    const double m = rounded_mantissa(t[i] * inv_scale);
    q[i] = static_cast<std::int8_t>(m);
    deq[i] = m * scale;
    const double d = t[i] - deq[i];
    err += d * d;
  }
  *e = static_cast<std::int8_t>(best_slot + kEmin);
  return err;
}

QuantizedCoefficients zero_coefficients(int p) {
  QuantizedCoefficients out;
  out.q.setZero(p);
  out.e = QuantizedCoefficients::kMinExponent;
  return out;
}

}  // namespace

BlockConfig BlockConfig::preset_for_bits(int bits) {
  switch (bits) {
    case 3:
      return BlockConfig{12, 4, 16};
    case 4:
      return BlockConfig{8, 3, 16};
    default:
      raise(errc::invalid_config,
            "no preset for " + std::to_string(bits) + " bits per element (choose 3 or 4)");
  }
}

void BlockConfig::validate() const {
  if (c < 1) raise(errc::invalid_config, "block size C must be positive");
  if (p < 1 || p >= c) {
    raise(errc::invalid_config, "latent dimension P must satisfy 1 <= P < C (got P=" +
                                    std::to_string(p) + ", C=" + std::to_string(c) + ")");
  }
  if (!LfsrSpec::has_standard(k)) {
    raise(errc::invalid_config, "K=" + std::to_string(k) + " has no standard LFSR tap set");
  }
}

QuantizedCoefficients quantize_coefficients(Eigen::Ref<const Eigen::VectorXd> t,
                                            ExponentRule rule) {
  if (!t.allFinite()) {
    raise(errc::non_finite_input, "coefficients to quantize must be finite");
  }
  QuantizedCoefficients out;
  const int p = static_cast<int>(t.size());
  out.q.resize(p);
  Eigen::VectorXd deq(p);
  quantize_into(t.data(), p, rule, out.q.data(), &out.e, deq.data());
  return out;
}

void CompressedTensor::validate() const {
  config.validate();
  if (element_count == 0) raise(errc::shape_mismatch, "tensor has no elements");
  if (shape.empty()) raise(errc::shape_mismatch, "tensor shape is empty");
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d == 0) raise(errc::shape_mismatch, "tensor shape has a zero dimension");
    n *= d;
  }
  if (n != element_count) {
    raise(errc::shape_mismatch, "shape product " + std::to_string(n) +
                                    " != element count " + std::to_string(element_count));
  }
  const std::uint64_t expect_blocks = block_count();
  if (blocks.size() != expect_blocks) {
    raise(errc::bad_format, "expected " + std::to_string(expect_blocks) + " blocks, have " +
                                std::to_string(blocks.size()));
  }
  const std::uint64_t expect_tail =
      element_count - static_cast<std::uint64_t>(config.c) * (expect_blocks - 1);
  if (tail_length != expect_tail) {
    raise(errc::bad_format, "tail length " + std::to_string(tail_length) + " != expected " +
                                std::to_string(expect_tail));
  }
  const std::uint32_t max_seed = (std::uint32_t{1} << config.k) - 1u;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const CompressedBlock& b = blocks[i];
    if (b.seed == 0 || b.seed > max_seed) {
      raise(errc::bad_format,
            "block " + std::to_string(i) + " has corrupt seed " + std::to_string(b.seed));
    }
    if (b.coeffs.q.size() != config.p) {
      raise(errc::bad_format, "block " + std::to_string(i) + " has " +
                                  std::to_string(b.coeffs.q.size()) + " coefficients, expected " +
                                  std::to_string(config.p));
    }
    if (b.coeffs.e < QuantizedCoefficients::kMinExponent ||
        b.coeffs.e > QuantizedCoefficients::kMaxExponent) {
      raise(errc::bad_format, "block " + std::to_string(i) + " has exponent out of range");
    }
    for (Eigen::Index j = 0; j < b.coeffs.q.size(); ++j) {
      if (b.coeffs.q[j] < QuantizedCoefficients::kMinMantissa ||
          b.coeffs.q[j] > QuantizedCoefficients::kMaxMantissa) {
        raise(errc::bad_format, "block " + std::to_string(i) + " has mantissa out of range");
      }
    }
  }
}

PseudoInverseCache::PseudoInverseCache(const BlockConfig& config, const CycleCache& cache,
                                       std::uint32_t seed_stride)
    : config_(config), stride_(seed_stride) {
  config_.validate();
  if (cache.spec().length() != config_.k) {
    raise(errc::invalid_config, "cycle cache K=" + std::to_string(cache.spec().length()) +
                                    " does not match config K=" + std::to_string(config_.k));
  }
  if (stride_ == 0) raise(errc::invalid_config, "seed stride must be positive");
  max_seed_ = cache.spec().max_state();
  count_ = static_cast<std::size_t>((max_seed_ - 1u) / stride_) + 1u;
  // Last candidate seed actually representable: 1 + stride * (count_ - 1).
  max_seed_ = 1u + stride_ * static_cast<std::uint32_t>(count_ - 1);

  const int c = config_.c;
  const int p = config_.p;
  const std::size_t window = static_cast<std::size_t>(c) * static_cast<std::size_t>(p);
  const std::uint32_t period = cache.period();

  seq_.resize(static_cast<std::size_t>(period) + window);
  const auto order = cache.order();
  const int k = config_.k;
  for (std::size_t i = 0; i < seq_.size(); ++i) {
    seq_[i] = normalized_state<double>(k, order[i % period]);
  }

  ops_.resize(p, static_cast<Eigen::Index>(count_) * c);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  detail::parallel_for(count_, 0, [&](std::size_t begin, std::size_t end) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t seed = candidate_seed(i);
      const std::size_t start = static_cast<std::size_t>(cache.position(seed)) + 1;
      Eigen::Map<const RowMajor> u(seq_.data() + start, c, p);
      svd.compute(u, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::VectorXd& sv = svd.singularValues();
      const double cutoff = sv.size() > 0 ? sv[0] * kRankTolerance : 0.0;
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
      for (Eigen::Index j = 0; j < sv.size(); ++j) {
        if (sv[j] > cutoff && sv[j] > 0.0) inv[j] = 1.0 / sv[j];
      }
      ops_.middleCols(static_cast<Eigen::Index>(i) * c, c).noalias() =
          svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    }
  });
}

PseudoInverseCache::OperatorView PseudoInverseCache::operator_for(std::uint32_t seed) const {
  if (!covers(seed)) {
    raise(errc::invalid_config, "seed " + std::to_string(seed) + " is not a cached candidate");
  }
  const Eigen::Index slot = static_cast<Eigen::Index>((seed - 1u) / stride_);
  return ops_.middleCols(slot * config_.c, config_.c);
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
PseudoInverseCache::basis_for(std::uint32_t seed, const CycleCache& cache) const {
  if (seed == 0 || seed > cache.spec().max_state()) {
    raise(errc::invalid_config, "seed " + std::to_string(seed) + " out of range");
  }
  const std::size_t start = static_cast<std::size_t>(cache.position(seed)) + 1;
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(seq_.data() + start, config_.c, config_.p);
}

BlockCompression compress_block(Eigen::Ref<const Eigen::VectorXd> w,
                                const PseudoInverseCache& pinv, const CycleCache& cache,
                                std::span<const std::uint32_t> candidates, ExponentRule rule) {
  const BlockConfig& cfg = pinv.config();
  if (w.size() != cfg.c) {
    raise(errc::shape_mismatch, "block has " + std::to_string(w.size()) +
                                    " elements, config expects " + std::to_string(cfg.c));
  }
  if (!w.allFinite()) raise(errc::non_finite_input, "block contains non-finite values");
  if (cache.spec().length() != cfg.k) {
    raise(errc::invalid_config, "cycle cache does not match config K");
  }

  if ((w.array() == 0.0).all()) {
    return BlockCompression{CompressedBlock{1u, zero_coefficients(cfg.p)}, 0.0};
  }

  const int c = cfg.c;
  const int p = cfg.p;
  const double* seq = pinv.basis_sequence().data();
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::VectorXd t(p);
  Eigen::VectorXd deq(p);
  Eigen::VectorXd resid(c);
  std::vector<std::int8_t> q(static_cast<std::size_t>(p));
  std::int8_t e = 0;

  double best_err = std::numeric_limits<double>::infinity();
  std::uint32_t best_seed = 0;
  QuantizedCoefficients best_coeffs = zero_coefficients(p);

  auto consider = [&](std::uint32_t seed) {
    t.noalias() = pinv.operator_for(seed) * w;
    quantize_into(t.data(), p, rule, q.data(), &e, deq.data());
    Eigen::Map<const RowMajor> u(seq + cache.position(seed) + 1, c, p);
    resid.noalias() = w - u * deq;
    const double err = resid.squaredNorm();
    if (err < best_err || (err == best_err && seed < best_seed)) {
      best_err = err;
      best_seed = seed;
      best_coeffs.e = e;
      std::copy(q.begin(), q.end(), best_coeffs.q.data());
    }
  };

  if (candidates.empty()) {
    for (std::size_t i = 0; i < pinv.candidate_count(); ++i) {
      consider(pinv.candidate_seed(i));
    }
  } else {
    for (std::uint32_t seed : candidates) consider(seed);
  }
  return BlockCompression{CompressedBlock{best_seed, std::move(best_coeffs)}, best_err};
}

TensorCompression compress_tensor(std::span<const float> data, std::vector<std::uint64_t> shape,
                                  const PseudoInverseCache& pinv, const CycleCache& cache,
                                  int threads, ExponentRule rule) {
  if (data.empty()) raise(errc::shape_mismatch, "cannot compress an empty tensor");
  if (shape.empty()) raise(errc::shape_mismatch, "tensor shape is empty");
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d == 0) raise(errc::shape_mismatch, "tensor shape has a zero dimension");
    n *= d;
  }
  if (n != data.size()) {
    raise(errc::shape_mismatch, "shape product " + std::to_string(n) + " != data length " +
                                    std::to_string(data.size()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      raise(errc::non_finite_input, "non-finite value at flat index " + std::to_string(i));
    }
  }

  const BlockConfig& cfg = pinv.config();
  const int c = cfg.c;
  const std::uint64_t nblocks = (n + static_cast<std::uint64_t>(c) - 1) / c;
  const std::uint32_t tail = static_cast<std::uint32_t>(n - static_cast<std::uint64_t>(c) * (nblocks - 1));

  std::vector<BlockCompression> results(nblocks);
  // Squared error of each block against the float32 reconstruction, counted
  // over real (unpadded) elements only.
  std::vector<double> f32_errors(nblocks);

  detail::parallel_for(static_cast<std::size_t>(nblocks), threads,
                       [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd w(c);
    for (std::size_t b = begin; b < end; ++b) {
      const std::uint64_t offset = static_cast<std::uint64_t>(b) * c;
      const int real = b + 1 == nblocks ? static_cast<int>(tail) : c;
      for (int i = 0; i < real; ++i) w[i] = static_cast<double>(data[offset + i]);
      for (int i = real; i < c; ++i) w[i] = 0.0;

      results[b] = compress_block(w, pinv, cache, {}, rule);

      const Eigen::VectorXf recon =
          reconstruct_block<float>(results[b].block, cfg, cache);
      double err = 0.0;
      for (int i = 0; i < real; ++i) {
        const double d = static_cast<double>(data[offset + i]) - static_cast<double>(recon[i]);
        err += d * d;
      }
      f32_errors[b] = err;
    }
  });

  TensorCompression out;
  out.tensor.config = cfg;
  out.tensor.shape = std::move(shape);
  out.tensor.element_count = n;
  out.tensor.tail_length = tail;
  out.tensor.blocks.reserve(results.size());

  ReconstructionStats& stats = out.stats;
  stats.block_errors.reserve(results.size());
  for (std::size_t b = 0; b < results.size(); ++b) {
    out.tensor.blocks.push_back(std::move(results[b].block));
    stats.block_errors.push_back(results[b].error);
    stats.total_squared_error += f32_errors[b];
    ++stats.seed_histogram[out.tensor.blocks.back().seed];
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    stats.input_squared_norm += static_cast<double>(data[i]) * static_cast<double>(data[i]);
  }
  stats.mse = stats.total_squared_error / static_cast<double>(n);
  stats.relative_error =
      stats.input_squared_norm > 0.0 ? stats.total_squared_error / stats.input_squared_norm : 0.0;
  return out;
}

std::vector<float> decompress_tensor(const CompressedTensor& ct, const CycleCache& cache,
                                     int threads) {
  ct.validate();
  if (cache.spec().length() != ct.config.k) {
    raise(errc::invalid_config, "cycle cache does not match tensor config K");
  }
  const int c = ct.config.c;
  const std::uint64_t nblocks = ct.block_count();
  std::vector<float> out(ct.element_count);

  detail::parallel_for(static_cast<std::size_t>(nblocks), threads,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const Eigen::VectorXf recon = reconstruct_block<float>(ct.blocks[b], ct.config, cache);
      const std::uint64_t offset = static_cast<std::uint64_t>(b) * c;
      const int real = b + 1 == nblocks ? static_cast<int>(ct.tail_length) : c;
      for (int i = 0; i < real; ++i) out[offset + i] = recon[i];
    }
  });
  return out;
}

}  // namespace seedlm
