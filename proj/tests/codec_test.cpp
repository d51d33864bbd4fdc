// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "reference.hpp"
#include "seedlm/codec.hpp"
#include "seedlm/container.hpp"

using namespace seedlm;

namespace {

Eigen::VectorXd gaussian(std::mt19937_64& eng, int n) {
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(eng);
  return v;
}

const CycleCache& cache3() {
  static const CycleCache cache(LfsrSpec::standard(3));
  return cache;
}

const PseudoInverseCache& pinv423() {
  static const PseudoInverseCache pinv(BlockConfig{4, 2, 3}, cache3());
  return pinv;
}

}  // namespace

TEST_CASE("block config validation") {
  CHECK_NOTHROW((BlockConfig{12, 4, 16}.validate()));
  CHECK_NOTHROW((BlockConfig{8, 3, 16}.validate()));
  CHECK_THROWS_AS((BlockConfig{8, 8, 16}.validate()), Error);   // P must be < C
  CHECK_THROWS_AS((BlockConfig{8, 0, 16}.validate()), Error);
  CHECK_THROWS_AS((BlockConfig{8, 3, 25}.validate()), Error);   // K outside tap table
  CHECK_THROWS_AS((BlockConfig{0, 3, 16}.validate()), Error);
}

TEST_CASE("canonical presets carry the advertised bit budgets") {
  const BlockConfig m3 = BlockConfig::preset_for_bits(3);
  CHECK((m3 == BlockConfig{12, 4, 16}));
  CHECK(m3.payload_bits_per_block() == 36);
  CHECK(m3.bits_per_element() == 3.0);

  const BlockConfig m4 = BlockConfig::preset_for_bits(4);
  CHECK((m4 == BlockConfig{8, 3, 16}));
  CHECK(m4.payload_bits_per_block() == 32);
  CHECK(m4.bits_per_element() == 4.0);

  CHECK_THROWS_AS(BlockConfig::preset_for_bits(5), Error);
}

TEST_CASE("quantize: zero vector short-circuits to q=0, e=-8") {
  const QuantizedCoefficients qc = quantize_coefficients(Eigen::VectorXd::Zero(3));
  CHECK(qc.e == -8);
  CHECK((qc.q.array() == 0).all());
}

TEST_CASE("quantize: exactly representable vector round-trips at e=0") {
  Eigen::VectorXd t(3);
  t << 7.0, -8.0, 1.0;
  const QuantizedCoefficients qc = quantize_coefficients(t);
  CHECK(qc.e == 0);
  CHECK(qc.q[0] == 7);
  CHECK(qc.q[1] == -8);
  CHECK(qc.q[2] == 1);
  CHECK(dequantize<double>(qc) == t);
}

TEST_CASE("quantize: dyadic vector matches the exhaustive-exponent oracle") {
  Eigen::VectorXd t(3);
  t << 0.5, -0.25, 0.125;
  const QuantizedCoefficients qc = quantize_coefficients(t);
  const testref::Quantized expect = testref::quantize({0.5, -0.25, 0.125});
  // Same achieved round-trip error as the oracle's minimum (here: exact).
  const Eigen::VectorXd deq = dequantize<double>(qc);
  CHECK((deq - t).squaredNorm() == expect.err);
  CHECK(expect.err == 0.0);
  CHECK(deq == t);
}

TEST_CASE("quantize: random vectors never beat the oracle's exponent search") {
  std::mt19937_64 eng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd t = gaussian(eng, 4) * std::pow(2.0, trial % 11 - 5);
    const QuantizedCoefficients qc = quantize_coefficients(t);
    const double err = (dequantize<double>(qc) - t).squaredNorm();
    const testref::Quantized expect =
        testref::quantize(std::vector<double>(t.data(), t.data() + t.size()));
    CHECK(err == doctest::Approx(expect.err).epsilon(1e-12));
  }
}

TEST_CASE("quantize: literal max-floor-log2 rule is available and can be worse") {
  Eigen::VectorXd t(3);
  t << 7.0, -8.0, 1.0;
  const QuantizedCoefficients literal =
      quantize_coefficients(t, ExponentRule::kMaxFloorLog2);
  CHECK(literal.e == 3);  // floor(log2 8) = 3
  const double literal_err = (dequantize<double>(literal) - t).squaredNorm();
  const QuantizedCoefficients searched = quantize_coefficients(t);
  const double searched_err = (dequantize<double>(searched) - t).squaredNorm();
  CHECK(searched_err < literal_err);
}

TEST_CASE("quantize rejects non-finite input") {
  Eigen::VectorXd t(2);
  t << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(quantize_coefficients(t), Error);
}

TEST_CASE("quantizer sanity: representable vectors decode back exactly") {
  std::mt19937_64 eng(7);
  std::uniform_int_distribution<int> qdist(-8, 7);
  std::uniform_int_distribution<int> edist(-8, 7);
  for (int trial = 0; trial < 300; ++trial) {
    const int p = 1 + trial % 6;
    const int e = edist(eng);
    Eigen::VectorXd t(p);
    for (int i = 0; i < p; ++i) t[i] = std::ldexp(static_cast<double>(qdist(eng)), e);
    const QuantizedCoefficients qc = quantize_coefficients(t);
    CHECK(dequantize<double>(qc) == t);
  }
}

TEST_CASE("dequantize hits the documented range endpoints") {
  QuantizedCoefficients hi;
  hi.q.resize(1);
  hi.q[0] = 7;
  hi.e = 7;
  CHECK(dequantize<double>(hi)[0] == 896.0);

  QuantizedCoefficients lo;
  lo.q.resize(1);
  lo.q[0] = -8;
  lo.e = -8;
  CHECK(dequantize<double>(lo)[0] == -0.03125);

  QuantizedCoefficients zero;
  zero.q.setZero(3);
  zero.e = -8;
  CHECK((dequantize<double>(zero).array() == 0.0).all());
}

TEST_CASE("pseudo-inverse cache geometry") {
  SUBCASE("K=3 has 7 candidate operators of shape 2x4") {
    const PseudoInverseCache& pinv = pinv423();
    CHECK(pinv.candidate_count() == 7);
    for (std::uint32_t s = 1; s <= 7; ++s) {
      const auto op = pinv.operator_for(s);
      CHECK(op.rows() == 2);
      CHECK(op.cols() == 4);
    }
    CHECK_THROWS_AS(pinv.operator_for(0), Error);
    CHECK_THROWS_AS(pinv.operator_for(8), Error);
  }

  SUBCASE("K=16 preset has 65535 operators") {
    const CycleCache cache(LfsrSpec::standard(16));
    const PseudoInverseCache pinv(BlockConfig{8, 3, 16}, cache);
    CHECK(pinv.candidate_count() == 65535);
  }

  SUBCASE("stride 3 keeps every third seed") {
    const PseudoInverseCache pinv(BlockConfig{4, 2, 3}, cache3(), 3);
    CHECK(pinv.candidate_count() == 3);  // seeds 1, 4, 7
    CHECK(pinv.covers(1));
    CHECK(pinv.covers(4));
    CHECK(pinv.covers(7));
    CHECK_FALSE(pinv.covers(2));
  }
}

TEST_CASE("pseudo-inverse operators satisfy the Moore-Penrose identities") {
  const PseudoInverseCache& pinv = pinv423();
  for (std::uint32_t s = 1; s <= 7; ++s) {
    const Eigen::MatrixXd u = normalized_matrix<double>(cache3(), s, 4, 2);
    const Eigen::MatrixXd op = pinv.operator_for(s);
    CHECK((u * op * u - u).cwiseAbs().maxCoeff() < 1e-12);
    // Full column rank here, so op is a left inverse.
    CHECK((op * u - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("basis view agrees with normalized_matrix including wraparound") {
  const PseudoInverseCache& pinv = pinv423();
  for (std::uint32_t s = 1; s <= 7; ++s) {
    const auto view = pinv.basis_for(s, cache3());
    const Eigen::MatrixXd direct = normalized_matrix<double>(cache3(), s, 4, 2);
    CHECK((view - direct).cwiseAbs().maxCoeff() == 0.0);  // same values, same arithmetic
  }
}

TEST_CASE("compress_block: zero block short-circuits") {
  const BlockCompression r = compress_block(Eigen::VectorXd::Zero(4), pinv423(), cache3());
  CHECK(r.block.seed == 1);
  CHECK(r.error == 0.0);
  CHECK((r.block.coeffs.q.array() == 0).all());
  CHECK(r.block.coeffs.e == -8);
}

TEST_CASE("compress_block: a basis column is recovered exactly") {
  // w = first column of U(5); t = [1, 0] reconstructs it with zero error.
  const Eigen::MatrixXd u5 = normalized_matrix<double>(cache3(), 5, 4, 2);
  const Eigen::VectorXd w = u5.col(0);
  const BlockCompression r = compress_block(w, pinv423(), cache3());
  CHECK(r.error <= 1e-20);
  const Eigen::VectorXd recon = reconstruct_block<double>(r.block, BlockConfig{4, 2, 3}, cache3());
  CHECK((recon - w).squaredNorm() <= 1e-20);
}

TEST_CASE("compress_block: argmin matches the scalar brute-force oracle") {
  const std::vector<int> taps = LfsrSpec::standard(3).taps();
  std::mt19937_64 eng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd w = gaussian(eng, 4);
    const BlockCompression r = compress_block(w, pinv423(), cache3());
    const testref::BlockResult expect =
        testref::best_block(3, taps, std::vector<double>(w.data(), w.data() + 4), 4, 2);
    CHECK(r.block.seed == expect.seed);
    CHECK(r.error == doctest::Approx(expect.err).epsilon(1e-6));
    // Returned error is the recomputed error of the returned block.
    const Eigen::VectorXd recon =
        reconstruct_block<double>(r.block, BlockConfig{4, 2, 3}, cache3());
    CHECK((w - recon).squaredNorm() == doctest::Approx(r.error).epsilon(1e-9));
  }
}

TEST_CASE("compress_block: candidate subsets obey the superset argmin property") {
  std::mt19937_64 eng(4242);
  const std::vector<std::uint32_t> odd = {1, 3, 5, 7};
  const std::vector<std::uint32_t> all = {1, 2, 3, 4, 5, 6, 7};
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd w = gaussian(eng, 4);
    const double err_subset = compress_block(w, pinv423(), cache3(), odd).error;
    const double err_all = compress_block(w, pinv423(), cache3(), all).error;
    CHECK(err_all <= err_subset);
    // And each candidate error bounds the returned argmin from above.
    for (std::uint32_t s : all) {
      const std::vector<std::uint32_t> one = {s};
      CHECK(err_all <= compress_block(w, pinv423(), cache3(), one).error + 1e-15);
    }
  }
}

TEST_CASE("compress_block rejects bad inputs") {
  CHECK_THROWS_AS(compress_block(Eigen::VectorXd::Zero(5), pinv423(), cache3()), Error);
  Eigen::VectorXd nan(4);
  nan << 1.0, 2.0, std::numeric_limits<double>::infinity(), 0.0;
  CHECK_THROWS_AS(compress_block(nan, pinv423(), cache3()), Error);
}

TEST_CASE("unquantized projection residual never exceeds the input norm") {
  const CycleCache cache(LfsrSpec::standard(8));
  const BlockConfig config{8, 3, 8};
  const PseudoInverseCache pinv(config, cache);
  std::mt19937_64 eng(11);
  std::uniform_int_distribution<std::uint32_t> seeds(1, 255);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::VectorXd w = gaussian(eng, 8);
    const std::uint32_t s = seeds(eng);
    const Eigen::VectorXd t = pinv.operator_for(s) * w;
    const Eigen::MatrixXd u = normalized_matrix<double>(cache, s, 8, 3);
    CHECK((w - u * t).norm() <= w.norm() * (1.0 + 1e-9));
  }
}

TEST_CASE("reconstruct_block: golden value from the K=3 cycle") {
  CompressedBlock block;
  block.seed = 4;
  block.coeffs.q.resize(2);
  block.coeffs.q << 1, 1;
  block.coeffs.e = 0;
  const Eigen::VectorXd v = reconstruct_block<double>(block, BlockConfig{4, 2, 3}, cache3());
  Eigen::VectorXd expect(4);
  expect << -1.0 / 3.0, 5.0 / 3.0, -4.0 / 3.0, -2.0 / 3.0;
  CHECK((v - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("reconstruct_block: zero coefficients give the zero vector") {
  CompressedBlock block;
  block.seed = 6;
  block.coeffs.q.setZero(2);
  block.coeffs.e = -8;
  const Eigen::VectorXd v = reconstruct_block<double>(block, BlockConfig{4, 2, 3}, cache3());
  CHECK((v.array() == 0.0).all());
}

TEST_CASE("reconstruct_block rejects out-of-range seeds") {
  CompressedBlock block;
  block.seed = 0;
  block.coeffs.q.setZero(2);
  CHECK_THROWS_AS((reconstruct_block<double>(block, BlockConfig{4, 2, 3}, cache3())), Error);
  block.seed = 9;
  CHECK_THROWS_AS((reconstruct_block<double>(block, BlockConfig{4, 2, 3}, cache3())), Error);
}

TEST_CASE("compress_tensor: blocking and tail bookkeeping") {
  const CycleCache cache(LfsrSpec::standard(3));
  const BlockConfig config{8, 2, 3};
  const PseudoInverseCache pinv(config, cache);

  SUBCASE("n=16 divides evenly") {
    std::vector<float> data(16, 0.25f);
    const TensorCompression r = compress_tensor(data, {16}, pinv, cache);
    CHECK(r.tensor.blocks.size() == 2);
    CHECK(r.tensor.tail_length == 8);
  }

  SUBCASE("n=17 pads the tail block") {
    std::vector<float> data(17, 0.25f);
    const TensorCompression r = compress_tensor(data, {17}, pinv, cache);
    CHECK(r.tensor.blocks.size() == 3);
    CHECK(r.tensor.tail_length == 1);
    const std::vector<float> back = decompress_tensor(r.tensor, cache);
    CHECK(back.size() == 17);
  }

  SUBCASE("payload bit accounting follows the budget") {
    std::vector<float> data(17, 0.25f);
    const TensorCompression r = compress_tensor(data, {17}, pinv, cache);
    const std::uint64_t bits =
        r.tensor.block_count() * static_cast<std::uint64_t>(config.payload_bits_per_block());
    CHECK(bits == 3 * (3 + 4 + 8));
    CHECK(encoded_payload_bytes(17, config) == (bits + 7) / 8);
  }
}

TEST_CASE("compress_tensor rejects malformed input") {
  const CycleCache cache(LfsrSpec::standard(3));
  const PseudoInverseCache pinv(BlockConfig{4, 2, 3}, cache);
  std::vector<float> data(8, 1.0f);
  CHECK_THROWS_AS(compress_tensor({}, {1}, pinv, cache), Error);
  CHECK_THROWS_AS(compress_tensor(data, {9}, pinv, cache), Error);     // shape mismatch
  CHECK_THROWS_AS(compress_tensor(data, {}, pinv, cache), Error);      // empty shape
  data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(compress_tensor(data, {8}, pinv, cache), Error);     // non-finite
}

TEST_CASE("compress_tensor: zero tensor round-trips to exact zeros") {
  const CycleCache cache(LfsrSpec::standard(3));
  const PseudoInverseCache pinv(BlockConfig{4, 2, 3}, cache);
  std::vector<float> data(23, 0.0f);
  const TensorCompression r = compress_tensor(data, {23}, pinv, cache);
  CHECK(r.stats.mse == 0.0);
  const std::vector<float> back = decompress_tensor(r.tensor, cache);
  REQUIRE(back.size() == 23);
  for (float f : back) CHECK(f == 0.0f);
}

TEST_CASE("compress_tensor: output is identical for every thread count") {
  const CycleCache cache(LfsrSpec::standard(8));
  const PseudoInverseCache pinv(BlockConfig{8, 3, 8}, cache);
  std::mt19937_64 eng(5);
  std::normal_distribution<float> dist;
  std::vector<float> data(256);
  for (float& f : data) f = dist(eng);

  const TensorCompression a = compress_tensor(data, {16, 16}, pinv, cache, 1);
  const TensorCompression b = compress_tensor(data, {16, 16}, pinv, cache, 4);
  const TensorCompression c = compress_tensor(data, {16, 16}, pinv, cache, 3);
  CHECK(a.tensor == b.tensor);
  CHECK(a.tensor == c.tensor);
  CHECK(a.stats.mse == b.stats.mse);
  CHECK(a.stats.total_squared_error == c.stats.total_squared_error);
  CHECK(encode_payload(a.tensor) == encode_payload(b.tensor));

  const std::vector<float> d1 = decompress_tensor(a.tensor, cache, 1);
  const std::vector<float> d4 = decompress_tensor(a.tensor, cache, 4);
  CHECK(d1 == d4);
}

TEST_CASE("compress_tensor: stats agree with an external recomputation") {
  const CycleCache cache(LfsrSpec::standard(8));
  const PseudoInverseCache pinv(BlockConfig{8, 3, 8}, cache);
  std::mt19937_64 eng(31);
  std::normal_distribution<float> dist;
  std::vector<float> data(100);  // forces a padded tail block
  for (float& f : data) f = dist(eng);

  const TensorCompression r = compress_tensor(data, {100}, pinv, cache);
  const std::vector<float> back = decompress_tensor(r.tensor, cache);
  REQUIRE(back.size() == data.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = static_cast<double>(data[i]) - static_cast<double>(back[i]);
    sq += d * d;
  }
  CHECK(r.stats.mse == doctest::Approx(sq / 100.0).epsilon(1e-12));
  CHECK(r.stats.total_squared_error == doctest::Approx(sq).epsilon(1e-12));
  // Histogram counts one seed per block.
  std::uint64_t total = 0;
  for (const auto& [seed, count] : r.stats.seed_histogram) {
    CHECK(seed >= 1);
    total += count;
  }
  CHECK(total == r.tensor.blocks.size());
}

TEST_CASE("decompress_tensor rejects a corrupted block with its index") {
  const CycleCache cache(LfsrSpec::standard(3));
  const PseudoInverseCache pinv(BlockConfig{4, 2, 3}, cache);
  std::vector<float> data(12, 0.5f);
  TensorCompression r = compress_tensor(data, {12}, pinv, cache);
  r.tensor.blocks[1].seed = 0;
  CHECK_THROWS_WITH_AS(decompress_tensor(r.tensor, cache), doctest::Contains("block 1"), Error);
}

TEST_CASE("full search beats a single fixed seed on Gaussian data") {
  const CycleCache cache(LfsrSpec::standard(8));
  const BlockConfig config{8, 3, 8};
  const PseudoInverseCache pinv(config, cache);
  std::mt19937_64 eng(2024);
  const std::vector<std::uint32_t> fixed = {1};
  double full_err = 0.0, full_norm = 0.0, fixed_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd w = gaussian(eng, 8);
    full_err += compress_block(w, pinv, cache).error;
    fixed_err += compress_block(w, pinv, cache, fixed).error;
    full_norm += w.squaredNorm();
  }
  CHECK(full_err / full_norm < fixed_err / full_norm);
}
