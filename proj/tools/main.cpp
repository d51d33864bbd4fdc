// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: compress / decompress / stats / search / lfsr-dump.
// Machine-readable results go to stdout, progress and diagnostics to stderr.
//
// Exit codes: 0 success, 1 usage error, 2 I/O failure, 3 shape mismatch,
// 4 invalid config, 5 non-finite input, 6 container format error.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seedlm/codec.hpp"
#include "seedlm/container.hpp"
#include "seedlm/explorer.hpp"
#include "seedlm/lfsr.hpp"

namespace fs = std::filesystem;
using namespace seedlm;

namespace {

std::vector<std::uint64_t> parse_shape(const std::string& text) {
  std::vector<std::uint64_t> shape;
  std::string token;
  std::istringstream iss(text);
  while (std::getline(iss, token, 'x')) {
    if (token.empty()) raise(errc::shape_mismatch, "bad shape '" + text + "'");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(token, &used);
    } catch (const std::exception&) {
      raise(errc::shape_mismatch, "bad shape '" + text + "'");
    }
    if (used != token.size() || v == 0) raise(errc::shape_mismatch, "bad shape '" + text + "'");
    shape.push_back(v);
  }
  if (shape.empty()) raise(errc::shape_mismatch, "bad shape '" + text + "'");
  return shape;
}

BlockConfig parse_config(const std::string& text) {
  int vals[3];
  std::istringstream iss(text);
  std::string token;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(iss, token, ',')) {
      raise(errc::invalid_config, "expected --config C,P,K, got '" + text + "'");
    }
    try {
      vals[i] = std::stoi(token);
    } catch (const std::exception&) {
      raise(errc::invalid_config, "expected --config C,P,K, got '" + text + "'");
    }
  }
  if (std::getline(iss, token, ',')) {
    raise(errc::invalid_config, "expected --config C,P,K, got '" + text + "'");
  }
  BlockConfig config{vals[0], vals[1], vals[2]};
  config.validate();
  if (config.payload_bits_per_block() % config.c != 0) {
    raise(errc::invalid_config,
          "config " + text + " has a fractional bit budget: (K + 4 + 4P) = " +
              std::to_string(config.payload_bits_per_block()) + " is not divisible by C = " +
              std::to_string(config.c));
  }
  return config;
}

struct TensorSpec {
  std::string name;
  std::vector<std::uint64_t> shape;
  fs::path path;
};

std::vector<TensorSpec> parse_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io, "cannot open manifest '" + path.string() + "'");
  std::vector<TensorSpec> specs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream iss(line);
    TensorSpec spec;
    std::string shape_text, path_text;
    if (!(iss >> spec.name >> shape_text >> path_text)) {
      raise(errc::io, path.string() + ":" + std::to_string(lineno) +
                          ": expected 'name shape path'");
    }
    spec.shape = parse_shape(shape_text);
    spec.path = path_text;
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) raise(errc::io, "manifest '" + path.string() + "' lists no tensors");
  return specs;
}

struct CommonArgs {
  std::string input;
  std::string manifest;
  std::string shape;
  std::string name;
  std::string output;
  int bits = 0;
  std::string config_text;
  int threads = 0;
  std::uint32_t seed_stride = 1;
  bool verbose = false;
};

BlockConfig resolve_config(const CommonArgs& args) {
  if (!args.config_text.empty()) return parse_config(args.config_text);
  if (args.bits != 0) return BlockConfig::preset_for_bits(args.bits);
  raise(errc::invalid_config, "one of --bits or --config is required");
}

std::vector<TensorSpec> resolve_inputs(const CommonArgs& args) {
  if (!args.manifest.empty()) return parse_manifest(args.manifest);
  if (args.input.empty()) raise(errc::io, "no input tensor: give INPUT --shape or --manifest");
  TensorSpec spec;
  spec.path = args.input;
  spec.shape = parse_shape(args.shape);
  spec.name = args.name.empty() ? spec.path.stem().string() : args.name;
  return {spec};
}

std::string shape_to_string(std::span<const std::uint64_t> shape) {
  std::ostringstream oss;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) oss << 'x';
    oss << shape[i];
  }
  return oss.str();
}

int cmd_compress(const CommonArgs& args) {
  const BlockConfig config = resolve_config(args);
  const std::vector<TensorSpec> inputs = resolve_inputs(args);
  if (args.output.empty()) raise(errc::io, "--output is required");

  if (args.verbose) {
    std::cerr << "config C=" << config.c << " P=" << config.p << " K=" << config.k
              << " (" << config.bits_per_element() << " bits/element), seed stride "
              << args.seed_stride << "\n";
  }
  const CycleCache cache(LfsrSpec::standard(config.k));
  const PseudoInverseCache pinv(config, cache, args.seed_stride);

  std::vector<NamedTensor> tensors;
  tensors.reserve(inputs.size());
  for (const TensorSpec& spec : inputs) {
    if (args.verbose) std::cerr << "compressing " << spec.name << "...\n";
    const std::vector<float> data = read_plain_tensor(spec.path, spec.shape);
    const auto t0 = std::chrono::steady_clock::now();
    TensorCompression result =
        compress_tensor(data, spec.shape, pinv, cache, args.threads);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;

    const double bits_per_element =
        static_cast<double>(result.tensor.block_count()) * config.payload_bits_per_block() /
        static_cast<double>(result.tensor.element_count);
    std::cout << spec.name << ": shape=" << shape_to_string(spec.shape)
              << " blocks=" << result.tensor.block_count()
              << " bits_per_element=" << bits_per_element << " mse=" << result.stats.mse
              << " rel_err=" << result.stats.relative_error << " seconds=" << elapsed.count()
              << "\n";
    tensors.push_back(NamedTensor{spec.name, std::move(result.tensor)});
  }
  write_container(fs::path(args.output), config, tensors);
  if (args.verbose) std::cerr << "wrote " << args.output << "\n";
  return 0;
}

int cmd_decompress(const CommonArgs& args) {
  if (args.input.empty()) raise(errc::io, "INPUT container path is required");
  if (args.output.empty()) raise(errc::io, "--output is required");
  const Container container = read_container(fs::path(args.input));
  const CycleCache cache(LfsrSpec::standard(container.config.k));

  const fs::path out(args.output);
  const bool single_file =
      container.tensors.size() == 1 && !fs::is_directory(out);
  if (!single_file) fs::create_directories(out);

  for (const NamedTensor& nt : container.tensors) {
    const std::vector<float> data = decompress_tensor(nt.tensor, cache, args.threads);
    const fs::path dest = single_file ? out : out / (nt.name + ".f32");
    write_plain_tensor(dest, data);
    std::cout << nt.name << ": shape=" << shape_to_string(nt.tensor.shape) << " -> "
              << dest.string() << "\n";
  }
  return 0;
}

int cmd_stats(const CommonArgs& args, const std::string& compressed_path) {
  const Container container = read_container(fs::path(compressed_path));
  const CycleCache cache(LfsrSpec::standard(container.config.k));

  // Pair originals with container tensors: by name for manifests, or the
  // single raw input against a single-tensor container.
  std::vector<TensorSpec> originals = resolve_inputs(args);
  if (args.manifest.empty() && container.tensors.size() != 1) {
    raise(errc::shape_mismatch,
          "container holds " + std::to_string(container.tensors.size()) +
              " tensors; use --manifest to pair them by name");
  }

  double total_sq = 0.0, total_norm = 0.0, global_max = 0.0;
  std::uint64_t total_n = 0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const TensorSpec& spec = originals[i];
    const NamedTensor* nt = nullptr;
    if (args.manifest.empty()) {
      nt = &container.tensors.front();
    } else {
      for (const NamedTensor& cand : container.tensors) {
        if (cand.name == spec.name) {
          nt = &cand;
          break;
        }
      }
      if (!nt) raise(errc::shape_mismatch, "tensor '" + spec.name + "' not in container");
    }
    if (nt->tensor.shape != spec.shape) {
      raise(errc::shape_mismatch, "tensor '" + spec.name + "': shape " +
                                      shape_to_string(spec.shape) + " != container shape " +
                                      shape_to_string(nt->tensor.shape));
    }
    const std::vector<float> original = read_plain_tensor(spec.path, spec.shape);
    const std::vector<float> decoded = decompress_tensor(nt->tensor, cache, args.threads);

    double sq = 0.0, norm = 0.0, max_abs = 0.0;
    for (std::size_t j = 0; j < original.size(); ++j) {
      const double d = static_cast<double>(original[j]) - static_cast<double>(decoded[j]);
      sq += d * d;
      norm += static_cast<double>(original[j]) * static_cast<double>(original[j]);
      max_abs = std::max(max_abs, std::abs(d));
    }
    const double mse = sq / static_cast<double>(original.size());
    std::cout << spec.name << ": mse=" << mse
              << " rel_err=" << (norm > 0.0 ? sq / norm : 0.0) << " max_abs_err=" << max_abs
              << "\n";
    total_sq += sq;
    total_norm += norm;
    global_max = std::max(global_max, max_abs);
    total_n += original.size();
  }

  const auto compressed_bytes = fs::file_size(fs::path(compressed_path));
  const double ratio =
      static_cast<double>(compressed_bytes) / (4.0 * static_cast<double>(total_n));
  std::cout << "aggregate: mse=" << total_sq / static_cast<double>(total_n)
            << " rel_err=" << (total_norm > 0.0 ? total_sq / total_norm : 0.0)
            << " max_abs_err=" << global_max << " size_ratio=" << ratio << "\n";
  return 0;
}

struct SearchArgs {
  double bits = 4.0;
  int max_c = 8;
  int max_k = 16;
  std::uint64_t trials = 1000;
  std::uint64_t rng_seed = 0;
  int threads = 0;
  std::uint32_t seed_stride = 0;
  std::string output;
};

int cmd_search(const SearchArgs& args) {
  EvaluationOptions opts;
  opts.trials = args.trials;
  opts.rng_seed = args.rng_seed;
  opts.threads = args.threads;
  opts.seed_stride = args.seed_stride;
  const std::vector<DesignPoint> ranking =
      search_designs(args.bits, args.max_c, args.max_k, opts);
  const std::string csv = ranking_to_csv(ranking);
  if (args.output.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(args.output, std::ios::trunc);
    if (!out) raise(errc::io, "cannot open '" + args.output + "' for writing");
    out << csv;
    if (!out.flush()) raise(errc::io, "failed writing '" + args.output + "'");
  }
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const DesignPoint& p = ranking[i];
    std::cerr << "#" << (i + 1) << " C=" << p.config.c << " P=" << p.config.p
              << " K=" << p.config.k << " mean_rel_err=" << p.mean_relative_error << " (+-"
              << p.std_error << ")\n";
  }
  return 0;
}

struct DumpArgs {
  int k = 3;
  std::uint32_t seed = 1;
  int rows = 0;
  int cols = 0;
};

int cmd_lfsr_dump(const DumpArgs& args) {
  const LfsrSpec spec = LfsrSpec::standard(args.k);
  if (args.seed == 0 || args.seed > spec.max_state()) {
    std::cerr << "error: seed must be in [1, " << spec.max_state() << "]\n";
    return 1;
  }
  const CycleCache cache(spec);
  std::cout << "K=" << args.k << " taps=";
  for (std::size_t i = 0; i < spec.taps().size(); ++i) {
    std::cout << (i ? "," : "") << spec.taps()[i];
  }
  std::cout << " period=" << cache.period() << "\n";

  std::cout << "cycle from " << args.seed << ":";
  std::uint32_t state = args.seed;
  do {
    std::cout << ' ' << state;
    state = cache.successor(state);
  } while (state != args.seed);
  std::cout << "\n";

  if (args.rows > 0 && args.cols > 0) {
    const MatrixXu32 v = raw_matrix(cache, args.seed, args.rows, args.cols);
    const Eigen::MatrixXd u = normalized_matrix<double>(cache, args.seed, args.rows, args.cols);
    std::cout << "V(" << args.seed << "):\n";
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) std::cout << (c ? " " : "") << v(r, c);
      std::cout << "\n";
    }
    std::cout << "U(" << args.seed << "):\n";
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      for (Eigen::Index c = 0; c < u.cols(); ++c) std::cout << (c ? " " : "") << u(r, c);
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LFSR-seeded weight-block compression"};
  app.require_subcommand(1);

  CommonArgs compress_args;
  auto* compress = app.add_subcommand("compress", "Compress a raw f32 tensor into a container");
  compress->add_option("input", compress_args.input, "raw f32 tensor file");
  compress->add_option("--shape", compress_args.shape, "tensor shape, e.g. 128x256");
  compress->add_option("--name", compress_args.name, "tensor name (default: file stem)");
  compress->add_option("--manifest", compress_args.manifest,
                       "file of 'name shape path' lines for multi-tensor runs");
  compress->add_option("--bits", compress_args.bits, "preset bits per element (3 or 4)");
  compress->add_option("--config", compress_args.config_text, "explicit C,P,K block config");
  compress->add_option("--output", compress_args.output, "output container path")->required();
  compress->add_option("--threads", compress_args.threads, "worker threads (0 = auto)");
  compress->add_option("--seed-stride", compress_args.seed_stride,
                       "search every Nth seed only (1 = exhaustive)");
  compress->add_flag("-v,--verbose", compress_args.verbose, "progress to stderr");

  CommonArgs decompress_args;
  auto* decompress = app.add_subcommand("decompress", "Reconstruct raw f32 tensors");
  decompress->add_option("input", decompress_args.input, "container path")->required();
  decompress->add_option("--output", decompress_args.output,
                         "output file (single tensor) or directory")
      ->required();
  decompress->add_option("--threads", decompress_args.threads, "worker threads (0 = auto)");

  CommonArgs stats_args;
  std::string stats_compressed;
  auto* stats = app.add_subcommand("stats", "Compare an original tensor with a container");
  stats->add_option("original", stats_args.input, "raw f32 tensor file (or use --manifest)");
  stats->add_option("compressed", stats_compressed, "container path")->required();
  stats->add_option("--shape", stats_args.shape, "shape of the original tensor");
  stats->add_option("--manifest", stats_args.manifest, "manifest pairing names to originals");
  stats->add_option("--threads", stats_args.threads, "worker threads (0 = auto)");

  SearchArgs search_args;
  auto* search = app.add_subcommand("search", "Grid-search block configs for a bit budget");
  search->add_option("--bits", search_args.bits, "bits per element budget")->required();
  search->add_option("--max-c", search_args.max_c, "largest block size to consider");
  search->add_option("--max-k", search_args.max_k, "largest LFSR length to consider");
  search->add_option("--trials", search_args.trials, "Gaussian blocks per config");
  search->add_option("--rng-seed", search_args.rng_seed, "seed for the trial generator");
  search->add_option("--threads", search_args.threads, "worker threads (0 = auto)");
  search->add_option("--seed-stride", search_args.seed_stride,
                     "candidate stride override (0 = auto)");
  search->add_option("--output", search_args.output, "write CSV here instead of stdout");

  DumpArgs dump_args;
  auto* dump = app.add_subcommand("lfsr-dump", "Print an LFSR cycle and its matrices");
  dump->add_option("--k", dump_args.k, "register length")->required();
  dump->add_option("--seed", dump_args.seed, "starting state")->required();
  dump->add_option("--rows", dump_args.rows, "matrix rows");
  dump->add_option("--cols", dump_args.cols, "matrix cols");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (compress->parsed()) return cmd_compress(compress_args);
    if (decompress->parsed()) return cmd_decompress(decompress_args);
    if (stats->parsed()) return cmd_stats(stats_args, stats_compressed);
    if (search->parsed()) return cmd_search(search_args);
    if (dump->parsed()) return cmd_lfsr_dump(dump_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
