#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "feedsim/engine.hpp"
#include "feedsim/feeds.hpp"
#include "feedsim/graph.hpp"
#include "feedsim/learners.hpp"
#include "feedsim/metrics.hpp"

namespace feedsim {

/// Either an edge-list file or synthetic generator parameters.
struct NetworkSource {
  std::optional<std::filesystem::path> edge_list;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t core = 0;
  std::uint64_t seed = 1;
  friend bool operator==(const NetworkSource&, const NetworkSource&) = default;
};

struct SweepSpec {
  NetworkSource network;
  SimConfig base;
  LearnerConfig learner;
  std::vector<Algorithm> algorithms{Algorithm::random, Algorithm::chronological,
                                    Algorithm::ncf, Algorithm::widedeep,
                                    Algorithm::minimize_rho};
  std::vector<double> prevalences{0.05, 0.15, 0.50};
  std::vector<std::int64_t> feed_lengths{30, 50, 100};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t workers = 1;
  std::filesystem::path output_dir = "feedsim_out";
  std::optional<double> target_rho;
  double rho_tolerance = 0.02;

  std::size_t run_count() const {
    return algorithms.size() * prevalences.size() * feed_lengths.size() *
           seeds.size();
  }
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

/// Parses a TOML config with [network], [simulation], [sweep] and [learner]
/// sections. Unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the key. Relative edge-list paths resolve against the
/// config file's directory.
SweepSpec parse_config(const std::filesystem::path& path);
SweepSpec parse_config_string(std::string_view text);

/// Canonical TOML for a spec; parse_config_string inverts it.
std::string serialize_config(const SweepSpec& spec);

/// One cell of the sweep's cartesian product.
struct RunKey {
  Algorithm algorithm;
  double prevalence;
  std::int64_t feed_length;
  std::uint64_t seed;
};

/// Runs in manifest order: algorithm, prevalence, feed length, seed.
std::vector<RunKey> enumerate_runs(const SweepSpec& spec);

/// `<algo>_p<prev>_n<len>_s<seed>.csv`
std::string run_file_name(const RunKey& key);

/// Hex FNV-1a of the canonical single-run config (workers and output
/// directory excluded).
std::string run_config_hash(const SweepSpec& spec, const RunKey& key);

SimConfig run_config(const SweepSpec& spec, const RunKey& key);

Network build_network(const NetworkSource& source);

std::unique_ptr<FeedRanker> make_ranker(const SimConfig& cfg,
                                        const LearnerConfig& learner,
                                        const Network& net,
                                        const TraitAssignment& traits);

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const MetricsRow> rows);

struct SweepResult {
  std::size_t runs = 0;
  std::size_t failed = 0;
  int exit_status() const { return failed == 0 ? 0 : 1; }
};

/// Runs every combination, writing one CSV per run plus manifest.tsv.
/// A failing run is recorded in the manifest and the rest continue.
SweepResult run_sweep(const SweepSpec& spec);

}  // namespace feedsim
