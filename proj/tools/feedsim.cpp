#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "feedsim/errors.hpp"
#include "feedsim/experiment.hpp"
#include "feedsim/graph.hpp"

namespace {

constexpr int kConfigError = 2;

int run(const std::string& config, std::optional<std::size_t> workers,
        std::optional<std::string> out) {
  feedsim::SweepSpec spec = feedsim::parse_config(config);
  if (workers) {
    if (*workers < 1) throw feedsim::ConfigError("sweep.workers", "must be >= 1");
    spec.workers = *workers;
  }
  if (out) spec.output_dir = *out;
  const feedsim::SweepResult result = feedsim::run_sweep(spec);
  std::fprintf(stderr, "%zu runs, %zu failed; see %s\n", result.runs,
               result.failed, (spec.output_dir / "manifest.tsv").c_str());
  return result.exit_status();
}

int validate(const std::string& config) {
  const feedsim::SweepSpec spec = feedsim::parse_config(config);
  std::printf("ok: %zu runs\n", spec.run_count());
  return 0;
}

int gen_network(std::size_t nodes, std::size_t edges, std::size_t core,
                std::uint64_t seed, const std::string& out) {
  if (nodes < 2) throw feedsim::ConfigError("nodes", "must be >= 2");
  if (core < 1 || core > nodes) throw feedsim::ConfigError("core", "must lie in [1, nodes]");
  if (static_cast<double>(edges) >
      static_cast<double>(nodes) * static_cast<double>(nodes - 1)) {
    throw feedsim::ConfigError("edges", "exceeds nodes * (nodes - 1)");
  }
  const feedsim::Network net = feedsim::generate_synthetic(nodes, edges, core, seed);
  feedsim::write_edge_list(net, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent-based feed ranking simulator"};
  app.require_subcommand(1);

  std::string config;
  std::size_t workers = 0;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "Run a parameter sweep");
  run_cmd->add_option("--config", config, "TOML config")->required();
  auto* workers_opt = run_cmd->add_option("--workers", workers, "Worker threads");
  auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory");

  auto* validate_cmd = app.add_subcommand("validate", "Parse and check a config");
  validate_cmd->add_option("--config", config, "TOML config")->required();

  std::size_t nodes = 0, edges = 0, core = 0;
  std::uint64_t seed = 1;
  std::string edges_out;
  auto* gen_cmd = app.add_subcommand("gen-network", "Write a synthetic follow graph");
  gen_cmd->add_option("--nodes", nodes)->required();
  gen_cmd->add_option("--edges", edges)->required();
  gen_cmd->add_option("--core", core)->required();
  gen_cmd->add_option("--seed", seed);
  gen_cmd->add_option("--out", edges_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) {
      std::optional<std::size_t> w;
      if (*workers_opt) w = workers;
      std::optional<std::string> o;
      if (*out_opt) o = out_dir;
      return run(config, w, o);
    }
    if (*validate_cmd) return validate(config);
    return gen_network(nodes, edges, core, seed, edges_out);
  } catch (const feedsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const feedsim::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
