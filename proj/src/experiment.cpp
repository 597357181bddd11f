#include "feedsim/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <toml.hpp>

#include "feedsim/errors.hpp"
#include "feedsim/parallel.hpp"

namespace feedsim {

namespace {

const toml::table* section(const toml::table& root, std::string_view name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw ConfigError(std::string(name), "must be a table");
  return node->as_table();
}

void check_keys(const toml::table& tbl, const std::string& prefix,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : tbl) {
    if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
      throw ConfigError(prefix + std::string(key.str()), "unknown key");
    }
  }
}

std::string dotted(std::string_view sec, std::string_view key) {
  return std::string(sec) + "." + std::string(key);
}

std::optional<std::int64_t> read_int(const toml::table& tbl, std::string_view sec,
                                     std::string_view key) {
  const toml::node* node = tbl.get(key);
  if (!node) return std::nullopt;
  if (auto v = node->value_exact<std::int64_t>()) return *v;
  throw ConfigError(dotted(sec, key), "expected an integer");
}

std::optional<std::uint64_t> read_count(const toml::table& tbl,
                                        std::string_view sec,
                                        std::string_view key) {
  auto v = read_int(tbl, sec, key);
  if (v && *v < 0) throw ConfigError(dotted(sec, key), "must be >= 0");
  if (!v) return std::nullopt;
  return static_cast<std::uint64_t>(*v);
}

double as_real(const toml::node& node, const std::string& key) {
  if (auto v = node.value_exact<double>()) return *v;
  if (auto v = node.value_exact<std::int64_t>()) return static_cast<double>(*v);
  throw ConfigError(key, "expected a number");
}

std::optional<double> read_real(const toml::table& tbl, std::string_view sec,
                                std::string_view key) {
  const toml::node* node = tbl.get(key);
  if (!node) return std::nullopt;
  return as_real(*node, dotted(sec, key));
}

std::optional<bool> read_bool(const toml::table& tbl, std::string_view sec,
                              std::string_view key) {
  const toml::node* node = tbl.get(key);
  if (!node) return std::nullopt;
  if (auto v = node->value_exact<bool>()) return *v;
  throw ConfigError(dotted(sec, key), "expected a boolean");
}

std::optional<std::string> read_string(const toml::table& tbl,
                                       std::string_view sec,
                                       std::string_view key) {
  const toml::node* node = tbl.get(key);
  if (!node) return std::nullopt;
  if (auto v = node->value_exact<std::string>()) return *v;
  throw ConfigError(dotted(sec, key), "expected a string");
}

const toml::array* read_array(const toml::table& tbl, std::string_view sec,
                              std::string_view key) {
  const toml::node* node = tbl.get(key);
  if (!node) return nullptr;
  if (!node->is_array()) throw ConfigError(dotted(sec, key), "expected an array");
  if (node->as_array()->empty()) {
    throw ConfigError(dotted(sec, key), "must not be empty");
  }
  return node->as_array();
}

template <class T>
void assign(T& field, const std::optional<T>& v) {
  if (v) field = *v;
}

void parse_network(const toml::table& root, SweepSpec& spec) {
  const toml::table* tbl = section(root, "network");
  if (!tbl) throw ConfigError("network", "missing required section");
  check_keys(*tbl, "network.", {"edge_list", "nodes", "edges", "core", "seed"});
  NetworkSource& net = spec.network;
  if (auto path = read_string(*tbl, "network", "edge_list")) net.edge_list = *path;
  auto nodes = read_count(*tbl, "network", "nodes");
  auto edges = read_count(*tbl, "network", "edges");
  auto core = read_count(*tbl, "network", "core");
  assign(net.seed, read_count(*tbl, "network", "seed"));
  if (net.edge_list) {
    if (nodes || edges || core) {
      throw ConfigError("network.edge_list",
                        "cannot be combined with synthetic sizes");
    }
    return;
  }
  if (!nodes) throw ConfigError("network.nodes", "missing required key");
  if (!edges) throw ConfigError("network.edges", "missing required key");
  if (!core) throw ConfigError("network.core", "missing required key");
  net.nodes = *nodes;
  net.edges = *edges;
  net.core = *core;
  if (net.nodes < 2) throw ConfigError("network.nodes", "must be >= 2");
  if (net.core < 1 || net.core > net.nodes) {
    throw ConfigError("network.core", "must lie in [1, nodes]");
  }
  if (static_cast<double>(net.edges) >
      static_cast<double>(net.nodes) * static_cast<double>(net.nodes - 1)) {
    throw ConfigError("network.edges", "exceeds nodes * (nodes - 1)");
  }
}

void parse_simulation(const toml::table& root, SweepSpec& spec) {
  const toml::table* tbl = section(root, "simulation");
  if (!tbl) return;
  check_keys(*tbl, "simulation.",
             {"ticks", "reset_tick", "activation_prob", "lognormal_mu",
              "lognormal_sigma", "like_prob_same", "like_prob_diff",
              "candidate_window", "minimize_rho"});
  SimConfig& c = spec.base;
  const std::string_view s = "simulation";
  if (auto v = read_int(*tbl, s, "ticks")) c.ticks = static_cast<std::int32_t>(*v);
  if (auto v = read_int(*tbl, s, "reset_tick")) c.reset_tick = static_cast<std::int32_t>(*v);
  if (auto v = read_int(*tbl, s, "candidate_window")) {
    c.candidate_window = static_cast<std::int32_t>(*v);
  }
  assign(c.activation_prob, read_real(*tbl, s, "activation_prob"));
  assign(c.lognormal_mu, read_real(*tbl, s, "lognormal_mu"));
  assign(c.lognormal_sigma, read_real(*tbl, s, "lognormal_sigma"));
  assign(c.like_prob_same, read_real(*tbl, s, "like_prob_same"));
  assign(c.like_prob_diff, read_real(*tbl, s, "like_prob_diff"));
  if (const toml::node* node = tbl->get("minimize_rho")) {
    if (!node->is_table()) {
      throw ConfigError("simulation.minimize_rho", "must be a table");
    }
    check_keys(*node->as_table(), "simulation.minimize_rho.", {"static"});
    assign(c.minimize_rho_static,
           read_bool(*node->as_table(), "simulation.minimize_rho", "static"));
  }
}

void parse_sweep(const toml::table& root, SweepSpec& spec) {
  const toml::table* tbl = section(root, "sweep");
  if (!tbl) return;
  check_keys(*tbl, "sweep.",
             {"algorithms", "prevalences", "feed_lengths", "seeds", "workers",
              "output_dir", "target_rho", "rho_tolerance"});
  const std::string_view s = "sweep";
  if (const toml::array* arr = read_array(*tbl, s, "algorithms")) {
    spec.algorithms.clear();
    for (const toml::node& node : *arr) {
      auto name = node.value_exact<std::string>();
      auto algo = name ? parse_algorithm(*name) : std::nullopt;
      if (!algo) {
        throw ConfigError("sweep.algorithms",
                          "expected random | chronological | ncf | widedeep | "
                          "minimize_rho");
      }
      spec.algorithms.push_back(*algo);
    }
  }
  if (const toml::array* arr = read_array(*tbl, s, "prevalences")) {
    spec.prevalences.clear();
    for (const toml::node& node : *arr) {
      spec.prevalences.push_back(as_real(node, "sweep.prevalences"));
    }
  }
  if (const toml::array* arr = read_array(*tbl, s, "feed_lengths")) {
    spec.feed_lengths.clear();
    for (const toml::node& node : *arr) {
      auto v = node.value_exact<std::int64_t>();
      if (!v) throw ConfigError("sweep.feed_lengths", "expected integers");
      spec.feed_lengths.push_back(*v);
    }
  }
  if (const toml::array* arr = read_array(*tbl, s, "seeds")) {
    spec.seeds.clear();
    for (const toml::node& node : *arr) {
      auto v = node.value_exact<std::int64_t>();
      if (!v || *v < 0) throw ConfigError("sweep.seeds", "expected integers >= 0");
      spec.seeds.push_back(static_cast<std::uint64_t>(*v));
    }
  }
  if (auto v = read_int(*tbl, s, "workers")) {
    if (*v < 1) throw ConfigError("sweep.workers", "must be >= 1");
    spec.workers = static_cast<std::size_t>(*v);
  }
  if (auto v = read_string(*tbl, s, "output_dir")) spec.output_dir = *v;
  if (auto v = read_real(*tbl, s, "target_rho")) {
    if (std::abs(*v) > 1.0) throw ConfigError("sweep.target_rho", "must lie in [-1, 1]");
    spec.target_rho = *v;
  }
  if (auto v = read_real(*tbl, s, "rho_tolerance")) {
    if (!(*v > 0.0)) throw ConfigError("sweep.rho_tolerance", "must be > 0");
    spec.rho_tolerance = *v;
  }
}

void parse_learner(const toml::table& root, SweepSpec& spec) {
  const toml::table* tbl = section(root, "learner");
  if (!tbl) return;
  check_keys(*tbl, "learner.",
             {"embedding_dim", "mlp_layers", "epochs_per_tick", "learning_rate",
              "focal_alpha", "focal_gamma", "batch_size", "init_scale"});
  LearnerConfig& l = spec.learner;
  const std::string_view s = "learner";
  assign(l.embedding_dim, read_int(*tbl, s, "embedding_dim"));
  assign(l.epochs_per_tick, read_int(*tbl, s, "epochs_per_tick"));
  assign(l.batch_size, read_int(*tbl, s, "batch_size"));
  assign(l.learning_rate, read_real(*tbl, s, "learning_rate"));
  assign(l.focal_alpha, read_real(*tbl, s, "focal_alpha"));
  assign(l.focal_gamma, read_real(*tbl, s, "focal_gamma"));
  assign(l.init_scale, read_real(*tbl, s, "init_scale"));
  if (const toml::array* arr = read_array(*tbl, s, "mlp_layers")) {
    l.mlp_layers.clear();
    for (const toml::node& node : *arr) {
      auto v = node.value_exact<std::int64_t>();
      if (!v) throw ConfigError("learner.mlp_layers", "expected integers");
      l.mlp_layers.push_back(*v);
    }
  }
}

void validate(const SweepSpec& spec) {
  spec.learner.validate();
  for (double p : spec.prevalences) {
    if (!(p > 0.0 && p < 1.0)) {
      throw ConfigError("sweep.prevalences", "values must lie in (0, 1)");
    }
  }
  for (auto n : spec.feed_lengths) {
    if (n < 1) throw ConfigError("sweep.feed_lengths", "values must be >= 1");
  }
  for (auto seed : spec.seeds) {
    if (seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw ConfigError("sweep.seeds", "values must fit a signed 64-bit integer");
    }
  }
  SimConfig probe = spec.base;
  probe.prevalence = spec.prevalences.front();
  probe.feed_length = spec.feed_lengths.front();
  probe.validate();
}

std::string format_prevalence(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

SweepSpec parse_config_string(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError("config", msg.str());
  }
  for (const auto& [key, value] : root) {
    const auto k = key.str();
    if (k != "network" && k != "simulation" && k != "sweep" && k != "learner") {
      throw ConfigError(std::string(k), "unknown key");
    }
  }
  SweepSpec spec;
  parse_network(root, spec);
  parse_simulation(root, spec);
  parse_sweep(root, spec);
  parse_learner(root, spec);
  validate(spec);
  return spec;
}

SweepSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  SweepSpec spec = parse_config_string(buffer.str());
  if (spec.network.edge_list && spec.network.edge_list->is_relative()) {
    spec.network.edge_list =
        (path.parent_path() / *spec.network.edge_list).lexically_normal();
  }
  return spec;
}

std::string serialize_config(const SweepSpec& spec) {
  toml::table network;
  if (spec.network.edge_list) {
    network.insert("edge_list", spec.network.edge_list->string());
  } else {
    network.insert("nodes", static_cast<std::int64_t>(spec.network.nodes));
    network.insert("edges", static_cast<std::int64_t>(spec.network.edges));
    network.insert("core", static_cast<std::int64_t>(spec.network.core));
  }
  network.insert("seed", static_cast<std::int64_t>(spec.network.seed));

  const SimConfig& c = spec.base;
  toml::table simulation{
      {"ticks", c.ticks},
      {"reset_tick", c.reset_tick},
      {"activation_prob", c.activation_prob},
      {"lognormal_mu", c.lognormal_mu},
      {"lognormal_sigma", c.lognormal_sigma},
      {"like_prob_same", c.like_prob_same},
      {"like_prob_diff", c.like_prob_diff},
      {"candidate_window", c.candidate_window},
      {"minimize_rho", toml::table{{"static", c.minimize_rho_static}}},
  };

  toml::array algorithms;
  for (Algorithm a : spec.algorithms) algorithms.push_back(std::string(to_string(a)));
  toml::array prevalences;
  for (double p : spec.prevalences) prevalences.push_back(p);
  toml::array lengths;
  for (auto n : spec.feed_lengths) lengths.push_back(n);
  toml::array seeds;
  for (auto s : spec.seeds) seeds.push_back(static_cast<std::int64_t>(s));
  toml::table sweep{
      {"algorithms", algorithms},
      {"prevalences", prevalences},
      {"feed_lengths", lengths},
      {"seeds", seeds},
      {"workers", static_cast<std::int64_t>(spec.workers)},
      {"output_dir", spec.output_dir.string()},
      {"rho_tolerance", spec.rho_tolerance},
  };
  if (spec.target_rho) sweep.insert("target_rho", *spec.target_rho);

  const LearnerConfig& l = spec.learner;
  toml::array layers;
  for (auto w : l.mlp_layers) layers.push_back(w);
  toml::table learner{
      {"embedding_dim", l.embedding_dim},
      {"mlp_layers", layers},
      {"epochs_per_tick", l.epochs_per_tick},
      {"learning_rate", l.learning_rate},
      {"focal_alpha", l.focal_alpha},
      {"focal_gamma", l.focal_gamma},
      {"batch_size", l.batch_size},
      {"init_scale", l.init_scale},
  };

  toml::table root{{"network", network},
                   {"simulation", simulation},
                   {"sweep", sweep},
                   {"learner", learner}};
  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

std::vector<RunKey> enumerate_runs(const SweepSpec& spec) {
  std::vector<RunKey> keys;
  keys.reserve(spec.run_count());
  for (Algorithm a : spec.algorithms) {
    for (double p : spec.prevalences) {
      for (auto n : spec.feed_lengths) {
        for (auto s : spec.seeds) keys.push_back({a, p, n, s});
      }
    }
  }
  return keys;
}

std::string run_file_name(const RunKey& key) {
  return std::string(to_string(key.algorithm)) + "_p" +
         format_prevalence(key.prevalence) + "_n" +
         std::to_string(key.feed_length) + "_s" + std::to_string(key.seed) +
         ".csv";
}

std::string run_config_hash(const SweepSpec& spec, const RunKey& key) {
  SweepSpec single = spec;
  single.algorithms = {key.algorithm};
  single.prevalences = {key.prevalence};
  single.feed_lengths = {key.feed_length};
  single.seeds = {key.seed};
  single.workers = 1;
  single.output_dir = "";
  return fnv1a_hex(serialize_config(single));
}

SimConfig run_config(const SweepSpec& spec, const RunKey& key) {
  SimConfig cfg = spec.base;
  cfg.algorithm = key.algorithm;
  cfg.prevalence = key.prevalence;
  cfg.feed_length = key.feed_length;
  cfg.seed = key.seed;
  return cfg;
}

Network build_network(const NetworkSource& source) {
  if (source.edge_list) return load_edge_list(*source.edge_list);
  return generate_synthetic(source.nodes, source.edges, source.core, source.seed);
}

std::unique_ptr<FeedRanker> make_ranker(const SimConfig& cfg,
                                        const LearnerConfig& learner,
                                        const Network& net,
                                        const TraitAssignment& traits) {
  LearnerConfig lc = learner;
  lc.seed = cfg.seed;
  switch (cfg.algorithm) {
    case Algorithm::random:
      return std::make_unique<RandomRanker>();
    case Algorithm::chronological:
      return std::make_unique<ChronologicalRanker>();
    case Algorithm::minimize_rho:
      return std::make_unique<MinimizeRhoRanker>(cfg.minimize_rho_static);
    case Algorithm::ncf:
      return std::make_unique<NcfRanker>(
          "ncf",
          NcfModel<double>(NcfParams<double>::initialized(net.node_count(), lc),
                           traits),
          lc);
    case Algorithm::widedeep:
      return std::make_unique<WideDeepRanker>(
          "widedeep",
          WideDeepModel<double>(
              WideDeepParams<double>::initialized(net.node_count(), lc), traits),
          lc);
  }
  throw Error("unknown algorithm");
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const MetricsRow& row : rows) out << format_csv_row(row) << '\n';
}

SweepResult run_sweep(const SweepSpec& spec) {
  validate(spec);
  const Network net = build_network(spec.network);
  std::filesystem::create_directories(spec.output_dir);

  // One trait assignment per (seed, prevalence), shared by all algorithms.
  std::map<std::pair<std::uint64_t, double>, TraitAssignment> traits;
  for (auto seed : spec.seeds) {
    for (double p : spec.prevalences) {
      traits.try_emplace({seed, p}, assign_traits(net, p, spec.target_rho,
                                                  spec.rho_tolerance, seed));
    }
  }

  const std::vector<RunKey> keys = enumerate_runs(spec);
  struct Outcome {
    bool ok = false;
    std::string message;
  };
  std::vector<Outcome> outcomes(keys.size());
  const std::size_t run_threads = std::max<std::size_t>(
      1, std::min(spec.workers, keys.size()));
  const std::size_t inner_workers =
      std::max<std::size_t>(1, spec.workers / run_threads);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      const RunKey& key = keys[i];
      const auto path = spec.output_dir / run_file_name(key);
      try {
        SimConfig cfg = run_config(spec, key);
        cfg.workers = inner_workers;
        const TraitAssignment& labels = traits.at({key.seed, key.prevalence});
        auto ranker = make_ranker(cfg, spec.learner, net, labels);
        const auto rows = run_simulation(net, labels, *ranker, cfg);
        write_metrics_csv(path, rows);
        outcomes[i].ok = true;
      } catch (const std::exception& e) {
        std::error_code ec;
        std::filesystem::remove(path, ec);
        outcomes[i].message = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < run_threads; ++t) pool.emplace_back(worker);
  }

  SweepResult result;
  result.runs = keys.size();
  std::ofstream manifest(spec.output_dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw Error("cannot write manifest in " + spec.output_dir.string());
  manifest << "run\talgorithm\tprevalence\tfeed_length\tseed\tstatus\tfile\t"
              "config_hash\tmessage\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const RunKey& key = keys[i];
    if (!outcomes[i].ok) ++result.failed;
    std::string message = outcomes[i].message;
    std::replace(message.begin(), message.end(), '\t', ' ');
    std::replace(message.begin(), message.end(), '\n', ' ');
    manifest << i << '\t' << to_string(key.algorithm) << '\t'
             << format_prevalence(key.prevalence) << '\t' << key.feed_length
             << '\t' << key.seed << '\t' << (outcomes[i].ok ? "ok" : "failed")
             << '\t' << run_file_name(key) << '\t'
             << run_config_hash(spec, key) << '\t' << message << '\n';
  }
  return result;
}

}  // namespace feedsim
