#include "feedsim/graph.hpp"

#include <algorithm>
#include <limits>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "feedsim/errors.hpp"
#include "feedsim/rng.hpp"

namespace feedsim {

namespace {

constexpr double kActivitySigma = 1.5;

std::uint64_t pack(NodeId a, NodeId b) {
  return (std::uint64_t{a} << 32) | b;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

Network Network::from_edges(std::size_t node_count, std::vector<Edge> edges,
                            std::vector<NodeId> core,
                            std::vector<std::int64_t> external_ids) {
  for (const Edge& e : edges) {
    if (e.follower >= node_count || e.followee >= node_count) {
      throw Error("edge endpoint out of range");
    }
    if (e.follower == e.followee) throw Error("self-loop edge");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  Network net;
  net.out_offsets_.assign(node_count + 1, 0);
  net.in_offsets_.assign(node_count + 1, 0);
  net.in_degree_.assign(node_count, 0);
  for (const Edge& e : edges) {
    ++net.out_offsets_[e.follower + 1];
    ++net.in_offsets_[e.followee + 1];
    ++net.in_degree_[e.followee];
  }
  std::partial_sum(net.out_offsets_.begin(), net.out_offsets_.end(),
                   net.out_offsets_.begin());
  std::partial_sum(net.in_offsets_.begin(), net.in_offsets_.end(),
                   net.in_offsets_.begin());

  net.out_targets_.resize(edges.size());
  net.in_sources_.resize(edges.size());
  std::vector<std::size_t> in_fill(net.in_offsets_.begin(),
                                   net.in_offsets_.end() - 1);
  // Edges are sorted by (follower, followee), so both sides come out sorted.
  for (std::size_t i = 0; i < edges.size(); ++i) {
    net.out_targets_[i] = edges[i].followee;
    net.in_sources_[in_fill[edges[i].followee]++] = edges[i].follower;
  }

  if (core.empty()) {
    for (NodeId v = 0; v < node_count; ++v) {
      if (net.out_degree(v) > 0) core.push_back(v);
    }
  }
  std::sort(core.begin(), core.end());
  core.erase(std::unique(core.begin(), core.end()), core.end());
  net.core_index_.assign(node_count, -1);
  for (std::size_t i = 0; i < core.size(); ++i) {
    if (core[i] >= node_count) throw Error("core user out of range");
    net.core_index_[core[i]] = static_cast<std::int32_t>(i);
  }
  net.core_ = std::move(core);

  if (external_ids.empty()) {
    external_ids.resize(node_count);
    std::iota(external_ids.begin(), external_ids.end(), std::int64_t{0});
  } else if (external_ids.size() != node_count) {
    throw Error("external id table size mismatch");
  }
  net.external_ids_ = std::move(external_ids);
  return net;
}

bool Network::follows(NodeId follower, NodeId followee) const {
  const auto out = followees(follower);
  return std::binary_search(out.begin(), out.end(), followee);
}

std::vector<Edge> Network::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (NodeId v = 0; v < node_count(); ++v) {
    for (NodeId w : followees(v)) out.push_back({v, w});
  }
  return out;
}

Network load_edge_list(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list: " + path.string());

  std::vector<std::pair<std::int64_t, std::int64_t>> raw;
  std::vector<std::int64_t> core_raw;
  std::size_t core_line = 0;
  LoadReport local;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      view.remove_prefix(1);
      view = trim(view);
      if (view.rfind("core:", 0) == 0) {
        view.remove_prefix(5);
        core_line = line_no;
        while (!view.empty()) {
          const auto comma = view.find(',');
          std::int64_t id = 0;
          if (!parse_int(view.substr(0, comma), id)) {
            throw ParseError("malformed core id list", line_no);
          }
          core_raw.push_back(id);
          if (comma == std::string_view::npos) break;
          view.remove_prefix(comma + 1);
        }
      }
      continue;
    }
    const auto tab = view.find('\t');
    std::int64_t a = 0;
    std::int64_t b = 0;
    if (tab == std::string_view::npos || !parse_int(view.substr(0, tab), a) ||
        !parse_int(view.substr(tab + 1), b)) {
      throw ParseError("expected follower_id<TAB>followee_id", line_no);
    }
    if (a == b) {
      local.self_loop_lines.push_back(line_no);
      continue;
    }
    raw.emplace_back(a, b);
  }
  if (raw.empty()) throw Error("no edges in " + path.string());

  std::vector<std::int64_t> ids;
  ids.reserve(raw.size() * 2);
  for (const auto& [a, b] : raw) {
    ids.push_back(a);
    ids.push_back(b);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto index_of = [&ids](std::int64_t id) -> std::optional<NodeId> {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) return std::nullopt;
    return static_cast<NodeId>(it - ids.begin());
  };

  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b] : raw) edges.push_back({*index_of(a), *index_of(b)});
  std::vector<NodeId> core;
  for (std::int64_t id : core_raw) {
    auto idx = index_of(id);
    if (!idx) {
      throw ParseError("core id " + std::to_string(id) + " has no edges",
                       core_line);
    }
    core.push_back(*idx);
  }

  const std::size_t raw_count = edges.size();
  const std::size_t node_count = ids.size();
  Network net = Network::from_edges(node_count, std::move(edges),
                                    std::move(core), std::move(ids));
  local.duplicate_edges = raw_count - net.edge_count();
  if (report) *report = std::move(local);
  return net;
}

void write_edge_list(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "#core:";
  bool first = true;
  for (NodeId v : net.core_users()) {
    out << (first ? "" : ",") << net.external_id(v);
    first = false;
  }
  out << '\n';
  for (NodeId v = 0; v < net.node_count(); ++v) {
    for (NodeId w : net.followees(v)) {
      out << net.external_id(v) << '\t' << net.external_id(w) << '\n';
    }
  }
}

Network generate_synthetic(std::size_t node_count, std::size_t edge_count,
                           std::size_t core_count, std::uint64_t seed) {
  if (core_count < 1 || core_count > node_count) {
    throw Error("need node_count >= core_count >= 1");
  }
  const double max_edges =
      static_cast<double>(node_count) * static_cast<double>(node_count - 1);
  if (static_cast<double>(edge_count) > max_edges) {
    throw Error("edge_count exceeds node_count * (node_count - 1)");
  }
  if (node_count > std::numeric_limits<NodeId>::max()) {
    throw Error("node_count too large");
  }

  Stream rng(seed, Purpose::graph, 0, 0);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edge_count * 2);
  std::vector<Edge> edges;
  edges.reserve(edge_count);

  // Out-degree quotas follow lognormal activity weights drawn independently
  // of arrival order; largest remainders make them sum to edge_count.
  std::vector<double> weight(node_count);
  double weight_sum = 0.0;
  for (auto& w : weight) {
    w = rng.lognormal(0.0, kActivitySigma);
    weight_sum += w;
  }
  std::vector<std::size_t> quota(node_count);
  std::vector<std::pair<double, NodeId>> remainder(node_count);
  std::size_t assigned = 0;
  for (NodeId v = 0; v < node_count; ++v) {
    const double share = static_cast<double>(edge_count) * weight[v] / weight_sum;
    quota[v] = static_cast<std::size_t>(share);
    assigned += quota[v];
    remainder[v] = {share - static_cast<double>(quota[v]), v};
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < edge_count && i < node_count; ++i, ++assigned) {
    ++quota[remainder[i].second];
  }
  for (auto& q : quota) q = std::min(q, node_count - 1);

  // Each node appears once for its +1 plus once per in-edge received, so a
  // uniform pick from `urn` is proportional to in-degree + 1.
  std::vector<NodeId> urn;
  urn.reserve(node_count + edge_count);
  auto attach = [&](NodeId v, std::size_t want) {
    std::size_t added = 0;
    for (std::size_t attempt = 0; added < want && attempt < 32 * want; ++attempt) {
      const NodeId w = urn[rng.below(urn.size())];
      if (w == v || !seen.insert(pack(v, w)).second) continue;
      edges.push_back({v, w});
      urn.push_back(w);
      ++added;
    }
    return added;
  };

  // Arriving nodes follow existing ones; quota that exceeds the number of
  // earlier nodes is filled once every node has arrived.
  std::vector<std::size_t> deferred(node_count, 0);
  for (NodeId v = 0; v < node_count; ++v) {
    const std::size_t now = std::min<std::size_t>(quota[v], v);
    deferred[v] = quota[v] - (now > 0 ? attach(v, now) : 0);
    urn.push_back(v);
  }
  for (NodeId v = 0; v < node_count; ++v) {
    if (deferred[v] > 0) attach(v, deferred[v]);
  }

  if (edges.size() < edge_count) {
    const std::size_t missing = edge_count - edges.size();
    const double free_pairs = max_edges - static_cast<double>(edges.size());
    if (static_cast<double>(missing) * 2.0 > free_pairs) {
      // Dense request: enumerate the complement and draw without replacement.
      std::vector<Edge> pool;
      for (NodeId a = 0; a < node_count; ++a) {
        for (NodeId b = 0; b < node_count; ++b) {
          if (a != b && !seen.contains(pack(a, b))) pool.push_back({a, b});
        }
      }
      for (std::size_t i = 0; i < missing; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        edges.push_back(pool[i]);
      }
    } else {
      while (edges.size() < edge_count) {
        const auto a = static_cast<NodeId>(rng.below(node_count));
        const auto b = static_cast<NodeId>(rng.below(node_count));
        if (a == b || !seen.insert(pack(a, b)).second) continue;
        edges.push_back({a, b});
      }
    }
  }

  std::vector<std::uint32_t> out_degree(node_count, 0);
  for (const Edge& e : edges) ++out_degree[e.follower];
  std::vector<NodeId> order(node_count);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return out_degree[a] > out_degree[b];
  });
  order.resize(core_count);
  return Network::from_edges(node_count, std::move(edges), std::move(order));
}

double degree_attribute_correlation(std::span<const std::uint32_t> in_degrees,
                                    std::span<const std::uint8_t> labels) {
  if (in_degrees.size() != labels.size() || labels.size() < 2) {
    throw Error("degree and label sequences must have equal length >= 2");
  }
  const auto n = static_cast<double>(labels.size());
  double sum_k = 0.0;
  double sum_k1 = 0.0;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum_k += in_degrees[i];
    if (labels[i]) {
      sum_k1 += in_degrees[i];
      ++ones;
    }
  }
  if (ones == 0 || ones == labels.size()) {
    throw UndefinedCorrelation("labels are constant (sigma_x = 0)");
  }
  const double mean_k = sum_k / n;
  double var_k = 0.0;
  for (std::uint32_t k : in_degrees) {
    const double d = k - mean_k;
    var_k += d * d;
  }
  var_k /= n;
  if (var_k <= 0.0) {
    throw UndefinedCorrelation("degrees are constant (sigma_k = 0)");
  }
  const double p = static_cast<double>(ones) / n;
  const double sigma_x = std::sqrt(p * (1.0 - p));
  const double sigma_k = std::sqrt(var_k);
  const double mean_k1 = sum_k1 / static_cast<double>(ones);
  return p / (sigma_x * sigma_k) * (mean_k1 - mean_k);
}

TraitAssignment assign_traits(const Network& net, double prevalence,
                              std::optional<double> target_rho,
                              double tolerance, std::uint64_t seed) {
  if (!(prevalence > 0.0 && prevalence < 1.0)) {
    throw Error("prevalence must lie in (0, 1)");
  }
  if (target_rho && std::abs(*target_rho) > 1.0) {
    throw Error("target_rho must lie in [-1, 1]");
  }
  const std::size_t n = net.node_count();
  const auto ones = static_cast<std::size_t>(
      std::llround(prevalence * static_cast<double>(n)));

  Stream rng(seed, Purpose::trait,
             static_cast<std::uint32_t>(std::llround(prevalence * 1e6)), 0);
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  for (std::size_t i = 0; i < ones; ++i) {
    std::swap(order[i], order[i + rng.below(n - i)]);
  }

  TraitAssignment out;
  out.labels.assign(n, 0);
  for (std::size_t i = 0; i < ones; ++i) out.labels[order[i]] = 1;
  out.prevalence = static_cast<double>(ones) / static_cast<double>(n);

  const auto degrees = net.in_degrees();
  try {
    out.realized_rho = degree_attribute_correlation(degrees, out.labels);
    out.rho_defined = true;
  } catch (const UndefinedCorrelation&) {
    if (target_rho) throw;
    return out;
  }
  if (!target_rho) return out;

  // rho depends on the labels only through the degree sum of the 1-labeled
  // set, so each candidate swap is scored in O(1).
  std::vector<NodeId> one_nodes(order.begin(), order.begin() + ones);
  std::vector<NodeId> zero_nodes(order.begin() + ones, order.end());
  const double dn = static_cast<double>(n);
  double sum_k = 0.0;
  for (auto k : degrees) sum_k += k;
  const double mean_k = sum_k / dn;
  double var_k = 0.0;
  for (auto k : degrees) var_k += (k - mean_k) * (k - mean_k);
  const double sigma_k = std::sqrt(var_k / dn);
  const double p = out.prevalence;
  const double coef = p / (std::sqrt(p * (1.0 - p)) * sigma_k);
  const double dones = static_cast<double>(ones);
  double sum_k1 = 0.0;
  for (NodeId v : one_nodes) sum_k1 += degrees[v];
  auto rho_of = [&](double s1) { return coef * (s1 / dones - mean_k); };

  const std::size_t budget = n * 20;
  double error = std::abs(rho_of(sum_k1) - *target_rho);
  std::size_t step = 0;
  for (; step < budget && error > tolerance; ++step) {
    double best_error = error;
    std::size_t best_i = 0;
    std::size_t best_j = 0;
    bool found = false;
    for (int c = 0; c < 32; ++c) {
      const std::size_t i = rng.below(one_nodes.size());
      const std::size_t j = rng.below(zero_nodes.size());
      const double s1 = sum_k1 - degrees[one_nodes[i]] + degrees[zero_nodes[j]];
      const double e = std::abs(rho_of(s1) - *target_rho);
      if (e < best_error) {
        best_error = e;
        best_i = i;
        best_j = j;
        found = true;
      }
    }
    if (!found) continue;
    sum_k1 += static_cast<double>(degrees[zero_nodes[best_j]]) -
              static_cast<double>(degrees[one_nodes[best_i]]);
    out.labels[one_nodes[best_i]] = 0;
    out.labels[zero_nodes[best_j]] = 1;
    std::swap(one_nodes[best_i], zero_nodes[best_j]);
    error = best_error;
  }
  out.realized_rho = degree_attribute_correlation(degrees, out.labels);
  out.converged = std::abs(out.realized_rho - *target_rho) <= tolerance;
  return out;
}

void write_traits(const Network& net, const TraitAssignment& traits,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (NodeId v = 0; v < net.node_count(); ++v) {
    out << net.external_id(v) << '\t' << int{traits.labels[v]} << '\n';
  }
}

TraitAssignment load_traits(const Network& net,
                            const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file: " + path.string());
  std::unordered_map<std::int64_t, NodeId> index;
  for (NodeId v = 0; v < net.node_count(); ++v) index[net.external_id(v)] = v;

  TraitAssignment out;
  out.labels.assign(net.node_count(), 0);
  std::vector<std::uint8_t> assigned(net.node_count(), 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto tab = view.find('\t');
    std::int64_t id = 0;
    std::int64_t label = 0;
    if (tab == std::string_view::npos || !parse_int(view.substr(0, tab), id) ||
        !parse_int(view.substr(tab + 1), label) || (label != 0 && label != 1)) {
      throw ParseError("expected node_id<TAB>label", line_no);
    }
    auto it = index.find(id);
    if (it == index.end()) throw ParseError("unknown node id", line_no);
    out.labels[it->second] = static_cast<std::uint8_t>(label);
    assigned[it->second] = 1;
  }
  if (std::find(assigned.begin(), assigned.end(), 0) != assigned.end()) {
    throw Error("label file does not cover every node");
  }
  const auto ones = std::count(out.labels.begin(), out.labels.end(), 1);
  out.prevalence =
      static_cast<double>(ones) / static_cast<double>(net.node_count());
  try {
    out.realized_rho = degree_attribute_correlation(net.in_degrees(), out.labels);
    out.rho_defined = true;
  } catch (const UndefinedCorrelation&) {
    out.rho_defined = false;
  }
  return out;
}

}  // namespace feedsim
