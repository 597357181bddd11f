#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace feedsim {

/// Dense node index in [0, node_count).
using NodeId = std::uint32_t;

/// A directed follow edge: `follower` sees content authored by `followee`.
struct Edge {
  NodeId follower;
  NodeId followee;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable directed follow graph in CSR form (both directions).
///
/// Nodes are dense indices; `external_id(v)` keeps the identifier used by the
/// source file so that written edge lists match the input naming.
class Network {
 public:
  Network() = default;

  /// Builds a network from possibly duplicated edges. Self-loops and
  /// out-of-range endpoints throw; duplicates are dropped. When `core` is
  /// empty, every node with out-degree >= 1 is a core user.
  static Network from_edges(std::size_t node_count, std::vector<Edge> edges,
                            std::vector<NodeId> core = {},
                            std::vector<std::int64_t> external_ids = {});

  std::size_t node_count() const noexcept { return in_degree_.size(); }
  std::size_t edge_count() const noexcept { return out_targets_.size(); }

  /// Accounts `v` follows, ascending.
  std::span<const NodeId> followees(NodeId v) const {
    return {out_targets_.data() + out_offsets_[v],
            out_offsets_[v + 1] - out_offsets_[v]};
  }
  /// Accounts following `v`, ascending.
  std::span<const NodeId> followers(NodeId v) const {
    return {in_sources_.data() + in_offsets_[v],
            in_offsets_[v + 1] - in_offsets_[v]};
  }
  bool follows(NodeId follower, NodeId followee) const;

  std::uint32_t in_degree(NodeId v) const { return in_degree_[v]; }
  std::uint32_t out_degree(NodeId v) const {
    return static_cast<std::uint32_t>(out_offsets_[v + 1] - out_offsets_[v]);
  }
  std::span<const std::uint32_t> in_degrees() const { return in_degree_; }

  /// Core users in ascending order.
  std::span<const NodeId> core_users() const { return core_; }
  /// Position of `v` in core_users(), or -1.
  std::int32_t core_index(NodeId v) const { return core_index_[v]; }
  bool is_core(NodeId v) const { return core_index_[v] >= 0; }

  double mean_in_degree() const {
    return node_count() == 0 ? 0.0
                             : static_cast<double>(edge_count()) /
                                   static_cast<double>(node_count());
  }

  std::int64_t external_id(NodeId v) const { return external_ids_[v]; }

  /// All edges ordered by (follower, followee).
  std::vector<Edge> edges() const;

 private:
  std::vector<std::size_t> out_offsets_;
  std::vector<NodeId> out_targets_;
  std::vector<std::size_t> in_offsets_;
  std::vector<NodeId> in_sources_;
  std::vector<std::uint32_t> in_degree_;
  std::vector<NodeId> core_;
  std::vector<std::int32_t> core_index_;
  std::vector<std::int64_t> external_ids_;
};

/// Lines skipped while loading an edge list.
struct LoadReport {
  std::vector<std::size_t> self_loop_lines;
  std::size_t duplicate_edges = 0;
};

/// Reads `follower<TAB>followee` lines. A `#core: a,b,c` header declares the
/// core set; other `#` lines are comments. Throws ParseError on malformed
/// lines and Error on an empty edge set.
Network load_edge_list(const std::filesystem::path& path,
                       LoadReport* report = nullptr);

/// Writes the edge list with a `#core:` header, using external ids.
void write_edge_list(const Network& net, const std::filesystem::path& path);

/// Directed preferential attachment: each node's followees are drawn with
/// probability proportional to in-degree + 1 as it arrives. Out-degrees are
/// quotas from lognormal(0, 1.5) activity weights, independent of arrival
/// order. Uniform random edges top up to exactly `edge_count`. Core users
/// are the `core_count` nodes with highest out-degree (lower id wins ties).
Network generate_synthetic(std::size_t node_count, std::size_t edge_count,
                           std::size_t core_count, std::uint64_t seed);

struct TraitAssignment {
  std::vector<std::uint8_t> labels;
  double prevalence = 0.0;  // realized fraction of 1-labels
  double realized_rho = 0.0;
  bool rho_defined = false;
  bool converged = true;

  std::uint8_t label(NodeId v) const { return labels[v]; }
};

/// Degree-attribute correlation
///   rho = P(x=1) / (sigma_x sigma_k) * (<k>_{x=1} - <k>)
/// with population standard deviations. Throws UndefinedCorrelation when
/// either variable is constant.
double degree_attribute_correlation(std::span<const std::uint32_t> in_degrees,
                                    std::span<const std::uint8_t> labels);

/// Labels exactly round(prevalence * N) nodes with 1. With a target, runs a
/// greedy swap search (32 sampled pairs per step, N * 20 steps) until the
/// realized correlation is within `tolerance`; `converged` reports whether it
/// got there.
TraitAssignment assign_traits(const Network& net, double prevalence,
                              std::optional<double> target_rho,
                              double tolerance, std::uint64_t seed);

/// `node_id<TAB>label` lines, external ids.
void write_traits(const Network& net, const TraitAssignment& traits,
                  const std::filesystem::path& path);
/// Reads a label file written by write_traits against the same network.
TraitAssignment load_traits(const Network& net,
                            const std::filesystem::path& path);

}  // namespace feedsim
