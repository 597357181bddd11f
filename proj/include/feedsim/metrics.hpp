#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include "feedsim/graph.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

struct SimState;
struct SimConfig;

/// Per-viewer count of how often each author was observed. This is the
/// viewer's observed network: keys are (possibly de facto) edges, counts are
/// perceived in-degrees and attention weights.
class ObservationLedger {
 public:
  using Counts = std::unordered_map<NodeId, std::uint32_t>;

  ObservationLedger() = default;
  explicit ObservationLedger(NodeId viewer) : viewer_(viewer) {}

  void record_exposure(NodeId author) {
    ++counts_[author];
    ++total_;
  }
  void clear() {
    counts_.clear();
    total_ = 0;
  }

  NodeId viewer() const noexcept { return viewer_; }
  std::uint32_t count(NodeId author) const {
    auto it = counts_.find(author);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const noexcept { return total_; }
  std::size_t distinct() const noexcept { return counts_.size(); }
  const Counts& counts() const noexcept { return counts_; }

  /// Share of the viewer's observations that went to `author`.
  double attention(NodeId author) const {
    return total_ == 0 ? 0.0
                       : static_cast<double>(count(author)) /
                             static_cast<double>(total_);
  }

 private:
  NodeId viewer_ = 0;
  Counts counts_;
  std::uint64_t total_ = 0;
};

/// Mean over viewers with observations of the attention-weighted fraction of
/// observed authors carrying x = 1, minus `prevalence`. Empty when no viewer
/// has observed anything.
std::optional<double> local_bias(std::span<const ObservationLedger> ledgers,
                                 const TraitAssignment& traits,
                                 double prevalence);

/// Gini coefficient sum((2i - n - 1) x_i) / (n sum x) over ascending counts.
/// Empty when the counts sum to zero.
std::optional<double> gini(std::span<const std::uint64_t> counts);

/// Gini over the pooled (viewer, author) observation counts of all ledgers.
std::optional<double> pooled_gini(std::span<const ObservationLedger> ledgers);

/// Cumulative liked share of impressions at positions < k, averaged over
/// viewers that had at least one such impression through `up_to_tick`.
std::optional<double> precision_at_k(std::span<const RankedFeed> feeds,
                                     std::span<const Like> likes,
                                     std::size_t k, std::int32_t up_to_tick);

/// Running per-viewer precision counters for the two reported cutoffs.
struct PrecisionTally {
  static constexpr std::array<std::size_t, 2> kCutoffs{10, 30};
  std::array<std::uint64_t, 2> impressions{};
  std::array<std::uint64_t, 2> liked{};
};

std::optional<double> precision_from_tallies(
    std::span<const PrecisionTally> tallies, std::size_t cutoff_index);

struct MetricsRow {
  std::int32_t tick = 0;
  std::string algorithm;
  std::int64_t feed_length = 0;
  double prevalence = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> b_local;
  std::optional<double> gini;
  std::optional<double> precision_at_10;
  std::optional<double> precision_at_30;
  std::uint64_t unique_edges_seen = 0;
  double mean_likes_given = 0.0;
  std::optional<double> mean_likes_received;
};

/// All per-tick measurements, read from the state after the serve phase.
MetricsRow aggregate_row(const SimState& state, const SimConfig& cfg,
                         const Network& net, const TraitAssignment& traits);

inline constexpr const char* kCsvHeader =
    "tick,algorithm,feed_length,prevalence,seed,b_local,gini,"
    "precision_at_10,precision_at_30,unique_edges_seen,mean_likes_given,"
    "mean_likes_received";

/// One CSV record, six decimals for reals, `NA` for undefined metrics.
std::string format_csv_row(const MetricsRow& row);

}  // namespace feedsim
