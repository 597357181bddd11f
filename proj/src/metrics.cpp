#include "feedsim/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>
#include <vector>

#include "feedsim/engine.hpp"

namespace feedsim {

std::optional<double> local_bias(std::span<const ObservationLedger> ledgers,
                                 const TraitAssignment& traits,
                                 double prevalence) {
  double sum = 0.0;
  std::size_t viewers = 0;
  for (const ObservationLedger& ledger : ledgers) {
    if (ledger.total() == 0) continue;
    std::uint64_t active = 0;
    for (const auto& [author, count] : ledger.counts()) {
      if (traits.label(author)) active += count;
    }
    sum += static_cast<double>(active) / static_cast<double>(ledger.total());
    ++viewers;
  }
  if (viewers == 0) return std::nullopt;
  return sum / static_cast<double>(viewers) - prevalence;
}

std::optional<double> gini(std::span<const std::uint64_t> counts) {
  std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<std::int64_t>(sorted.size());
  // Integer accumulation keeps the value exact up to the final division.
  __int128 numerator = 0;
  __int128 total = 0;
  for (std::int64_t i = 1; i <= n; ++i) {
    const auto x = static_cast<__int128>(sorted[static_cast<std::size_t>(i - 1)]);
    numerator += (2 * i - n - 1) * x;
    total += x;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(numerator) /
         (static_cast<double>(n) * static_cast<double>(total));
}

std::optional<double> pooled_gini(std::span<const ObservationLedger> ledgers) {
  std::vector<std::uint64_t> pooled;
  for (const ObservationLedger& ledger : ledgers) {
    for (const auto& entry : ledger.counts()) pooled.push_back(entry.second);
  }
  return gini(pooled);
}

std::optional<double> precision_at_k(std::span<const RankedFeed> feeds,
                                     std::span<const Like> likes,
                                     std::size_t k, std::int32_t up_to_tick) {
  auto key = [](NodeId viewer, TweetId tweet) {
    return (std::uint64_t{viewer} << 32) | tweet;
  };
  std::unordered_set<std::uint64_t> liked;
  for (const Like& l : likes) {
    if (l.tick <= up_to_tick) liked.insert(key(l.viewer, l.tweet));
  }
  struct Tally {
    std::uint64_t shown = 0;
    std::uint64_t hit = 0;
  };
  std::vector<NodeId> order;
  std::unordered_map<NodeId, Tally> per_viewer;
  for (const RankedFeed& feed : feeds) {
    if (feed.tick > up_to_tick) continue;
    const std::size_t top = std::min(k, feed.positions.size());
    if (top == 0) continue;
    auto [it, inserted] = per_viewer.try_emplace(feed.viewer);
    if (inserted) order.push_back(feed.viewer);
    for (std::size_t p = 0; p < top; ++p) {
      ++it->second.shown;
      if (liked.contains(key(feed.viewer, feed.positions[p]))) ++it->second.hit;
    }
  }
  if (order.empty()) return std::nullopt;
  std::sort(order.begin(), order.end());
  double sum = 0.0;
  for (NodeId v : order) {
    const Tally& t = per_viewer[v];
    sum += static_cast<double>(t.hit) / static_cast<double>(t.shown);
  }
  return sum / static_cast<double>(order.size());
}

std::optional<double> precision_from_tallies(
    std::span<const PrecisionTally> tallies, std::size_t cutoff_index) {
  double sum = 0.0;
  std::size_t viewers = 0;
  for (const PrecisionTally& t : tallies) {
    if (t.impressions[cutoff_index] == 0) continue;
    sum += static_cast<double>(t.liked[cutoff_index]) /
           static_cast<double>(t.impressions[cutoff_index]);
    ++viewers;
  }
  if (viewers == 0) return std::nullopt;
  return sum / static_cast<double>(viewers);
}

MetricsRow aggregate_row(const SimState& state, const SimConfig& cfg,
                         const Network& net, const TraitAssignment& traits) {
  MetricsRow row;
  row.tick = state.tick;
  row.algorithm = std::string(to_string(cfg.algorithm));
  row.feed_length = cfg.feed_length;
  row.prevalence = cfg.prevalence;
  row.seed = cfg.seed;
  row.b_local = local_bias(state.ledgers, traits, traits.prevalence);
  row.gini = pooled_gini(state.ledgers);
  row.precision_at_10 = precision_from_tallies(state.precision, 0);
  row.precision_at_30 = precision_from_tallies(state.precision, 1);
  for (const ObservationLedger& ledger : state.ledgers) {
    row.unique_edges_seen += ledger.distinct();
  }
  const std::size_t cores = net.core_users().size();
  row.mean_likes_given =
      cores == 0 ? 0.0
                 : static_cast<double>(state.like_log.size()) /
                       static_cast<double>(cores);
  if (state.ever_observed_count > 0) {
    row.mean_likes_received = static_cast<double>(state.like_log.size()) /
                              static_cast<double>(state.ever_observed_count);
  }
  return row;
}

std::string format_csv_row(const MetricsRow& row) {
  auto real = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    // Avoid "-0.000000" so tiny negative noise does not alter the bytes.
    if (std::string_view(buf) == "-0.000000") return std::string("0.000000");
    return std::string(buf);
  };
  auto maybe = [&](const std::optional<double>& v) {
    return v ? real(*v) : std::string("NA");
  };
  std::string out;
  out += std::to_string(row.tick);
  out += ',' + row.algorithm;
  out += ',' + std::to_string(row.feed_length);
  out += ',' + real(row.prevalence);
  out += ',' + std::to_string(row.seed);
  out += ',' + maybe(row.b_local);
  out += ',' + maybe(row.gini);
  out += ',' + maybe(row.precision_at_10);
  out += ',' + maybe(row.precision_at_30);
  out += ',' + std::to_string(row.unique_edges_seen);
  out += ',' + real(row.mean_likes_given);
  out += ',' + maybe(row.mean_likes_received);
  return out;
}

}  // namespace feedsim
