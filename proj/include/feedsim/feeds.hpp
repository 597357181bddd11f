#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "feedsim/graph.hpp"
#include "feedsim/metrics.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

enum class Algorithm { random, chronological, ncf, widedeep, minimize_rho };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);

/// Read-only view handed to a ranker for one (viewer, tick).
struct RankContext {
  const Network& net;
  const TraitAssignment& traits;
  const ObservationLedger& ledger;
  std::int32_t tick;
  std::uint64_t seed;
};

/// The "backend" that orders a viewer's candidate tweets.
///
/// rank() must return a duplicate-free subset of `candidates` with length
/// min(n, candidates.size()). It is called concurrently for different
/// viewers and must not mutate shared state. notify_feedback() runs alone
/// between the publish and serve phases of every tick with the full
/// interaction log so far.
class FeedRanker {
 public:
  virtual ~FeedRanker() = default;
  virtual std::string_view name() const = 0;
  virtual RankedFeed rank(NodeId viewer, std::span<const Tweet> candidates,
                          const RankContext& ctx, std::size_t n) const = 0;
  virtual void notify_feedback(std::span<const Interaction> /*log*/,
                               std::int32_t /*tick*/) {}
};

/// Newest first: created_tick descending, then id descending.
bool newer_first(const Tweet& a, const Tweet& b);

/// Fisher-Yates on the (seed, viewer, tick) shuffle stream, truncated to n.
RankedFeed rank_random(NodeId viewer, std::span<const Tweet> candidates,
                       const RankContext& ctx, std::size_t n);

RankedFeed rank_chronological(NodeId viewer, std::span<const Tweet> candidates,
                              const RankContext& ctx, std::size_t n);

/// Running statistics of a viewer's perceived network: observed authors and
/// their summed observation counts, overall and restricted to x = 1.
struct PerceivedStats {
  std::uint64_t authors = 0;
  std::uint64_t observations = 0;
  std::uint64_t active_authors = 0;
  std::uint64_t active_observations = 0;

  static PerceivedStats from_ledger(const ObservationLedger& ledger,
                                    const TraitAssignment& traits);

  /// Stats after one more observation of an author of `label` that has
  /// currently been seen `prior_count` times.
  PerceivedStats with_observation(std::uint8_t label,
                                   std::uint32_t prior_count) const;

  /// |<k>_{x=1} - <k>|, or 0 when no x = 1 author has been observed.
  double gap() const;

  /// Greedy score of one more observation: the gap after it, or 0 for every
  /// candidate while these stats hold no x = 1 author.
  double score(std::uint8_t label, std::uint32_t prior_count) const;
};

/// Greedy feed construction that keeps the perceived mean in-degree of x = 1
/// authors close to the perceived overall mean. Sequential by default: each
/// slot is scored against the statistics updated by the slots already
/// filled. With `static_scoring`, every candidate is scored once against the
/// ledger and the feed is the n best.
RankedFeed rank_minimize_rho(NodeId viewer, std::span<const Tweet> candidates,
                             const RankContext& ctx, std::size_t n,
                             bool static_scoring = false);

class RandomRanker final : public FeedRanker {
 public:
  std::string_view name() const override { return "random"; }
  RankedFeed rank(NodeId viewer, std::span<const Tweet> candidates,
                  const RankContext& ctx, std::size_t n) const override {
    return rank_random(viewer, candidates, ctx, n);
  }
};

class ChronologicalRanker final : public FeedRanker {
 public:
  std::string_view name() const override { return "chronological"; }
  RankedFeed rank(NodeId viewer, std::span<const Tweet> candidates,
                  const RankContext& ctx, std::size_t n) const override {
    return rank_chronological(viewer, candidates, ctx, n);
  }
};

class MinimizeRhoRanker final : public FeedRanker {
 public:
  explicit MinimizeRhoRanker(bool static_scoring = false)
      : static_scoring_(static_scoring) {}
  std::string_view name() const override { return "minimize_rho"; }
  RankedFeed rank(NodeId viewer, std::span<const Tweet> candidates,
                  const RankContext& ctx, std::size_t n) const override {
    return rank_minimize_rho(viewer, candidates, ctx, n, static_scoring_);
  }

 private:
  bool static_scoring_;
};

}  // namespace feedsim
