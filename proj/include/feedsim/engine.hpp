#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "feedsim/feeds.hpp"
#include "feedsim/graph.hpp"
#include "feedsim/metrics.hpp"
#include "feedsim/rng.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

struct SimConfig {
  std::int32_t ticks = 36;
  std::int32_t reset_tick = 24;
  double activation_prob = 0.083;
  double lognormal_mu = 0.0;
  double lognormal_sigma = 1.0;
  double like_prob_same = 0.20;
  double like_prob_diff = 0.05;
  std::int64_t feed_length = 30;
  double prevalence = 0.15;
  Algorithm algorithm = Algorithm::random;
  std::int32_t candidate_window = 24;
  bool minimize_rho_static = false;
  std::uint64_t seed = 1;
  /// Partition count inside one run. Never changes results.
  std::size_t workers = 1;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// All mutable simulation state. Per-core vectors are indexed by
/// Network::core_index().
struct SimState {
  std::int32_t tick = 0;

  std::vector<Tweet> tweets;  // tweets[id].id == id
  std::vector<std::vector<TweetId>> tweets_by_author;
  std::vector<TweetId> tick_start;  // first id created at each tick

  std::vector<Like> like_log;
  std::vector<Interaction> interaction_log;
  std::vector<RankedFeed> feed_log;
  /// Per node: (tweet, tick) pairs it liked, in like order.
  std::vector<std::vector<std::pair<TweetId, std::int32_t>>> likes_by_node;

  std::vector<std::unordered_set<TweetId>> served_history;
  std::vector<ObservationLedger> ledgers;
  std::vector<PrecisionTally> precision;

  /// Authors observed by any core user since the start of the run.
  std::vector<std::uint8_t> ever_observed;
  std::uint64_t ever_observed_count = 0;

  /// Activation flags drawn during the most recent tick.
  std::vector<std::uint8_t> active;

  static SimState initial(const Network& net);
};

bool sample_activation(NodeId node, std::int32_t tick, const SimConfig& cfg);

/// Round-half-up of a lognormal(mu, sigma) draw. May be zero.
std::int64_t sample_tweet_count(const SimConfig& cfg, Stream& rng);

/// The (seed, node, tick) stream sample_tweet_count draws from in run_tick.
Stream tweet_count_stream(NodeId node, std::int32_t tick, const SimConfig& cfg);

/// Unseen tweets from the last `candidate_window` ticks authored by a friend,
/// or by a friend-of-friend when a friend liked them in an earlier tick.
/// Sorted by id.
std::vector<Tweet> build_candidate_pool(NodeId viewer, const SimState& state,
                                        const Network& net,
                                        const SimConfig& cfg);

bool decide_like(std::uint8_t viewer_label, std::uint8_t author_label,
                 const SimConfig& cfg, Stream& rng);

/// The (seed, viewer, tweet) stream decide_like draws from in run_tick.
Stream like_stream(NodeId viewer, TweetId tweet, const SimConfig& cfg);

/// Clears observation ledgers only; histories and logs are kept.
void reset_ledgers(SimState& state);

/// Called after the serve phase of a tick, before any ledger reset.
using TickObserver = std::function<void(const SimState&)>;

/// Advances one tick: publish, ranker feedback, serve and like, observer,
/// then the ledger reset when the next tick is `reset_tick`.
void run_tick(SimState& state, const Network& net,
              const TraitAssignment& traits, FeedRanker& ranker,
              const SimConfig& cfg, const TickObserver& observer = {});

/// Runs cfg.ticks ticks from a fresh state and returns one row per tick.
std::vector<MetricsRow> run_simulation(const Network& net,
                                       const TraitAssignment& traits,
                                       FeedRanker& ranker,
                                       const SimConfig& cfg,
                                       SimState* final_state = nullptr);

/// Debug dump: tweets.tsv, likes.tsv, feeds.tsv, ledgers.tsv.
void write_snapshot(const SimState& state, const Network& net,
                    const std::filesystem::path& dir);

}  // namespace feedsim
