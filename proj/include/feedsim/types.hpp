#pragma once

#include <cstdint>
#include <vector>

#include "feedsim/graph.hpp"

namespace feedsim {

/// Monotone creation-order index; equals the tweet's position in the pool.
using TweetId = std::uint32_t;

struct Tweet {
  TweetId id;
  NodeId author;
  std::int32_t created_tick;
  friend bool operator==(const Tweet&, const Tweet&) = default;
};

/// One feed served to one viewer. Position order is exposure order.
struct RankedFeed {
  NodeId viewer = 0;
  std::int32_t tick = 0;
  std::vector<TweetId> positions;
  friend bool operator==(const RankedFeed&, const RankedFeed&) = default;
};

struct Like {
  NodeId viewer;
  TweetId tweet;
  std::int32_t tick;
  friend bool operator==(const Like&, const Like&) = default;
};

/// One impression, liked or not; the training record for learned rankers.
struct Interaction {
  NodeId viewer;
  NodeId author;
  std::uint8_t liked;
  std::int32_t tick;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

}  // namespace feedsim
