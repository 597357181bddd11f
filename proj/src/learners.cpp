#include "feedsim/learners.hpp"

#include <algorithm>
#include <unordered_map>

namespace feedsim {

void LearnerConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(key, "must be > 0");
  };
  positive(static_cast<double>(embedding_dim), "learner.embedding_dim");
  positive(static_cast<double>(epochs_per_tick), "learner.epochs_per_tick");
  positive(learning_rate, "learner.learning_rate");
  positive(focal_alpha, "learner.focal_alpha");
  positive(focal_gamma, "learner.focal_gamma");
  positive(static_cast<double>(batch_size), "learner.batch_size");
  positive(init_scale, "learner.init_scale");
  if (focal_alpha >= 1.0) throw ConfigError("learner.focal_alpha", "must be < 1");
  if (mlp_layers.size() < 2) {
    throw ConfigError("learner.mlp_layers", "needs an input width and >= 1 layer");
  }
  for (auto w : mlp_layers) {
    if (w <= 0) throw ConfigError("learner.mlp_layers", "widths must be > 0");
  }
  if (mlp_layers.front() != 2 * embedding_dim) {
    throw ConfigError("learner.mlp_layers",
                      "first width must equal 2 * embedding_dim");
  }
}

RankedFeed rank_learned(NodeId viewer, std::span<const Tweet> candidates,
                        const RankContext& ctx, std::size_t n,
                        const std::function<double(NodeId, NodeId)>& score) {
  // Scores depend only on the author, so each author is evaluated once.
  std::unordered_map<NodeId, double> by_author;
  std::vector<std::pair<double, Tweet>> scored;
  scored.reserve(candidates.size());
  for (const Tweet& t : candidates) {
    auto [it, inserted] = by_author.try_emplace(t.author, 0.0);
    if (inserted) it->second = score(viewer, t.author);
    scored.emplace_back(it->second, t);
  }
  const std::size_t take = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return newer_first(a.second, b.second);
                    });
  RankedFeed feed{viewer, ctx.tick, {}};
  feed.positions.reserve(take);
  for (std::size_t i = 0; i < take; ++i) feed.positions.push_back(scored[i].second.id);
  return feed;
}

}  // namespace feedsim
