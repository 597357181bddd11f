#include "feedsim/feeds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "feedsim/rng.hpp"

namespace feedsim {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::random: return "random";
    case Algorithm::chronological: return "chronological";
    case Algorithm::ncf: return "ncf";
    case Algorithm::widedeep: return "widedeep";
    case Algorithm::minimize_rho: return "minimize_rho";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::random, Algorithm::chronological,
                      Algorithm::ncf, Algorithm::widedeep,
                      Algorithm::minimize_rho}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

bool newer_first(const Tweet& a, const Tweet& b) {
  if (a.created_tick != b.created_tick) return a.created_tick > b.created_tick;
  return a.id > b.id;
}

RankedFeed rank_random(NodeId viewer, std::span<const Tweet> candidates,
                       const RankContext& ctx, std::size_t n) {
  std::vector<TweetId> ids(candidates.size());
  std::transform(candidates.begin(), candidates.end(), ids.begin(),
                 [](const Tweet& t) { return t.id; });
  Stream rng(ctx.seed, Purpose::shuffle, viewer,
             static_cast<std::uint32_t>(ctx.tick));
  const std::size_t take = std::min(n, ids.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
  }
  ids.resize(take);
  return {viewer, ctx.tick, std::move(ids)};
}

RankedFeed rank_chronological(NodeId viewer, std::span<const Tweet> candidates,
                              const RankContext& ctx, std::size_t n) {
  std::vector<Tweet> sorted(candidates.begin(), candidates.end());
  const std::size_t take = std::min(n, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + take, sorted.end(),
                    newer_first);
  RankedFeed feed{viewer, ctx.tick, {}};
  feed.positions.reserve(take);
  for (std::size_t i = 0; i < take; ++i) feed.positions.push_back(sorted[i].id);
  return feed;
}

PerceivedStats PerceivedStats::from_ledger(const ObservationLedger& ledger,
                                           const TraitAssignment& traits) {
  PerceivedStats s;
  for (const auto& [author, count] : ledger.counts()) {
    ++s.authors;
    s.observations += count;
    if (traits.label(author)) {
      ++s.active_authors;
      s.active_observations += count;
    }
  }
  return s;
}

PerceivedStats PerceivedStats::with_observation(std::uint8_t label,
                                                std::uint32_t prior_count) const {
  PerceivedStats s = *this;
  const std::uint64_t is_new = prior_count == 0 ? 1 : 0;
  s.authors += is_new;
  s.observations += 1;
  if (label) {
    s.active_authors += is_new;
    s.active_observations += 1;
  }
  return s;
}

double PerceivedStats::gap() const {
  if (active_authors == 0) return 0.0;
  const double mean_active = static_cast<double>(active_observations) /
                             static_cast<double>(active_authors);
  const double mean_all =
      static_cast<double>(observations) / static_cast<double>(authors);
  return std::abs(mean_active - mean_all);
}

double PerceivedStats::score(std::uint8_t label,
                             std::uint32_t prior_count) const {
  if (active_authors == 0) return 0.0;
  return with_observation(label, prior_count).gap();
}

RankedFeed rank_minimize_rho(NodeId viewer, std::span<const Tweet> candidates,
                             const RankContext& ctx, std::size_t n,
                             bool static_scoring) {
  const PerceivedStats base = PerceivedStats::from_ledger(ctx.ledger, ctx.traits);
  const std::size_t take = std::min(n, candidates.size());
  RankedFeed feed{viewer, ctx.tick, {}};
  feed.positions.reserve(take);

  auto better = [](double score_a, const Tweet& a, double score_b,
                   const Tweet& b) {
    if (score_a != score_b) return score_a < score_b;
    return newer_first(a, b);
  };

  if (static_scoring) {
    std::vector<std::pair<double, Tweet>> scored;
    scored.reserve(candidates.size());
    for (const Tweet& t : candidates) {
      scored.emplace_back(
          base.score(ctx.traits.label(t.author), ctx.ledger.count(t.author)), t);
    }
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [&](const auto& a, const auto& b) {
                        return better(a.first, a.second, b.first, b.second);
                      });
    for (std::size_t i = 0; i < take; ++i) {
      feed.positions.push_back(scored[i].second.id);
    }
    return feed;
  }

  std::vector<Tweet> remaining(candidates.begin(), candidates.end());
  std::vector<std::uint32_t> prior(remaining.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    prior[i] = ctx.ledger.count(remaining[i].author);
  }
  // Observations committed by earlier slots of this feed.
  std::unordered_map<NodeId, std::uint32_t> committed;
  PerceivedStats stats = base;

  for (std::size_t slot = 0; slot < take; ++slot) {
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const Tweet& t = remaining[i];
      std::uint32_t count = prior[i];
      if (!committed.empty()) {
        if (auto it = committed.find(t.author); it != committed.end()) {
          count += it->second;
        }
      }
      const double score = stats.score(ctx.traits.label(t.author), count);
      if (i == 0 || better(score, t, best_score, remaining[best])) {
        best = i;
        best_score = score;
      }
    }
    const Tweet chosen = remaining[best];
    auto& extra = committed[chosen.author];
    stats = stats.with_observation(ctx.traits.label(chosen.author),
                                   prior[best] + extra);
    ++extra;
    feed.positions.push_back(chosen.id);
    remaining[best] = remaining.back();
    prior[best] = prior.back();
    remaining.pop_back();
    prior.pop_back();
  }
  return feed;
}

}  // namespace feedsim
