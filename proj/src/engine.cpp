#include "feedsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>

#include "feedsim/errors.hpp"
#include "feedsim/parallel.hpp"

namespace feedsim {

void SimConfig::validate() const {
  auto probability = [](double p, const char* key) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
  };
  probability(activation_prob, "simulation.activation_prob");
  probability(like_prob_same, "simulation.like_prob_same");
  probability(like_prob_diff, "simulation.like_prob_diff");
  if (ticks < 1) throw ConfigError("simulation.ticks", "must be >= 1");
  if (reset_tick < 0 || reset_tick >= ticks) {
    throw ConfigError("simulation.reset_tick", "must lie in [0, ticks)");
  }
  if (feed_length < 1) throw ConfigError("sweep.feed_lengths", "must be >= 1");
  if (!(prevalence > 0.0 && prevalence < 1.0)) {
    throw ConfigError("sweep.prevalences", "must lie in (0, 1)");
  }
  if (candidate_window < 1) {
    throw ConfigError("simulation.candidate_window", "must be >= 1");
  }
  if (!(lognormal_sigma >= 0.0) || !std::isfinite(lognormal_mu)) {
    throw ConfigError("simulation.lognormal_sigma", "must be finite and >= 0");
  }
}

SimState SimState::initial(const Network& net) {
  SimState s;
  const std::size_t n = net.node_count();
  const std::size_t cores = net.core_users().size();
  s.tweets_by_author.resize(n);
  s.likes_by_node.resize(n);
  s.served_history.resize(cores);
  s.ledgers.reserve(cores);
  for (NodeId v : net.core_users()) s.ledgers.emplace_back(v);
  s.precision.resize(cores);
  s.ever_observed.assign(n, 0);
  s.active.assign(n, 0);
  return s;
}

bool sample_activation(NodeId node, std::int32_t tick, const SimConfig& cfg) {
  Stream rng(cfg.seed, Purpose::activation, node,
             static_cast<std::uint32_t>(tick));
  return rng.bernoulli(cfg.activation_prob);
}

Stream tweet_count_stream(NodeId node, std::int32_t tick, const SimConfig& cfg) {
  return Stream(cfg.seed, Purpose::tweet_count, node,
                static_cast<std::uint32_t>(tick));
}

std::int64_t sample_tweet_count(const SimConfig& cfg, Stream& rng) {
  const double draw = rng.lognormal(cfg.lognormal_mu, cfg.lognormal_sigma);
  return static_cast<std::int64_t>(std::floor(draw + 0.5));
}

Stream like_stream(NodeId viewer, TweetId tweet, const SimConfig& cfg) {
  return Stream(cfg.seed, Purpose::like, viewer, tweet);
}

bool decide_like(std::uint8_t viewer_label, std::uint8_t author_label,
                 const SimConfig& cfg, Stream& rng) {
  const double p =
      viewer_label == author_label ? cfg.like_prob_same : cfg.like_prob_diff;
  return rng.bernoulli(p);
}

std::vector<Tweet> build_candidate_pool(NodeId viewer, const SimState& state,
                                        const Network& net,
                                        const SimConfig& cfg) {
  std::vector<Tweet> pool;
  const std::int32_t core = net.core_index(viewer);
  if (core < 0) return pool;
  const auto& served = state.served_history[static_cast<std::size_t>(core)];
  const std::int32_t oldest = state.tick - cfg.candidate_window;  // exclusive
  const auto friends = net.followees(viewer);

  auto eligible = [&](const Tweet& t) {
    return t.created_tick > oldest && t.author != viewer && !served.contains(t.id);
  };

  std::unordered_map<NodeId, bool> fof_cache;
  auto is_fof = [&](NodeId author) {
    auto [it, inserted] = fof_cache.try_emplace(author, false);
    if (inserted) {
      for (NodeId g : friends) {
        if (net.follows(g, author)) {
          it->second = true;
          break;
        }
      }
    }
    return it->second;
  };

  for (NodeId f : friends) {
    const auto& own = state.tweets_by_author[f];
    for (auto it = own.rbegin(); it != own.rend(); ++it) {
      const Tweet& t = state.tweets[*it];
      if (t.created_tick <= oldest) break;
      if (eligible(t)) pool.push_back(t);
    }
    // A like can only follow creation, so older likes cannot qualify.
    const auto& liked = state.likes_by_node[f];
    for (auto it = liked.rbegin(); it != liked.rend(); ++it) {
      if (it->second <= oldest) break;
      if (it->second >= state.tick) continue;
      const Tweet& t = state.tweets[it->first];
      if (eligible(t) && is_fof(t.author)) pool.push_back(t);
    }
  }
  std::sort(pool.begin(), pool.end(),
            [](const Tweet& a, const Tweet& b) { return a.id < b.id; });
  pool.erase(std::unique(pool.begin(), pool.end(),
                         [](const Tweet& a, const Tweet& b) {
                           return a.id == b.id;
                         }),
             pool.end());
  return pool;
}

void reset_ledgers(SimState& state) {
  for (auto& ledger : state.ledgers) ledger.clear();
}

namespace {

struct ServeOutput {
  std::vector<Like> likes;
  std::vector<Interaction> interactions;
  std::vector<RankedFeed> feeds;
};

void check_feed(const RankedFeed& feed, std::span<const Tweet> pool,
                std::size_t n) {
  if (feed.positions.size() != std::min(n, pool.size())) {
    throw Error("ranker returned " + std::to_string(feed.positions.size()) +
                " tweets, expected " +
                std::to_string(std::min(n, pool.size())));
  }
  std::vector<TweetId> ids = feed.positions;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error("ranker returned a duplicate tweet");
  }
  for (TweetId id : ids) {
    auto it = std::lower_bound(
        pool.begin(), pool.end(), id,
        [](const Tweet& t, TweetId value) { return t.id < value; });
    if (it == pool.end() || it->id != id) {
      throw Error("ranker returned a tweet outside the candidates");
    }
  }
}

}  // namespace

void run_tick(SimState& state, const Network& net,
              const TraitAssignment& traits, FeedRanker& ranker,
              const SimConfig& cfg, const TickObserver& observer) {
  if (state.tick >= cfg.ticks) throw SimulationError("run already finished");
  const std::int32_t tick = state.tick;
  const std::size_t node_count = net.node_count();

  // Phase 1: activation and publishing.
  const std::size_t publish_chunks = chunk_count(node_count, cfg.workers);
  std::vector<std::vector<std::pair<NodeId, std::int64_t>>> produced(
      publish_chunks);
  for_each_chunk(node_count, cfg.workers,
                 [&](std::size_t c, std::size_t begin, std::size_t end) {
                   for (std::size_t v = begin; v < end; ++v) {
                     const auto node = static_cast<NodeId>(v);
                     const bool on = sample_activation(node, tick, cfg);
                     state.active[v] = on ? 1 : 0;
                     if (!on) continue;
                     Stream rng = tweet_count_stream(node, tick, cfg);
                     const std::int64_t count = sample_tweet_count(cfg, rng);
                     if (count > 0) produced[c].emplace_back(node, count);
                   }
                 });
  state.tick_start.push_back(static_cast<TweetId>(state.tweets.size()));
  for (const auto& chunk : produced) {
    for (const auto& [node, count] : chunk) {
      for (std::int64_t i = 0; i < count; ++i) {
        const auto id = static_cast<TweetId>(state.tweets.size());
        state.tweets.push_back({id, node, tick});
        state.tweets_by_author[node].push_back(id);
      }
    }
  }

  ranker.notify_feedback(state.interaction_log, tick);

  // Phase 2: serve and like. Each viewer touches only its own ledger,
  // history and tally; shared logs are merged in viewer order afterwards.
  std::vector<NodeId> viewers;
  for (NodeId v : net.core_users()) {
    if (state.active[v]) viewers.push_back(v);
  }
  const auto n = static_cast<std::size_t>(cfg.feed_length);
  std::vector<ServeOutput> outputs(chunk_count(viewers.size(), cfg.workers));
  const FeedRanker& serve_ranker = ranker;
  for_each_chunk(
      viewers.size(), cfg.workers,
      [&](std::size_t c, std::size_t begin, std::size_t end) {
        ServeOutput& out = outputs[c];
        for (std::size_t i = begin; i < end; ++i) {
          const NodeId viewer = viewers[i];
          const auto ci = static_cast<std::size_t>(net.core_index(viewer));
          const std::vector<Tweet> pool =
              build_candidate_pool(viewer, state, net, cfg);
          const RankContext ctx{net, traits, state.ledgers[ci], tick, cfg.seed};
          RankedFeed feed;
          try {
            feed = serve_ranker.rank(viewer, pool, ctx, n);
            check_feed(feed, pool, n);
          } catch (const std::exception& e) {
            throw SimulationError("tick " + std::to_string(tick) + ", viewer " +
                                  std::to_string(net.external_id(viewer)) +
                                  ": " + e.what());
          }
          feed.viewer = viewer;
          feed.tick = tick;

          auto& ledger = state.ledgers[ci];
          auto& served = state.served_history[ci];
          auto& tally = state.precision[ci];
          const std::uint8_t viewer_label = traits.label(viewer);
          for (std::size_t pos = 0; pos < feed.positions.size(); ++pos) {
            const Tweet& t = state.tweets[feed.positions[pos]];
            ledger.record_exposure(t.author);
            served.insert(t.id);
            Stream rng = like_stream(viewer, t.id, cfg);
            const bool liked =
                decide_like(viewer_label, traits.label(t.author), cfg, rng);
            for (std::size_t k = 0; k < PrecisionTally::kCutoffs.size(); ++k) {
              if (pos < PrecisionTally::kCutoffs[k]) {
                ++tally.impressions[k];
                if (liked) ++tally.liked[k];
              }
            }
            out.interactions.push_back(
                {viewer, t.author, static_cast<std::uint8_t>(liked), tick});
            if (liked) out.likes.push_back({viewer, t.id, tick});
          }
          out.feeds.push_back(std::move(feed));
        }
      });

  for (ServeOutput& out : outputs) {
    for (const Like& like : out.likes) {
      state.likes_by_node[like.viewer].emplace_back(like.tweet, like.tick);
    }
    for (const RankedFeed& feed : out.feeds) {
      for (TweetId id : feed.positions) {
        const NodeId author = state.tweets[id].author;
        if (!state.ever_observed[author]) {
          state.ever_observed[author] = 1;
          ++state.ever_observed_count;
        }
      }
    }
    state.like_log.insert(state.like_log.end(), out.likes.begin(),
                          out.likes.end());
    state.interaction_log.insert(state.interaction_log.end(),
                                 out.interactions.begin(),
                                 out.interactions.end());
    std::move(out.feeds.begin(), out.feeds.end(),
              std::back_inserter(state.feed_log));
  }

  if (observer) observer(state);
  if (tick + 1 == cfg.reset_tick) reset_ledgers(state);
  ++state.tick;
}

std::vector<MetricsRow> run_simulation(const Network& net,
                                       const TraitAssignment& traits,
                                       FeedRanker& ranker,
                                       const SimConfig& cfg,
                                       SimState* final_state) {
  cfg.validate();
  if (traits.labels.size() != net.node_count()) {
    throw Error("trait assignment does not match the network");
  }
  SimState state = SimState::initial(net);
  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(cfg.ticks));
  const TickObserver observer = [&](const SimState& s) {
    rows.push_back(aggregate_row(s, cfg, net, traits));
  };
  while (state.tick < cfg.ticks) run_tick(state, net, traits, ranker, cfg, observer);
  if (final_state) *final_state = std::move(state);
  return rows;
}

void write_snapshot(const SimState& state, const Network& net,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&dir](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("tweets.tsv");
    out << "id\tauthor\tcreated_tick\n";
    for (const Tweet& t : state.tweets) {
      out << t.id << '\t' << net.external_id(t.author) << '\t'
          << t.created_tick << '\n';
    }
  }
  {
    auto out = open("likes.tsv");
    out << "viewer\ttweet\ttick\n";
    for (const Like& l : state.like_log) {
      out << net.external_id(l.viewer) << '\t' << l.tweet << '\t' << l.tick
          << '\n';
    }
  }
  {
    auto out = open("feeds.tsv");
    out << "viewer\ttick\tposition\ttweet\n";
    for (const RankedFeed& f : state.feed_log) {
      for (std::size_t p = 0; p < f.positions.size(); ++p) {
        out << net.external_id(f.viewer) << '\t' << f.tick << '\t' << p << '\t'
            << f.positions[p] << '\n';
      }
    }
  }
  {
    auto out = open("ledgers.tsv");
    out << "viewer\tauthor\tcount\n";
    for (const ObservationLedger& ledger : state.ledgers) {
      std::vector<std::pair<NodeId, std::uint32_t>> rows(
          ledger.counts().begin(), ledger.counts().end());
      std::sort(rows.begin(), rows.end());
      for (const auto& [author, count] : rows) {
        out << net.external_id(ledger.viewer()) << '\t'
            << net.external_id(author) << '\t' << count << '\n';
      }
    }
  }
}

}  // namespace feedsim
