#include <doctest.h>

#include <random>
#include <vector>

#include "feedsim/metrics.hpp"
#include "oracles.hpp"

using namespace feedsim;
using feedsim::testing::metric_oracle_mismatches;
using feedsim::testing::pairwise_gini;

namespace {

TraitAssignment labels_of(std::vector<std::uint8_t> labels) {
  TraitAssignment t;
  t.labels = std::move(labels);
  return t;
}

ObservationLedger ledger_of(std::initializer_list<std::pair<NodeId, int>> obs) {
  ObservationLedger l(0);
  for (auto [author, times] : obs) {
    for (int i = 0; i < times; ++i) l.record_exposure(author);
  }
  return l;
}

}  // namespace

TEST_CASE("ledger counts") {
  ObservationLedger l(3);
  l.record_exposure(7);
  CHECK(l.count(7) == 1);
  CHECK(l.total() == 1);
  l.record_exposure(7);
  CHECK(l.count(7) == 2);
  CHECK(l.total() == 2);
  CHECK(l.distinct() == 1);
  CHECK(l.attention(7) == 1.0);
  l.clear();
  CHECK(l.total() == 0);
  CHECK(l.attention(7) == 0.0);
}

TEST_CASE("gini hand values") {
  CHECK(gini(std::vector<std::uint64_t>{0, 0, 0, 9}) == 0.75);
  CHECK(gini(std::vector<std::uint64_t>{0, 0, 0, 1}) == 0.75);
  CHECK(gini(std::vector<std::uint64_t>{1, 2, 3, 4}) == 0.25);
  CHECK(gini(std::vector<std::uint64_t>{4, 1, 3, 2}) == 0.25);
  CHECK(gini(std::vector<std::uint64_t>{5, 5, 5, 5}) == 0.0);
  CHECK_FALSE(gini(std::vector<std::uint64_t>{0, 0}).has_value());
  CHECK_FALSE(gini(std::vector<std::uint64_t>{}).has_value());
}

TEST_CASE("gini of one nonzero entry is (m-1)/m") {
  for (std::size_t m = 1; m <= 200; ++m) {
    std::vector<std::uint64_t> x(m, 0);
    x[m / 2] = 17;
    CHECK(*gini(x) == static_cast<double>(m - 1) / static_cast<double>(m));
  }
}

TEST_CASE("gini is scale invariant and matches the pairwise form") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint64_t> x(1 + gen() % 60);
    for (auto& v : x) v = gen() % 100;
    x[0] += 1;
    const std::uint64_t c = 1 + gen() % 1000;
    std::vector<std::uint64_t> scaled(x);
    for (auto& v : scaled) v *= c;
    CHECK(*gini(scaled) == *gini(x));
    CHECK(*gini(x) == doctest::Approx(*pairwise_gini(x)).epsilon(1e-12));
    CHECK(*gini(x) >= 0.0);
    CHECK(*gini(x) < 1.0);
  }
}

TEST_CASE("local bias hand values") {
  const auto traits = labels_of({0, 1, 0, 0});
  const std::vector<ObservationLedger> one{ledger_of({{1, 3}, {2, 1}})};
  CHECK(*local_bias(one, traits, 0.5) == 0.25);
  const std::vector<ObservationLedger> none_active{ledger_of({{2, 4}, {3, 1}})};
  CHECK(*local_bias(none_active, traits, 0.05) == doctest::Approx(-0.05).epsilon(1e-15));
  const std::vector<ObservationLedger> exact{ledger_of({{1, 1}, {2, 1}}),
                                             ledger_of({{1, 2}, {3, 2}})};
  CHECK(*local_bias(exact, traits, 0.5) == 0.0);
  const std::vector<ObservationLedger> empty{ObservationLedger(0)};
  CHECK_FALSE(local_bias(empty, traits, 0.5).has_value());
  // Empty ledgers do not count toward the mean.
  const std::vector<ObservationLedger> mixed{ObservationLedger(0),
                                             ledger_of({{1, 1}})};
  CHECK(*local_bias(mixed, traits, 0.25) == 0.75);
}

TEST_CASE("local bias stays within [-prevalence, 1 - prevalence]") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint8_t> labels(20);
    for (auto& x : labels) x = gen() % 2;
    const auto traits = labels_of(labels);
    std::vector<ObservationLedger> ledgers(1 + gen() % 5);
    for (auto& l : ledgers) {
      for (int i = 0; i < 10; ++i) l.record_exposure(static_cast<NodeId>(gen() % 20));
    }
    const double p = static_cast<double>(gen() % 101) / 100.0;
    const double b = *local_bias(ledgers, traits, p);
    CHECK(b >= -p);
    CHECK(b <= 1.0 - p);
  }
}

TEST_CASE("precision at k from logs") {
  // Two feeds of 12; positions < 10 hold 20 impressions, 5 of them liked.
  std::vector<RankedFeed> feeds{{4, 0, {}}, {4, 1, {}}};
  for (TweetId id = 0; id < 12; ++id) feeds[0].positions.push_back(id);
  for (TweetId id = 100; id < 112; ++id) feeds[1].positions.push_back(id);
  std::vector<Like> likes{{4, 0, 0}, {4, 3, 0}, {4, 9, 0}, {4, 100, 1},
                          {4, 105, 1}, {4, 11, 0}, {5, 1, 0}};
  CHECK(*precision_at_k(feeds, likes, 10, 1) == 0.25);
  CHECK(*precision_at_k(feeds, likes, 30, 1) == doctest::Approx(6.0 / 24.0));
  CHECK(*precision_at_k(feeds, {}, 10, 1) == 0.0);
  CHECK(*precision_at_k(feeds, likes, 10, 0) == 0.3);
  CHECK_FALSE(precision_at_k({}, likes, 10, 1).has_value());
}

TEST_CASE("precision tallies skip viewers without impressions") {
  std::vector<PrecisionTally> t(3);
  t[0].impressions = {10, 20};
  t[0].liked = {5, 5};
  t[2].impressions = {10, 10};
  t[2].liked = {10, 10};
  CHECK(*precision_from_tallies(t, 0) == 0.75);
  CHECK(*precision_from_tallies(t, 1) == 0.625);
  CHECK_FALSE(precision_from_tallies(std::vector<PrecisionTally>(2), 0).has_value());
}

TEST_CASE("unique edges count per-viewer distinct authors") {
  Network net = Network::from_edges(8, {{0, 1}, {1, 2}, {2, 3}}, {0, 1, 2});
  SimState state = SimState::initial(net);
  state.ledgers[0].record_exposure(4);
  state.ledgers[0].record_exposure(5);
  state.ledgers[1].record_exposure(4);
  state.ledgers[1].record_exposure(6);
  state.ledgers[1].record_exposure(6);
  state.ledgers[2].record_exposure(7);
  state.ledgers[2].record_exposure(3);
  SimConfig cfg;
  const auto row = aggregate_row(state, cfg, net, labels_of(std::vector<std::uint8_t>(8, 0)));
  CHECK(row.unique_edges_seen == 6);
}

TEST_CASE("a fresh state gives an empty row") {
  Network net = Network::from_edges(3, {{0, 1}, {1, 2}});
  SimState state = SimState::initial(net);
  const auto row = aggregate_row(state, SimConfig{}, net,
                                 labels_of({0, 1, 0}));
  CHECK_FALSE(row.b_local.has_value());
  CHECK_FALSE(row.gini.has_value());
  CHECK_FALSE(row.precision_at_10.has_value());
  CHECK_FALSE(row.mean_likes_received.has_value());
  CHECK(row.unique_edges_seen == 0);
  CHECK(row.mean_likes_given == 0.0);
  CHECK(format_csv_row(row) == "0,random,30,0.150000,1,NA,NA,NA,NA,0,0.000000,NA");
}

TEST_CASE("every row matches a recomputation from the raw logs") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto bad = metric_oracle_mismatches(seed);
    for (const auto& m : bad) MESSAGE("fixture " << seed << " " << m);
    CHECK(bad.empty());
  }
}

TEST_CASE("csv formatting") {
  MetricsRow row;
  row.tick = 12;
  row.algorithm = "widedeep";
  row.feed_length = 50;
  row.prevalence = 0.05;
  row.seed = 3;
  row.b_local = -1e-9;
  row.gini = 0.1234564;
  row.precision_at_10 = 1.0;
  row.precision_at_30 = 0.0;
  row.unique_edges_seen = 4242;
  row.mean_likes_given = 2.5;
  row.mean_likes_received = 1.0 / 3.0;
  CHECK(format_csv_row(row) ==
        "12,widedeep,50,0.050000,3,0.000000,0.123456,1.000000,0.000000,4242,"
        "2.500000,0.333333");
  CHECK(std::string(kCsvHeader) ==
        "tick,algorithm,feed_length,prevalence,seed,b_local,gini,precision_at_10,"
        "precision_at_30,unique_edges_seen,mean_likes_given,mean_likes_received");
}
