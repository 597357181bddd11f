// Acceptance gate: prints one PASS/FAIL line per criterion P1..P11.
//
// Usage: acceptance [scratch_dir]
// The desk sweep (5,000 nodes, 40,000 edges, 500 core users, 36 ticks, n=30,
// 3 seeds, 3 prevalences, all algorithms) runs three times: twice with one
// worker and once with eight.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "feedsim/experiment.hpp"
#include "feedsim/graph.hpp"
#include "feedsim/metrics.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace feedsim;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& line) {
  std::printf("    %s\n", line.c_str());
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- P1..P4

void p1_correlation() {
  const auto start = Clock::now();
  std::mt19937_64 gen(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + gen() % 991;
    std::vector<std::uint32_t> k(n);
    std::vector<std::uint8_t> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      k[i] = static_cast<std::uint32_t>(gen() % 200);
      x[i] = static_cast<std::uint8_t>(gen() % 4 == 0);
    }
    x[0] = 1;
    x[1] = 0;
    k[0] = 1;
    k[1] = 0;
    const double got = degree_attribute_correlation(k, x);
    const double want = testing::pearson({k.begin(), k.end()}, {x.begin(), x.end()});
    worst = std::max(worst, std::abs(got - want));
  }
  const double elapsed = seconds_since(start);
  report("P1", worst <= 1e-9 && elapsed < 5.0,
         "max |rho - pearson| = " + fmt("%.3g", worst) + " over 100 instances, " +
             fmt("%.3f", elapsed) + " s");
}

void p2_metric_oracles() {
  std::size_t bad = 0;
  std::string first;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& m : testing::metric_oracle_mismatches(1000 + seed)) {
      if (first.empty()) first = "fixture " + std::to_string(seed) + " " + m;
      ++bad;
    }
  }
  report("P2", bad == 0,
         "20 fixtures, " + std::to_string(bad) + " mismatching fields" +
             (first.empty() ? "" : " (first: " + first + ")"));
}

void p3_gini() {
  using V = std::vector<std::uint64_t>;
  bool hand = true;
  for (std::uint64_t c : {1, 2, 7, 1000, 123456789}) {
    hand = hand && gini(V{0, 0, 0, c}) == 0.75;
  }
  hand = hand && gini(V{1, 2, 3, 4}) == 0.25;
  bool equal = true;
  for (std::uint64_t v : {1, 5, 99}) {
    for (std::size_t m : {1, 4, 37}) equal = equal && gini(V(m, v)) == 0.0;
  }
  std::mt19937_64 gen(303);
  int scale_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    V x(1 + gen() % 100);
    for (auto& v : x) v = gen() % 1000;
    x[0] += 1;
    const std::uint64_t c = 1 + gen() % 10000;
    V scaled(x);
    for (auto& v : scaled) v *= c;
    if (*gini(scaled) != *gini(x)) ++scale_failures;
  }
  report("P3", hand && equal && scale_failures == 0,
         std::string("hand values ") + (hand ? "exact" : "WRONG") + ", equal vectors " +
             (equal ? "0" : "NONZERO") + ", scale invariance failures " +
             std::to_string(scale_failures) + "/1000");
}

void p4_gradients() {
  const auto start = Clock::now();
  const LearnerConfig cfg;  // default dimensions
  std::size_t ncf_bad = 0, wd_bad = 0;
  for (std::uint64_t draw = 0; draw < 50; ++draw) {
    ncf_bad += testing::ncf_gradient_draw(cfg, 7, 5000 + draw).size();
    wd_bad += testing::widedeep_gradient_draw(cfg, 7, 6000 + draw).size();
  }
  const double elapsed = seconds_since(start);
  report("P4", ncf_bad == 0 && wd_bad == 0 && elapsed < 30.0,
         "50 draws each; mismatched coordinates NCF " + std::to_string(ncf_bad) +
             ", Wide&Deep " + std::to_string(wd_bad) + ", " + fmt("%.2f", elapsed) +
             " s");
}

// ---------------------------------------------------------------- desk sweep

SweepSpec desk_spec(const fs::path& out, std::size_t workers) {
  SweepSpec spec;
  spec.network.nodes = 5000;
  spec.network.edges = 40000;
  spec.network.core = 500;
  spec.network.seed = 1;
  spec.feed_lengths = {30};
  spec.seeds = {1, 2, 3};
  spec.prevalences = {0.05, 0.15, 0.50};
  spec.workers = workers;
  spec.output_dir = out;
  return spec;
}

bool same_directory(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) {
    why = "file sets differ";
    return false;
  }
  for (const auto& name : names_a) {
    if (testing::read_file(a / name) != testing::read_file(b / name)) {
      why = name + " differs";
      return false;
    }
  }
  return true;
}

struct Row {
  std::optional<double> b_local, gini, p10, p30;
  std::uint64_t edges = 0;
};

using Series = std::vector<Row>;  // indexed by tick

std::optional<double> field(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return std::stod(s);
}

Series load_series(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  Series out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    Row r;
    r.b_local = field(f[5]);
    r.gini = field(f[6]);
    r.p10 = field(f[7]);
    r.p30 = field(f[8]);
    r.edges = std::stoull(f[9]);
    out.push_back(r);
  }
  return out;
}

struct Desk {
  std::map<std::tuple<Algorithm, double, std::uint64_t>, Series> runs;
  const Series& at(Algorithm a, double p, std::uint64_t s) const {
    return runs.at({a, p, s});
  }
};

constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr double kPrevalences[] = {0.05, 0.15, 0.50};

double value(const std::optional<double>& v) { return v.value_or(std::nan("")); }

/// Mean over ticks 10..23 of b_local (or |b_local|).
double window_mean(const Series& s, bool absolute) {
  double sum = 0.0;
  int n = 0;
  for (int t = 10; t <= 23; ++t) {
    if (!s[t].b_local) continue;
    sum += absolute ? std::abs(*s[t].b_local) : *s[t].b_local;
    ++n;
  }
  return n == 0 ? std::nan("") : sum / n;
}

std::string pname(double p) { return fmt("%g", p); }

void p6_bias_ordering(const Desk& d, double sweep_seconds) {
  int ok = 0;
  for (auto s : kSeeds) {
    auto m = [&](Algorithm a) { return window_mean(d.at(a, 0.15, s), true); };
    const double low = std::max(m(Algorithm::random), m(Algorithm::minimize_rho));
    const double high = std::min(m(Algorithm::ncf), m(Algorithm::widedeep));
    const bool pass = low < high;
    ok += pass;
    note("seed " + std::to_string(s) + ": mean|b| random " + fmt("%.4f", m(Algorithm::random)) +
         " minimize_rho " + fmt("%.4f", m(Algorithm::minimize_rho)) + " ncf " +
         fmt("%.4f", m(Algorithm::ncf)) + " widedeep " + fmt("%.4f", m(Algorithm::widedeep)) +
         (pass ? "  ok" : "  no"));
  }
  report("P6", ok >= 2 && sweep_seconds < 30 * 60,
         std::to_string(ok) + "/3 seeds at prevalence 0.15, desk sweep " +
             fmt("%.0f", sweep_seconds) + " s");
}

void p7_learned_sign(const Desk& d) {
  int ok = 0;
  for (auto s : kSeeds) {
    const double ncf = window_mean(d.at(Algorithm::ncf, 0.15, s), false);
    const double wd = window_mean(d.at(Algorithm::widedeep, 0.15, s), false);
    const bool pass = ncf < 0 && wd < 0;
    ok += pass;
    note("seed " + std::to_string(s) + ": mean b ncf " + fmt("%.4f", ncf) + " widedeep " +
         fmt("%.4f", wd) + (pass ? "  ok" : "  no"));
  }
  report("P7", ok >= 2, std::to_string(ok) + "/3 seeds at prevalence 0.15");
}

void p8_gini(const Desk& d) {
  bool all = true;
  std::string summary;
  for (double p : kPrevalences) {
    int order_ok = 0, rise_ok = 0;
    for (auto s : kSeeds) {
      auto g = [&](Algorithm a, int t) { return value(d.at(a, p, s)[t].gini); };
      const double low = std::max(g(Algorithm::random, 23), g(Algorithm::chronological, 23));
      const double high = std::min(g(Algorithm::ncf, 23), g(Algorithm::widedeep, 23));
      const bool order = low < high;
      const bool rise = g(Algorithm::minimize_rho, 2) < g(Algorithm::minimize_rho, 23);
      order_ok += order;
      rise_ok += rise;
      note("p " + pname(p) + " seed " + std::to_string(s) + ": gini@23 random " +
           fmt("%.4f", g(Algorithm::random, 23)) + " chrono " +
           fmt("%.4f", g(Algorithm::chronological, 23)) + " ncf " +
           fmt("%.4f", g(Algorithm::ncf, 23)) + " widedeep " +
           fmt("%.4f", g(Algorithm::widedeep, 23)) + "; minimize_rho @2 " +
           fmt("%.4f", g(Algorithm::minimize_rho, 2)) + " @23 " +
           fmt("%.4f", g(Algorithm::minimize_rho, 23)));
    }
    const bool pass = order_ok >= 2 && rise_ok >= 2;
    all = all && pass;
    summary += "p " + pname(p) + ": order " + std::to_string(order_ok) + "/3, rise " +
               std::to_string(rise_ok) + "/3; ";
  }
  report("P8", all, summary);
}

void p9_exploration(const Desk& d) {
  bool all = true;
  std::string summary;
  for (double p : kPrevalences) {
    int ok = 0;
    for (auto s : kSeeds) {
      auto e = [&](Algorithm a) { return d.at(a, p, s)[23].edges; };
      const bool pass = e(Algorithm::random) > e(Algorithm::minimize_rho) &&
                        e(Algorithm::minimize_rho) >
                            std::min(e(Algorithm::ncf), e(Algorithm::widedeep));
      ok += pass;
      note("p " + pname(p) + " seed " + std::to_string(s) + ": edges@23 random " +
           std::to_string(e(Algorithm::random)) + " minimize_rho " +
           std::to_string(e(Algorithm::minimize_rho)) + " ncf " +
           std::to_string(e(Algorithm::ncf)) + " widedeep " +
           std::to_string(e(Algorithm::widedeep)) + (pass ? "  ok" : "  no"));
    }
    all = all && ok >= 2;
    summary += "p " + pname(p) + ": " + std::to_string(ok) + "/3; ";
  }
  report("P9", all, summary);
}

void p10_reset(const Desk& d) {
  int bad = 0;
  for (const auto& [key, s] : d.runs) {
    bool ok = s.size() == 36 && s[24].edges < s[23].edges;
    for (std::size_t t = 1; ok && t < s.size(); ++t) {
      if (t != 24 && s[t].edges < s[t - 1].edges) ok = false;
    }
    if (!ok) {
      ++bad;
      note(std::string(to_string(std::get<0>(key))) + " p " + pname(std::get<1>(key)) +
           " seed " + std::to_string(std::get<2>(key)) + " violates the reset pattern");
    }
  }
  report("P10", bad == 0,
         std::to_string(d.runs.size() - bad) + "/" + std::to_string(d.runs.size()) +
             " runs drop at tick 24 and are monotone elsewhere");
}

void p11_precision(const Desk& d) {
  bool all = true;
  std::string summary;
  for (double p : kPrevalences) {
    std::string failing;
    for (Algorithm a : {Algorithm::random, Algorithm::chronological, Algorithm::ncf,
                        Algorithm::widedeep, Algorithm::minimize_rho}) {
      int ok = 0;
      std::string values;
      for (auto s : kSeeds) {
        const auto& run = d.at(a, p, s);
        const double early = value(run[5].p30);
        const double late = value(run[23].p30);
        ok += late >= early;
        values += " " + fmt("%.4f", early) + "->" + fmt("%.4f", late);
      }
      note("p " + pname(p) + " " + std::string(to_string(a)) + ": p@30 tick5->23" + values +
           " (" + std::to_string(ok) + "/3)");
      if (ok < 2) failing += std::string(failing.empty() ? "" : ",") + std::string(to_string(a));
    }
    all = all && failing.empty();
    summary += "p " + pname(p) + ": " + (failing.empty() ? "all" : "fails " + failing) + "; ";
  }
  report("P11", all, summary);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::remove_all(root);
  fs::create_directories(root);

  p1_correlation();
  p2_metric_oracles();
  p3_gini();
  p4_gradients();

  const auto start = Clock::now();
  const SweepResult first = run_sweep(desk_spec(root / "w1a", 1));
  const double sweep_seconds = seconds_since(start);
  note("desk sweep: " + std::to_string(first.runs) + " runs, " +
       std::to_string(first.failed) + " failed, " + fmt("%.1f", sweep_seconds) + " s");
  run_sweep(desk_spec(root / "w1b", 1));
  run_sweep(desk_spec(root / "w8", 8));

  std::string why_repeat, why_workers;
  const bool repeat = same_directory(root / "w1a", root / "w1b", why_repeat);
  const bool workers = same_directory(root / "w1a", root / "w8", why_workers);
  report("P5", repeat && workers && first.failed == 0,
         std::string("rerun ") + (repeat ? "identical" : "DIFFERS: " + why_repeat) +
             "; workers 1 vs 8 " + (workers ? "identical" : "DIFFER: " + why_workers));

  if (first.failed != 0) {
    for (const char* id : {"P6", "P7", "P8", "P9", "P10", "P11"}) {
      report(id, false, "desk sweep had failed runs");
    }
    return 1;
  }

  Desk desk;
  for (const RunKey& key : enumerate_runs(desk_spec(root / "w1a", 1))) {
    desk.runs[{key.algorithm, key.prevalence, key.seed}] =
        load_series(root / "w1a" / run_file_name(key));
  }
  p6_bias_ordering(desk, sweep_seconds);
  p7_learned_sign(desk);
  p8_gini(desk);
  p9_exploration(desk);
  p10_reset(desk);
  p11_precision(desk);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
