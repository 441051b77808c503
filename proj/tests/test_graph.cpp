#include <doctest.h>

#include <fstream>

#include "hge/error.hpp"
#include "hge/graph.hpp"
#include "hge/service_graph.hpp"
#include "support.hpp"

using namespace hge;

namespace {

std::uint64_t w(const ServiceGraph& g, const std::string& a, const std::string& b) {
  return g.weight(*g.find(a), *g.find(b));
}

ServiceGraph build(const std::vector<JourneyEvent>& events, std::int64_t T, unsigned threads = 1) {
  return build_cooccurrence(sort_journeys(events), T, threads);
}

}  // namespace

TEST_CASE("services inside one window co-occur once") {
  const auto g = build({{"P", "D", "A", 0}, {"P", "D", "B", 3}}, 8);
  CHECK(w(g, "A", "B") == 1);
  CHECK(w(g, "B", "A") == 1);
}

TEST_CASE("window boundary separates services but keeps both vertices") {
  const auto g = build({{"P", "D", "A", 0}, {"P", "D", "B", 9}}, 8);
  REQUIRE(g.size() == 2);
  CHECK(w(g, "A", "B") == 0);
  CHECK(g.edge_count() == 0);
}

TEST_CASE("pairs count once per window and sum over patients") {
  const std::vector<JourneyEvent> events{{"P1", "D", "A", 0}, {"P1", "D", "A", 1}, {"P1", "D", "B", 2},
                                         {"P2", "D", "A", 5}, {"P2", "D", "B", 6}};
  const auto g = build(events, 8);
  CHECK(w(g, "A", "B") == 2);
  CHECK(w(g, "A", "A") == 0);
  CHECK(w(g, "A", "B") == test::brute_cooccurrence(events, 8).at({"A", "B"}));
}

TEST_CASE("windows are anchored at each patient's first day") {
  // Days 7 and 8 straddle a global boundary at 8 but share the window [7, 15).
  const auto g = build({{"P", "D", "A", 7}, {"P", "D", "B", 8}}, 8);
  CHECK(w(g, "A", "B") == 1);
}

TEST_CASE("co-occurrence matches window enumeration on random journeys") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto events = test::random_events(rng, 20, 15, 5, 60, 12);
    const std::int64_t T = 1 + static_cast<std::int64_t>(rng.below(10));
    const auto g = build(events, T);
    const auto expected = test::brute_cooccurrence(events, T);
    std::map<std::pair<std::string, std::string>, std::uint64_t> got;
    for (const auto& e : g.edges()) {
      auto a = g.id(e.a), b = g.id(e.b);
      if (b < a) std::swap(a, b);
      got[{a, b}] = e.weight;
    }
    CHECK(got == expected);
    for (NodeIndex i = 0; i < g.size(); ++i) {
      CHECK(g.weight(i, i) == 0);
      for (NodeIndex j = 0; j < g.size(); ++j) CHECK(g.weight(i, j) == g.weight(j, i));
    }
    CHECK(build(events, T, 3).edges().size() == g.edges().size());
    CHECK(build(events, T, 3).total_weight() == g.total_weight());
  }
}

TEST_CASE("total weight is invariant under patient and event permutations") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto events = test::random_events(rng, 10, 8, 3, 40, 10);
    const auto reference = build(events, 8).total_weight();
    rng.shuffle(events);
    CHECK(build(events, 8).total_weight() == reference);
  }
}

TEST_CASE("splitting a journey at a window boundary leaves the graph unchanged") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<JourneyEvent> events;
    for (int e = 0; e < 20; ++e) {
      events.push_back({"P", "D", "s" + std::to_string(rng.below(6)), static_cast<std::int64_t>(rng.below(40))});
    }
    events.push_back({"P", "D", "s0", 0});   // anchors P at day 0
    events.push_back({"P", "D", "s1", 16});  // anchors the split-off part at a boundary
    const auto whole = build(events, 8);
    auto split = events;
    for (auto& e : split) {
      if (e.day >= 16) e.patient_id = "Q";
    }
    CHECK(build(split, 8).edges().size() == whole.edges().size());
    for (const auto& e : whole.edges()) CHECK(w(build(split, 8), whole.id(e.a), whole.id(e.b)) == e.weight);
  }
}

TEST_CASE("doubling the window keeps every co-occurring pair on one journey") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<JourneyEvent> events;
    for (int e = 0; e < 15; ++e) {
      events.push_back({"P", "D", "s" + std::to_string(rng.below(5)), static_cast<std::int64_t>(rng.below(50))});
    }
    const auto small = build(events, 4), large = build(events, 8);
    for (const auto& e : small.edges()) {
      // Windows of 8 are unions of two windows of 4, so a shared small window implies a shared large one.
      CHECK(w(large, small.id(e.a), small.id(e.b)) >= 1);
    }
    for (const auto& e : large.edges()) CHECK(e.weight >= 1);
  }
}

TEST_CASE("invalid windows and unsorted journeys are rejected") {
  Journeys j = sort_journeys(std::vector<JourneyEvent>{{"P", "D", "A", 0}});
  CHECK_THROWS_AS(build_cooccurrence(j, 0), InvalidArgument);
  j["P"].push_back({"P", "D", "B", -5});
  CHECK_THROWS_AS(build_cooccurrence(j, 8), InvalidArgument);
}

TEST_CASE("degree profile") {
  const std::vector<WeightedEdge> triangle{{0, 1, 1}, {1, 2, 1}, {0, 2, 1}};
  const WeightedGraph g({"a", "b", "c", "lonely"}, triangle);
  const auto degrees = degree_profile(g);
  CHECK(degrees.at("a") == 2);
  CHECK(degrees.at("b") == 2);
  CHECK(degrees.at("c") == 2);
  CHECK(degrees.at("lonely") == 0);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    std::vector<std::vector<std::uint64_t>> dense(n, std::vector<std::uint64_t>(n, 0));
    std::vector<WeightedEdge> edges;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i));
    for (int e = 0; e < 15; ++e) {
      const auto a = static_cast<NodeIndex>(rng.below(n)), b = static_cast<NodeIndex>(rng.below(n));
      if (a == b) continue;
      const auto wt = 1 + rng.below(5);
      edges.push_back({a, b, wt});
      dense[a][b] += wt;
      dense[b][a] += wt;
    }
    const auto profile = degree_profile(WeightedGraph(ids, edges));
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t row = 0;
      for (auto x : dense[i]) row += x;
      CHECK(profile.at(ids[i]) == row);
    }
  }
}

TEST_CASE("weighted graph construction") {
  const std::vector<WeightedEdge> edges{{0, 1, 2}, {1, 0, 3}, {1, 2, 0}};
  const WeightedGraph g({"x", "y", "z"}, edges);
  CHECK(g.weight(0, 1) == 5);
  CHECK(g.edge_count() == 1);
  CHECK(g.neighbors(2).empty());
  CHECK_THROWS_AS(WeightedGraph({"x", "x"}, {}), InvalidArgument);
  const std::vector<WeightedEdge> loop{{0, 0, 1}};
  CHECK_THROWS_AS(WeightedGraph({"x"}, loop), InvalidArgument);
}

TEST_CASE("edge-list files round-trip") {
  test::TempDir dir("graph");
  Rng rng(4);
  const auto g = build(test::random_events(rng, 10, 10, 3, 30, 10), 8);
  save_edge_list(dir / "g.tsv", g);
  const auto back = load_edge_list(dir / "g.tsv");
  for (const auto& e : g.edges()) {
    if (e.weight == 0) continue;
    CHECK(w(back, g.id(e.a), g.id(e.b)) == e.weight);
  }
  CHECK(back.total_weight() == g.total_weight());
  std::ofstream(dir / "bad.tsv") << "a\tb\tx\n";
  CHECK_THROWS_AS(load_edge_list(dir / "bad.tsv"), ParseError);
}

TEST_CASE("bipartite graph merges parallel edges and keeps totals") {
  const std::vector<BipartiteEdge> edges{{0, 1, 2}, {0, 1, 1}, {1, 0, 4}};
  const BipartiteGraph g({"p", "q"}, {"a", "b"}, edges);
  CHECK(g.edges().size() == 2);
  CHECK(g.left_total(0) == 3);
  CHECK(g.left_total(1) == 4);
  CHECK(g.right_degree(1) == 3);
  CHECK(g.total_weight() == 7);
  const auto h = g.to_weighted_graph("L:", "R:");
  CHECK(h.weight(*h.find("L:p"), *h.find("R:b")) == 3);
}
