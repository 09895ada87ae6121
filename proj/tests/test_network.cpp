#include <doctest.h>

#include <cmath>
#include <vector>

#include "modhail/network.hpp"

using namespace modhail;

namespace {

Link mk(int id, int origin, int dest, double length, double speed) {
  Link l;
  l.id = id;
  l.origin = origin;
  l.dest = dest;
  l.length_m = length;
  l.speed_mps = speed;
  return l;
}

NetworkGraph cycle2() {
  std::vector<Vec2> pos{{0, 0}, {275, 0}};
  std::vector<Link> links{mk(0, 0, 1, 275, kStreetSpeedMps), mk(1, 1, 0, 275, kStreetSpeedMps)};
  return NetworkGraph::from_parts(pos, links);
}

// Independent best-route search: all simple paths, ties broken by travel
// time, then link count, then the smaller link id sequence.
void dfs_best(const NetworkGraph& g, NodeId cur, NodeId dest, std::vector<char>& seen,
              std::vector<int>& links, double t, bool& found, double& best_t,
              std::vector<int>& best) {
  if (cur == dest) {
    bool take = !found;
    if (found) {
      if (t < best_t) take = true;
      else if (t == best_t && links.size() < best.size()) take = true;
      else if (t == best_t && links.size() == best.size() && links < best) take = true;
    }
    if (take) {
      found = true;
      best_t = t;
      best = links;
    }
    return;
  }
  for (int lid : g.links_from(cur)) {
    const Link& l = g.link(lid);
    if (seen[l.dest]) continue;
    seen[l.dest] = 1;
    links.push_back(lid);
    dfs_best(g, l.dest, dest, seen, links, t + l.travel_time_s(), found, best_t, best);
    links.pop_back();
    seen[l.dest] = 0;
  }
}

}  // namespace

TEST_CASE("two node cycle routes") {
  NetworkGraph g = cycle2();
  CHECK(g.node_count() == 2);
  CHECK(g.route_count() == 2);
  const Route& r = g.route(0, 1);
  CHECK(r.links == std::vector<int>{0});
  CHECK(r.travel_time_s == doctest::Approx(25.0));
  CHECK(g.route(1, 0).links == std::vector<int>{1});
  CHECK_THROWS(g.route(0, 0));
  CHECK_THROWS(g.route(0, 5));
}

TEST_CASE("fast two-hop beats slow direct link") {
  std::vector<Vec2> pos{{0, 0}, {300, 0}, {150, 100}};
  double leg = std::sqrt(150.0 * 150 + 100 * 100);
  std::vector<Link> links{
      mk(0, 0, 1, 300, kPathSpeedMps),  mk(1, 1, 0, 300, kPathSpeedMps),
      mk(2, 0, 2, leg, kStreetSpeedMps), mk(3, 2, 1, leg, kStreetSpeedMps),
      mk(4, 2, 0, leg, kStreetSpeedMps), mk(5, 1, 2, leg, kStreetSpeedMps),
  };
  NetworkGraph g = NetworkGraph::from_parts(pos, links);
  const Route& r = g.route(0, 1);
  CHECK(r.links == std::vector<int>{2, 3});
  CHECK(r.travel_time_s == doctest::Approx(2 * leg / kStreetSpeedMps));
}

TEST_CASE("equal-time routes pick the smaller link sequence") {
  std::vector<Vec2> pos{{0, 0}, {300, 0}, {150, 100}, {150, -100}};
  double leg = std::sqrt(150.0 * 150 + 100 * 100);
  std::vector<Link> links{
      mk(0, 0, 2, leg, kStreetSpeedMps), mk(1, 2, 1, leg, kStreetSpeedMps),
      mk(2, 0, 3, leg, kStreetSpeedMps), mk(3, 3, 1, leg, kStreetSpeedMps),
      mk(4, 2, 0, leg, kStreetSpeedMps), mk(5, 1, 2, leg, kStreetSpeedMps),
      mk(6, 3, 0, leg, kStreetSpeedMps), mk(7, 1, 3, leg, kStreetSpeedMps),
  };
  NetworkGraph g = NetworkGraph::from_parts(pos, links);
  CHECK(g.route(0, 1).links == std::vector<int>{0, 1});
}

TEST_CASE("route table matches exhaustive search on small graphs") {
  for (std::uint64_t seed : {1, 2, 3}) {
    NetworkGraph g = generate_graph(6, 16, seed);
    for (int s = 0; s < g.node_count(); ++s) {
      for (int d = 0; d < g.node_count(); ++d) {
        if (s == d) continue;
        std::vector<char> seen(g.node_count(), 0);
        seen[s] = 1;
        std::vector<int> links, best;
        bool found = false;
        double best_t = 0;
        dfs_best(g, s, d, seen, links, 0.0, found, best_t, best);
        REQUIRE(found);
        const Route& r = g.route(s, d);
        CHECK(r.links == best);
        CHECK(r.travel_time_s == doctest::Approx(best_t).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("route chaining invariant") {
  NetworkGraph g = generate_graph(12, 30, 11);
  for (int s = 0; s < g.node_count(); ++s)
    for (int d = 0; d < g.node_count(); ++d) {
      if (s == d) continue;
      const Route& r = g.route(s, d);
      REQUIRE(!r.links.empty());
      CHECK(g.link(r.links.front()).origin == s);
      CHECK(g.link(r.links.back()).dest == d);
      double t = 0;
      for (std::size_t i = 0; i < r.links.size(); ++i) {
        t += g.link(r.links[i]).travel_time_s();
        if (i + 1 < r.links.size())
          CHECK(g.link(r.links[i]).dest == g.link(r.links[i + 1]).origin);
      }
      CHECK(r.travel_time_s == doctest::Approx(t).epsilon(1e-12));
    }
}

TEST_CASE("generated graph structure") {
  NetworkGraph g = generate_graph(33, 106, 7);
  CHECK(g.node_count() == 33);
  CHECK(g.links().size() == 106);
  CHECK(g.route_count() == 33 * 32);

  for (const Link& l : g.links()) {
    CHECK(l.origin != l.dest);
    CHECK((l.speed_mps == kStreetSpeedMps || l.speed_mps == kPathSpeedMps));
    double d = distance_m(g.position(l.origin), g.position(l.dest));
    CHECK(l.length_m == doctest::Approx(d).epsilon(1e-12));
  }
  // links come in opposite pairs with a shared speed
  for (std::size_t i = 0; i < g.links().size(); i += 2) {
    const Link& a = g.links()[i];
    const Link& b = g.links()[i + 1];
    CHECK(a.origin == b.dest);
    CHECK(a.dest == b.origin);
    CHECK(a.speed_mps == b.speed_mps);
  }
  for (int n = 0; n < g.node_count(); ++n) CHECK(g.links_from(n).size() >= 1);
  for (int i = 0; i < g.node_count(); ++i)
    for (int j = i + 1; j < g.node_count(); ++j)
      CHECK(distance_m(g.position(i), g.position(j)) >= 50.0);
}

TEST_CASE("generation is deterministic and JSON round trips") {
  NetworkGraph a = generate_graph(14, 36, 5);
  NetworkGraph b = generate_graph(14, 36, 5);
  auto ja = graph_to_json(a);
  CHECK(ja == graph_to_json(b));
  NetworkGraph c = load_graph(ja);
  CHECK(graph_to_json(c) == ja);
  for (int s = 0; s < a.node_count(); ++s)
    for (int d = 0; d < a.node_count(); ++d)
      if (s != d) CHECK(a.route(s, d).links == c.route(s, d).links);
}

TEST_CASE("invalid graphs are rejected") {
  std::vector<Vec2> pos{{0, 0}, {275, 0}};
  // self loop
  CHECK_THROWS(NetworkGraph::from_parts(pos, {mk(0, 0, 0, 10, 11), mk(1, 0, 1, 275, 11),
                                              mk(2, 1, 0, 275, 11)}));
  // duplicate direction
  CHECK_THROWS(NetworkGraph::from_parts(pos, {mk(0, 0, 1, 275, 11), mk(1, 0, 1, 275, 11),
                                              mk(2, 1, 0, 275, 11)}));
  // node id out of range
  CHECK_THROWS(NetworkGraph::from_parts(pos, {mk(0, 0, 2, 275, 11), mk(1, 2, 0, 275, 11)}));
  // not strongly connected
  std::vector<Vec2> pos4{{0, 0}, {275, 0}, {0, 275}, {275, 275}};
  CHECK_THROWS(NetworkGraph::from_parts(
      pos4, {mk(0, 0, 1, 275, 11), mk(1, 1, 0, 275, 11), mk(2, 2, 3, 275, 11),
             mk(3, 3, 2, 275, 11)}));
  // zero-speed link
  CHECK_THROWS(NetworkGraph::from_parts(pos, {mk(0, 0, 1, 275, 0), mk(1, 1, 0, 275, 11)}));
}

TEST_CASE("generator rejects impossible parameters") {
  CHECK_THROWS(generate_graph(1, 2, 1));
  CHECK_THROWS(generate_graph(5, 9, 1));    // odd link count
  CHECK_THROWS(generate_graph(5, 8, 1));    // fewer than 2 per node
  CHECK_THROWS(generate_graph(5, 22, 1));   // more than n*(n-1)
}
