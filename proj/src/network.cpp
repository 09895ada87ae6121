#include "modhail/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <stdexcept>

#include "modhail/rng.hpp"

namespace modhail {

namespace {

struct PathLabel {
  bool set = false;
  double time_s = 0;
  std::vector<int> seq;
};

// Route order: travel time, then link count, then link id sequence.
bool better(double t, const std::vector<int>& seq, const PathLabel& cur) {
  if (!cur.set) return true;
  if (t != cur.time_s) return t < cur.time_s;
  if (seq.size() != cur.seq.size()) return seq.size() < cur.seq.size();
  return seq < cur.seq;
}

}  // namespace

std::vector<Route> precompute_routes(int node_count, std::span<const Link> links) {
  std::vector<std::vector<int>> out(node_count);
  for (const Link& l : links) out.at(l.origin).push_back(l.id);
  for (auto& o : out) std::sort(o.begin(), o.end());

  std::vector<Route> table(static_cast<std::size_t>(node_count) * node_count);
  std::deque<int> work;
  std::vector<char> queued(node_count, 0);

  for (int src = 0; src < node_count; ++src) {
    std::vector<PathLabel> lab(node_count);
    lab[src] = {true, 0.0, {}};
    work.assign(1, src);
    std::fill(queued.begin(), queued.end(), 0);
    queued[src] = 1;
    while (!work.empty()) {
      int u = work.front();
      work.pop_front();
      queued[u] = 0;
      for (int lid : out[u]) {
        const Link& l = links[lid];
        double t = lab[u].time_s + l.travel_time_s();
        std::vector<int> seq = lab[u].seq;
        seq.push_back(lid);
        if (better(t, seq, lab[l.dest])) {
          lab[l.dest] = {true, t, std::move(seq)};
          if (!queued[l.dest]) {
            work.push_back(l.dest);
            queued[l.dest] = 1;
          }
        }
      }
    }
    for (int dst = 0; dst < node_count; ++dst) {
      if (dst == src) continue;
      if (!lab[dst].set)
        throw std::runtime_error("graph is not strongly connected: no route " +
                                 std::to_string(src) + " -> " + std::to_string(dst));
      Route& r = table[static_cast<std::size_t>(src) * node_count + dst];
      r.origin = src;
      r.dest = dst;
      r.links = lab[dst].seq;
      r.travel_time_s = lab[dst].time_s;
    }
  }
  return table;
}

NetworkGraph NetworkGraph::from_parts(std::vector<Vec2> positions, std::vector<Link> links) {
  const int n = static_cast<int>(positions.size());
  if (n < 2) throw std::runtime_error("graph needs at least 2 nodes");

  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < links.size(); ++i) {
    Link& l = links[i];
    l.id = static_cast<int>(i);
    if (l.origin < 0 || l.origin >= n || l.dest < 0 || l.dest >= n)
      throw std::runtime_error("link " + std::to_string(i) + " references unknown node");
    if (l.origin == l.dest)
      throw std::runtime_error("link " + std::to_string(i) + " is a self loop");
    if (!(l.speed_mps > 0))
      throw std::runtime_error("link " + std::to_string(i) + " has non-positive speed");
    l.length_m = distance_m(positions[l.origin], positions[l.dest]);
    if (!(l.length_m > 0))
      throw std::runtime_error("link " + std::to_string(i) + " has zero length (coincident nodes)");
    if (!seen.insert({l.origin, l.dest}).second)
      throw std::runtime_error("duplicate link " + std::to_string(l.origin) + " -> " +
                               std::to_string(l.dest));
  }

  NetworkGraph g;
  g.positions_ = std::move(positions);
  g.links_ = std::move(links);
  g.out_.assign(n, {});
  for (const Link& l : g.links_) g.out_[l.origin].push_back(l.id);
  for (auto& o : g.out_) std::sort(o.begin(), o.end());
  g.routes_ = precompute_routes(n, g.links_);
  return g;
}

const Route& NetworkGraph::route(NodeId from, NodeId to) const {
  if (from == to) throw std::invalid_argument("route requested from a node to itself");
  if (from < 0 || to < 0 || from >= node_count() || to >= node_count())
    throw std::invalid_argument("route endpoint out of range");
  return routes_[static_cast<std::size_t>(from) * node_count() + to];
}

std::size_t NetworkGraph::route_count() const {
  return static_cast<std::size_t>(node_count()) * (node_count() - 1);
}

NetworkGraph load_graph(const nlohmann::json& doc) {
  const auto& jnodes = doc.at("nodes");
  const auto& jlinks = doc.at("links");
  const int n = static_cast<int>(jnodes.size());

  std::vector<Vec2> positions(n);
  std::vector<char> have(n, 0);
  for (const auto& jn : jnodes) {
    int id = jn.at("id").get<int>();
    if (id < 0 || id >= n || have[id])
      throw std::runtime_error("node ids must be dense 0..N-1 without repeats");
    have[id] = 1;
    positions[id] = {jn.at("x_m").get<double>(), jn.at("y_m").get<double>()};
  }

  std::vector<Link> links;
  links.reserve(jlinks.size());
  for (const auto& jl : jlinks) {
    Link l;
    l.origin = jl.at("origin").get<int>();
    l.dest = jl.at("dest").get<int>();
    if (jl.contains("speed_class")) {
      std::string cls = jl.at("speed_class").get<std::string>();
      if (cls == "street")
        l.speed_mps = kStreetSpeedMps;
      else if (cls == "path")
        l.speed_mps = kPathSpeedMps;
      else
        throw std::runtime_error("unknown speed_class '" + cls + "'");
    } else {
      l.speed_mps = jl.at("speed_mps").get<double>();
    }
    links.push_back(l);
  }
  return NetworkGraph::from_parts(std::move(positions), std::move(links));
}

NetworkGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse graph file " + path + ": " + e.what());
  }
  return load_graph(doc);
}

nlohmann::ordered_json graph_to_json(const NetworkGraph& g) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (int i = 0; i < g.node_count(); ++i) {
    const Vec2& p = g.position(i);
    doc["nodes"].push_back({{"id", i}, {"x_m", p.x_m}, {"y_m", p.y_m}});
  }
  doc["links"] = nlohmann::ordered_json::array();
  for (const Link& l : g.links()) {
    nlohmann::ordered_json jl{{"origin", l.origin}, {"dest", l.dest}};
    if (l.speed_mps == kStreetSpeedMps)
      jl["speed_class"] = "street";
    else if (l.speed_mps == kPathSpeedMps)
      jl["speed_class"] = "path";
    else
      jl["speed_mps"] = l.speed_mps;
    doc["links"].push_back(jl);
  }
  return doc;
}

NetworkGraph generate_graph(int n_nodes, int n_links, std::uint64_t seed) {
  if (n_nodes < 2) throw std::runtime_error("generate_graph: need at least 2 nodes");
  if (n_links < 2 * n_nodes || n_links % 2 != 0 ||
      n_links > n_nodes * (n_nodes - 1))
    throw std::runtime_error(
        "generate_graph: n_links must be even, >= 2*n_nodes (paired cycle backbone) "
        "and <= n_nodes*(n_nodes-1)");

  std::mt19937_64 eng = make_engine(seed, "graph");
  std::uniform_real_distribution<double> coord(0.0, 1000.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Scatter nodes over a ~1 km^2 campus, keeping them apart so the pickup
  // radius around one node cannot swallow a neighbour.
  const double min_sep = 50.0;
  std::vector<Vec2> positions;
  positions.reserve(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    Vec2 p;
    for (int attempt = 0; attempt < 500; ++attempt) {
      p = {std::round(coord(eng) * 10) / 10, std::round(coord(eng) * 10) / 10};
      bool ok = true;
      for (const Vec2& q : positions)
        if (distance_m(p, q) < min_sep) {
          ok = false;
          break;
        }
      if (ok) break;
    }
    positions.push_back(p);
  }

  // Street networks join nearby intersections. A nearest-neighbour tour keeps
  // backbone links at city-block scale instead of spanning the whole campus.
  std::vector<int> order;
  order.reserve(n_nodes);
  std::vector<bool> used(n_nodes, false);
  order.push_back(0);
  used[0] = true;
  while (static_cast<int>(order.size()) < n_nodes) {
    int at = order.back(), best = -1;
    double best_d = 0;
    for (int v = 0; v < n_nodes; ++v) {
      if (used[v]) continue;
      double d = distance_m(positions[at], positions[v]);
      if (best < 0 || d < best_d) {
        best = v;
        best_d = d;
      }
    }
    order.push_back(best);
    used[best] = true;
  }

  std::set<std::pair<int, int>> present;
  std::vector<Link> links;
  auto add_pair = [&](int u, int v) {
    double speed = u01(eng) < 0.5 ? kStreetSpeedMps : kPathSpeedMps;
    Link f, r;
    f.origin = u;
    f.dest = v;
    f.speed_mps = speed;
    r.origin = v;
    r.dest = u;
    r.speed_mps = speed;
    links.push_back(f);
    links.push_back(r);
    present.insert({u, v});
    present.insert({v, u});
  };

  for (int i = 0; i < n_nodes; ++i) {
    int u = order[i], v = order[(i + 1) % n_nodes];
    if (!present.count({u, v})) add_pair(u, v);
  }

  // Chords also stay short: each joins a random node to one of its few
  // nearest unconnected neighbours, like a cross street rather than a
  // campus-spanning shortcut.
  int chords = (n_links - 2 * n_nodes) / 2;
  std::uniform_int_distribution<int> node(0, n_nodes - 1);
  int attempts = 0;
  while (chords > 0 && attempts < 200 * n_links + 1000) {
    ++attempts;
    int u = node(eng);
    std::vector<std::pair<double, int>> near;
    for (int v = 0; v < n_nodes; ++v)
      if (v != u && !present.count({u, v}))
        near.emplace_back(distance_m(positions[u], positions[v]), v);
    if (near.empty()) continue;
    std::sort(near.begin(), near.end());
    std::size_t width = std::min<std::size_t>(near.size(), 8);
    std::uniform_int_distribution<std::size_t> pick(0, width - 1);
    add_pair(u, near[pick(eng)].second);
    --chords;
  }
  // Dense requests can exhaust rejection sampling; finish deterministically.
  for (int u = 0; u < n_nodes && chords > 0; ++u)
    for (int v = u + 1; v < n_nodes && chords > 0; ++v)
      if (!present.count({u, v})) {
        add_pair(u, v);
        --chords;
      }

  return NetworkGraph::from_parts(std::move(positions), std::move(links));
}

}  // namespace modhail
