#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace modhail {

using NodeId = int;  // dense, 0 .. node_count-1

struct Vec2 {
  double x_m = 0;
  double y_m = 0;
};

inline double distance_m(const Vec2& a, const Vec2& b) {
  double dx = a.x_m - b.x_m, dy = a.y_m - b.y_m;
  return std::sqrt(dx * dx + dy * dy);
}

/// Directed street or footpath segment. Lengths are straight-line distances
/// between the endpoint coordinates; travel time is length over the class speed.
struct Link {
  int id = -1;
  NodeId origin = -1;
  NodeId dest = -1;
  double length_m = 0;
  double speed_mps = 0;
  double travel_time_s() const { return length_m / speed_mps; }
};

// Speed classes used by the synthetic generator and the JSON format.
constexpr double kStreetSpeedMps = 11.0;
constexpr double kPathSpeedMps = 4.0;

/// A link chain. Stored routes are minimum-travel-time paths; ad hoc routes
/// (e.g. exploration plans) use the same type and keep the chaining invariant:
/// links[i].dest == links[i+1].origin, origin/dest match the chain ends.
struct Route {
  NodeId origin = -1;
  NodeId dest = -1;
  std::vector<int> links;
  double travel_time_s = 0;
};

/// Strongly connected road network with the full origin/destination route
/// table precomputed (node_count * (node_count - 1) routes).
class NetworkGraph {
 public:
  static NetworkGraph from_parts(std::vector<Vec2> positions, std::vector<Link> links);

  int node_count() const { return static_cast<int>(positions_.size()); }
  const Vec2& position(NodeId n) const { return positions_.at(n); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int id) const { return links_.at(id); }
  /// Outgoing link ids of a node, ascending.
  const std::vector<int>& links_from(NodeId n) const { return out_.at(n); }

  const Route& route(NodeId from, NodeId to) const;
  std::size_t route_count() const;

 private:
  std::vector<Vec2> positions_;
  std::vector<Link> links_;
  std::vector<std::vector<int>> out_;
  std::vector<Route> routes_;  // row-major from*N+to, self entries unused
};

/// Minimum-travel-time routes between all ordered node pairs. Ties go to the
/// route with fewer links, then the lexicographically smallest link id
/// sequence. Throws if some pair is unreachable.
std::vector<Route> precompute_routes(int node_count, std::span<const Link> links);

/// Reads {"nodes":[{id,x_m,y_m}...],"links":[{origin,dest,speed_class}...]}.
/// Link lengths are computed from node coordinates. Validates dense node ids,
/// no self loops, no duplicate origin/dest pairs, strong connectivity.
NetworkGraph load_graph(const nlohmann::json& doc);
NetworkGraph load_graph_file(const std::string& path);
nlohmann::ordered_json graph_to_json(const NetworkGraph& g);

/// Random campus-style graph: a Hamiltonian cycle backbone plus chords, every
/// link paired with its reverse, speeds drawn from the street/path classes.
/// n_links counts directed links and must be even and >= 2 * n_nodes.
NetworkGraph generate_graph(int n_nodes, int n_links, std::uint64_t seed);

}  // namespace modhail
