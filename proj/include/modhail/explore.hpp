#pragma once

#include <map>
#include <span>
#include <vector>

#include "modhail/belief.hpp"
#include "modhail/network.hpp"

namespace modhail {

/// Planned link visit counts plus the route chosen for each vehicle.
struct VisitPlan {
  std::map<int, int> visit_counts;           // link id -> planned traversals
  std::map<int, Route> routes;               // vehicle id -> assigned route
};

/// Posterior variance of a link rate after `visits` further traversals of
/// expected duration traverse_min each: alpha / (beta * (beta + visits * t)).
double posterior_link_variance(const GammaBelief& belief, double traverse_min,
                               long visits);

/// Total variance reduction a candidate route adds on top of a plan.
/// A link traversed twice by the same route counts twice, with the second
/// pass valued at the already-deepened visit count.
double objective_gain(const VisitPlan& plan, const Route& candidate,
                      std::span<const GammaBelief> link_beliefs,
                      const NetworkGraph& graph);

/// Best exploration route from `node` given the committed plan: candidates
/// are the precomputed routes out of the node with at most route_len_links
/// links, each extended link by link (greedy marginal gain, ties to the
/// smaller link id) until it has exactly route_len_links. Ties between
/// candidates go to the smaller travel time, then the smaller link sequence.
Route choose_exploration_route(NodeId node, std::span<const GammaBelief> link_beliefs,
                               const NetworkGraph& graph, const VisitPlan& plan,
                               int route_len_links);

/// Sequential greedy assignment: vehicles in ascending id order, each picking
/// the gain-maximal route given everything already committed.
VisitPlan assign_exploration_routes(std::span<const std::pair<int, NodeId>> vehicles,
                                    std::span<const GammaBelief> link_beliefs,
                                    const NetworkGraph& graph, int route_len_links);

}  // namespace modhail
