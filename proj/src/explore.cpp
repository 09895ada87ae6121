#include "modhail/explore.hpp"

#include <algorithm>
#include <stdexcept>

namespace modhail {

namespace {

double traverse_min(const NetworkGraph& g, int link_id) {
  return g.link(link_id).travel_time_s() / 60.0;
}

int planned_visits(const VisitPlan& plan, int link_id) {
  auto it = plan.visit_counts.find(link_id);
  return it == plan.visit_counts.end() ? 0 : it->second;
}

}  // namespace

double posterior_link_variance(const GammaBelief& belief, double traverse_min,
                               long visits) {
  if (!(belief.alpha > 0 && belief.beta > 0))
    throw std::invalid_argument("posterior_link_variance: invalid belief");
  if (visits < 0 || traverse_min < 0)
    throw std::invalid_argument("posterior_link_variance: negative visits or duration");
  return belief.alpha / (belief.beta * (belief.beta + visits * traverse_min));
}

double objective_gain(const VisitPlan& plan, const Route& candidate,
                      std::span<const GammaBelief> link_beliefs,
                      const NetworkGraph& graph) {
  // Group repeated links first so the second pass of a loop is valued at the
  // deeper visit count rather than double-counting the first reduction.
  std::map<int, int> extra;
  for (int l : candidate.links) ++extra[l];
  double gain = 0;
  for (auto [l, add] : extra) {
    const GammaBelief& g = link_beliefs[l];
    double t = traverse_min(graph, l);
    int base = planned_visits(plan, l);
    gain += posterior_link_variance(g, t, base) -
            posterior_link_variance(g, t, base + add);
  }
  return gain;
}

Route choose_exploration_route(NodeId node, std::span<const GammaBelief> link_beliefs,
                               const NetworkGraph& graph, const VisitPlan& plan,
                               int route_len_links) {
  if (route_len_links < 1)
    throw std::invalid_argument("choose_exploration_route: route length must be >= 1");

  bool have_best = false;
  Route best;
  double best_gain = 0;

  for (NodeId dest = 0; dest < graph.node_count(); ++dest) {
    if (dest == node) continue;
    const Route& seed = graph.route(node, dest);
    if (static_cast<int>(seed.links.size()) > route_len_links) continue;

    Route cand = seed;
    // Extend with the marginal-gain-best outgoing link until the route has
    // exactly route_len_links links. Marginals see the plan plus the links
    // already in this candidate, so loops show diminishing returns.
    std::map<int, int> so_far;
    for (int l : cand.links) ++so_far[l];
    while (static_cast<int>(cand.links.size()) < route_len_links) {
      NodeId end = cand.links.empty() ? node : graph.link(cand.links.back()).dest;
      int pick = -1;
      double pick_gain = -1;
      for (int lid : graph.links_from(end)) {  // ascending id, ties keep first
        int visits = planned_visits(plan, lid) + (so_far.count(lid) ? so_far[lid] : 0);
        double t = traverse_min(graph, lid);
        double marg = posterior_link_variance(link_beliefs[lid], t, visits) -
                      posterior_link_variance(link_beliefs[lid], t, visits + 1);
        if (marg > pick_gain) {
          pick_gain = marg;
          pick = lid;
        }
      }
      if (pick < 0)
        throw std::runtime_error("choose_exploration_route: dead-end node");
      cand.links.push_back(pick);
      cand.travel_time_s += graph.link(pick).travel_time_s();
      cand.dest = graph.link(pick).dest;
      ++so_far[pick];
    }

    double gain = objective_gain(plan, cand, link_beliefs, graph);
    bool take = false;
    if (!have_best || gain > best_gain)
      take = true;
    else if (gain == best_gain) {
      if (cand.travel_time_s != best.travel_time_s)
        take = cand.travel_time_s < best.travel_time_s;
      else
        take = cand.links < best.links;
    }
    if (take) {
      have_best = true;
      best = cand;
      best_gain = gain;
    }
  }

  if (!have_best)
    throw std::runtime_error("choose_exploration_route: no candidate route from node " +
                             std::to_string(node));
  return best;
}

VisitPlan assign_exploration_routes(std::span<const std::pair<int, NodeId>> vehicles,
                                    std::span<const GammaBelief> link_beliefs,
                                    const NetworkGraph& graph, int route_len_links) {
  std::vector<std::pair<int, NodeId>> order(vehicles.begin(), vehicles.end());
  std::sort(order.begin(), order.end());
  VisitPlan plan;
  for (auto [vid, node] : order) {
    Route r = choose_exploration_route(node, link_beliefs, graph, plan, route_len_links);
    for (int l : r.links) ++plan.visit_counts[l];
    plan.routes[vid] = std::move(r);
  }
  return plan;
}

}  // namespace modhail
