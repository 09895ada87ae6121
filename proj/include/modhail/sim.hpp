#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "modhail/belief.hpp"
#include "modhail/network.hpp"

namespace modhail {

/// One pedestrian stream: arrivals at the route origin with a Poisson rate,
/// each a customer with probability customer_fraction (1 = always hailing).
struct DemandRoute {
  Route route;
  double rate_per_min = 0;
  double customer_fraction = 0;
};

struct DemandScenario {
  std::vector<DemandRoute> routes;
  double wait_limit_s = 30;
  double pickup_radius_m = 20;
  double walk_speed_mps = 1.5;

  /// Ground-truth customer arrival rate per node (spawns only).
  std::vector<double> true_customer_rate_per_min(const NetworkGraph& g) const;
  /// Ground-truth pedestrian entry rate per link, summed over routes.
  std::vector<double> true_link_rate_per_min(const NetworkGraph& g) const;
};

/// Ten routes with distinct random origins at 1 pedestrian/min, three of them
/// all-customer; 30 s patience, 20 m pickup radius, 1.5 m/s walkers.
/// Requires at least 10 nodes.
DemandScenario make_benchmark_scenario(const NetworkGraph& g, std::uint64_t seed);

/// Campus-day stand-in for a real ride network: a couple of strong stands,
/// many moderate mixed-traffic origins, and background foot traffic. Demand is
/// spread wide enough that where to post is a real decision instead of a
/// lookup of the three busy nodes. Requires at least 16 nodes.
DemandScenario make_campus_scenario(const NetworkGraph& g, std::uint64_t seed);

struct PlannerSpec {
  enum class Kind { Sensing, ExpectedValue, ChanceConstrained, Oracle, Counter };
  Kind kind = Kind::Sensing;
  double eta = 0.9;  // chance-constrained risk threshold

  /// "sensing", "ev", "cc", "cc:0.9", "oracle", "counter".
  static PlannerSpec parse(const std::string& text);
  std::string name() const;
};

struct SimConfig {
  int fleet_size = 5;
  double horizon_s = 300;
  double duration_s = 3600;
  double step_s = 1;
  int route_len_links = 5;
  // Node-level prior: every node expects link_prior.alpha / link_prior.beta
  // pedestrians per minute in total, split evenly across its outgoing links
  // (see BeliefStore::priors). The mean makes an unexplored node worth a
  // probe vehicle when posts are free without letting it outbid a confirmed
  // customer stream, and the pseudo-observation mass keeps one short drive-by
  // from inventing a busy link.
  GammaBelief link_prior{3.5, 1.46};
  BetaBelief fraction_prior{1, 2};
  double mse_every_s = 60;
};

/// Pregenerated spawn: exact time, source route, customer flag. Depends only
/// on the scenario and seed, never on planner decisions, so runs with the
/// same seed see identical demand under every planner.
struct Arrival {
  double t_s = 0;
  int route_index = -1;
  bool customer = false;
};

std::vector<Arrival> generate_arrivals(const DemandScenario& scenario,
                                       double duration_s, double step_s,
                                       std::uint64_t seed);

/// Per-link rate beliefs plus per-node customer-fraction beliefs.
struct BeliefStore {
  std::vector<GammaBelief> links;
  std::vector<BetaBelief> fractions;

  static BeliefStore priors(const NetworkGraph& g, const SimConfig& cfg);
  GammaBelief node_rate(const NetworkGraph& g, NodeId n) const;
  NodeBelief node(const NetworkGraph& g, NodeId n) const;
  /// Estimated customer rate per minute, per node.
  std::vector<double> customer_rate_estimates(const NetworkGraph& g) const;
};

nlohmann::ordered_json beliefs_to_json(const BeliefStore& store);
BeliefStore beliefs_from_json(const nlohmann::json& doc);

struct SimMetrics {
  long customers_total = 0;
  long customers_served = 0;
  long customers_expired = 0;   // gave up and walked
  long customers_waiting_end = 0;
  std::vector<double> horizon_costs;  // sum over nodes of (c_n - v_n)^2
  std::vector<double> mse_t_min;
  std::vector<double> mse;
  double max_vehicle_step_m = 0;
  double max_walker_step_m = 0;
  BeliefStore final_beliefs;

  double fraction_served() const;
  double max_horizon_cost() const;
};

/// One fixed-step run. All randomness comes from named streams derived from
/// `seed`; repeated calls are bit-identical.
SimMetrics run(const NetworkGraph& g, const DemandScenario& scenario,
               const PlannerSpec& planner, const SimConfig& cfg,
               std::uint64_t seed, std::ostream* trace = nullptr);

struct BatchSummary {
  PlannerSpec planner;
  std::vector<double> t_min;
  std::vector<double> mean_mse;
  double served_mean = 0, served_sd = 0;
  double max_cost_mean = 0, max_cost_sd = 0;
};

/// Paired-seed batch: run i uses the same derived seed (and thus the same
/// scenario and arrivals) under every planner.
std::vector<BatchSummary> run_batch(const NetworkGraph& g,
                                    std::span<const PlannerSpec> planners,
                                    int runs, std::uint64_t base_seed,
                                    const SimConfig& cfg);

/// run_batch plus, when requested, the stationary-counter baseline that
/// watches every node's true arrival stream.
std::vector<BatchSummary> estimation_benchmark(const NetworkGraph& g,
                                               std::span<const PlannerSpec> planners,
                                               int runs, bool with_counter,
                                               std::uint64_t base_seed,
                                               const SimConfig& cfg);

}  // namespace modhail
