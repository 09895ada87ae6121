#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "modhail/belief.hpp"

namespace modhail {

/// Vehicles-per-node decision plus the planner's own objective value.
struct Allocation {
  std::vector<int> counts;
  double total_cost = 0;
  int total() const;
};

/// Minimise sum (E[c_n] - v_n)^2 with at most fleet_size vehicles.
/// Greedy on marginal decreases, which is exact for this separable convex
/// objective; equal marginals go to the lower node index.
Allocation ev_allocation(std::span<const double> expected_customers, int fleet_size);

/// K(v, n) = w^2 for the smallest window radius w whose inclusive count
/// window [max(0, v-w), v+w] holds at least risk_threshold[n] mass.
struct CostMatrix {
  int fleet_size = 0;  // rows are v = 0..fleet_size
  int node_count = 0;
  std::vector<double> k;  // (fleet_size+1) x node_count, row major
  double at(int v, int n) const { return k[static_cast<std::size_t>(v) * node_count + n]; }
};

CostMatrix cc_cost_matrix(std::span<const PredictiveCountDist> dists, int fleet_size,
                          std::span<const double> risk_thresholds);

/// Minimise sum K(v_n, n) subject to sum v_n <= fleet_size, by dynamic
/// programming over (node, vehicles left). Among optima, prefers fewer total
/// vehicles, then the smallest count at the lowest node index.
Allocation cc_allocation(const CostMatrix& k, int fleet_size);

/// Expected-value allocation against realised counts (planning upper bound).
Allocation oracle_allocation(std::span<const long> realized_counts, int fleet_size);

/// The no-anticipation baseline: every vehicle keeps exploring.
Allocation sensing_allocation(std::size_t node_count, int fleet_size);

/// Negative binomial draw parameterised by mean and variance, realised as a
/// Gamma-Poisson mixture; collapses to Poisson when variance equals mean.
long sample_neg_binomial(double mean, double variance, std::mt19937_64& eng);

/// Belief whose predictive count distribution moment-matches a negative
/// binomial with the given count mean and standard deviation over t_pred:
/// fraction pinned near one, Gamma matched to the mixing distribution.
NodeBelief matched_count_belief(double mean_count, double std_count, double t_pred_min);

struct ComparisonRow {
  double stddev = 0;
  double ev_mean_cost = 0, ev_mean_cost_sd = 0;
  double ev_max_cost = 0, ev_max_cost_sd = 0;
  double cc_mean_cost = 0, cc_mean_cost_sd = 0;
  double cc_max_cost = 0, cc_max_cost_sd = 0;
};

/// Cost of expected-value vs chance-constrained hailing on synthetic counts:
/// every node draws an i.i.d. negative binomial count (fixed mean, swept
/// standard deviation); both planners allocate from the matched belief with
/// an effectively unbounded fleet; per-trial mean and max node cost
/// (c_n - v_n)^2 are averaged over trials.
std::vector<ComparisonRow> planner_comparison_experiment(
    double mean_rate_per_min, std::span<const double> std_grid, int node_count,
    double eta, int trials, std::uint64_t seed);

}  // namespace modhail
