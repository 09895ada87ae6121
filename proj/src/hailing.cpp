#include "modhail/hailing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "modhail/rng.hpp"

namespace modhail {

namespace {

constexpr double kPinned = 1e6;  // pseudo-count for an effectively known quantity

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

int Allocation::total() const {
  int t = 0;
  for (int v : counts) t += v;
  return t;
}

Allocation ev_allocation(std::span<const double> expected_customers, int fleet_size) {
  require(fleet_size >= 0, "ev_allocation: negative fleet");
  for (double e : expected_customers)
    require(e >= 0, "ev_allocation: negative expected count");

  const std::size_t n = expected_customers.size();
  Allocation a;
  a.counts.assign(n, 0);
  // Raising v_n by one lowers the cost by 2(E_n - v_n) - 1; repeatedly take
  // the largest positive decrease. Strict > keeps ties at the lowest index.
  for (int used = 0; used < fleet_size; ++used) {
    int best = -1;
    double best_dec = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double dec = 2 * (expected_customers[i] - a.counts[i]) - 1;
      if (dec > best_dec) {
        best_dec = dec;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;
    ++a.counts[best];
  }
  for (std::size_t i = 0; i < n; ++i) {
    double d = expected_customers[i] - a.counts[i];
    a.total_cost += d * d;
  }
  return a;
}

CostMatrix cc_cost_matrix(std::span<const PredictiveCountDist> dists, int fleet_size,
                          std::span<const double> risk_thresholds) {
  require(fleet_size >= 0, "cc_cost_matrix: negative fleet");
  require(dists.size() == risk_thresholds.size(),
          "cc_cost_matrix: one risk threshold per node");
  for (double eta : risk_thresholds)
    require(eta > 0 && eta < 1, "cc_cost_matrix: risk threshold must be in (0,1)");

  CostMatrix m;
  m.fleet_size = fleet_size;
  m.node_count = static_cast<int>(dists.size());
  m.k.assign(static_cast<std::size_t>(fleet_size + 1) * m.node_count, 0);

  for (int n = 0; n < m.node_count; ++n) {
    const auto& pmf = dists[n].pmf;
    std::vector<double> prefix(pmf.size());
    double cum = 0;
    for (std::size_t c = 0; c < pmf.size(); ++c) {
      cum += pmf[c];
      prefix[c] = cum;
    }
    const int last = static_cast<int>(pmf.size()) - 1;
    const double eta = risk_thresholds[n];
    if (cum < eta)
      throw std::runtime_error(
          "cc_cost_matrix: risk threshold " + std::to_string(eta) +
          " unreachable under the truncated distribution (total mass " +
          std::to_string(cum) + ")");
    for (int v = 0; v <= fleet_size; ++v) {
      int w = 0;
      for (;; ++w) {
        int hi = std::min(v + w, last);
        int lo = std::max(0, v - w);
        double mass = lo > hi ? 0.0 : prefix[hi] - (lo > 0 ? prefix[lo - 1] : 0.0);
        if (v - w <= 0 && hi == last) mass = cum;  // whole support
        if (mass >= eta) break;
      }
      m.k[static_cast<std::size_t>(v) * m.node_count + n] = static_cast<double>(w) * w;
    }
  }
  return m;
}

Allocation cc_allocation(const CostMatrix& k, int fleet_size) {
  require(fleet_size >= 0, "cc_allocation: negative fleet");
  require(fleet_size <= k.fleet_size, "cc_allocation: fleet exceeds cost matrix rows");
  const int n = k.node_count;

  // suffix[i][u]: best (cost, vehicles used) over nodes i..n-1 with at most
  // u vehicles. Reconstructing forward and taking the smallest count that
  // still reaches the optimum yields the tie-break order: cost, then total
  // vehicles, then the lexicographically smallest counts vector.
  struct Best {
    double cost = std::numeric_limits<double>::infinity();
    int used = 0;
  };
  std::vector<std::vector<Best>> suffix(n + 1,
                                        std::vector<Best>(fleet_size + 1));
  for (int u = 0; u <= fleet_size; ++u) suffix[n][u] = {0.0, 0};
  for (int i = n - 1; i >= 0; --i) {
    for (int u = 0; u <= fleet_size; ++u) {
      Best best;
      for (int v = 0; v <= std::min(u, k.fleet_size); ++v) {
        const Best& rest = suffix[i + 1][u - v];
        double cost = k.at(v, i) + rest.cost;
        int used = v + rest.used;
        if (cost < best.cost || (cost == best.cost && used < best.used))
          best = {cost, used};
      }
      suffix[i][u] = best;
    }
  }

  Allocation a;
  a.counts.assign(n, 0);
  a.total_cost = suffix[0][fleet_size].cost;
  int left = fleet_size;
  for (int i = 0; i < n; ++i) {
    const Best target = suffix[i][left];
    for (int v = 0; v <= std::min(left, k.fleet_size); ++v) {
      const Best& rest = suffix[i + 1][left - v];
      if (k.at(v, i) + rest.cost == target.cost && v + rest.used == target.used) {
        a.counts[i] = v;
        left -= v;
        break;
      }
    }
  }
  return a;
}

Allocation oracle_allocation(std::span<const long> realized_counts, int fleet_size) {
  std::vector<double> e;
  e.reserve(realized_counts.size());
  for (long c : realized_counts) {
    require(c >= 0, "oracle_allocation: negative count");
    e.push_back(static_cast<double>(c));
  }
  return ev_allocation(e, fleet_size);
}

Allocation sensing_allocation(std::size_t node_count, int fleet_size) {
  require(fleet_size >= 0, "sensing_allocation: negative fleet");
  Allocation a;
  a.counts.assign(node_count, 0);
  return a;
}

long sample_neg_binomial(double mean, double variance, std::mt19937_64& eng) {
  require(mean > 0, "sample_neg_binomial: mean must be positive");
  require(variance >= mean, "sample_neg_binomial: variance below Poisson is invalid");
  double lam = mean;
  double mix_var = variance - mean;
  if (mix_var > 0) {
    double shape = mean * mean / mix_var;
    double scale = mix_var / mean;
    std::gamma_distribution<double> gamma(shape, scale);
    lam = gamma(eng);
  }
  if (!(lam > 0)) return 0;
  std::poisson_distribution<long> pois(lam);
  return pois(eng);
}

NodeBelief matched_count_belief(double mean_count, double std_count, double t_pred_min) {
  require(mean_count > 0, "matched_count_belief: mean must be positive");
  require(t_pred_min > 0, "matched_count_belief: window must be positive");
  double variance = std_count * std_count;

  NodeBelief nb;
  nb.fraction = {kPinned, 1.0};
  double mix_var = variance - mean_count;
  if (mix_var <= mean_count * 1e-9) {
    // Poisson limit, also used to clamp sub-Poisson spreads:
    // a near-point-mass rate at mean_count / t_pred.
    nb.rate = {kPinned, kPinned * t_pred_min / mean_count};
  } else {
    // Count-scale mixing Gamma(shape m^2/V, rate m/V); shape is scale-free
    // and the rate converts to per-minute by multiplying with t_pred.
    nb.rate = {mean_count * mean_count / mix_var,
               (mean_count / mix_var) * t_pred_min};
  }
  return nb;
}

std::vector<ComparisonRow> planner_comparison_experiment(
    double mean_rate_per_min, std::span<const double> std_grid, int node_count,
    double eta, int trials, std::uint64_t seed) {
  require(node_count > 0 && trials > 0, "planner_comparison_experiment: empty setup");
  require(eta > 0 && eta < 1, "planner_comparison_experiment: eta out of range");

  const double t_pred = 1.0;  // per-minute counts
  const double mean_count = mean_rate_per_min * t_pred;

  std::vector<ComparisonRow> rows;
  for (std::size_t si = 0; si < std_grid.size(); ++si) {
    const double sd = std_grid[si];
    const double variance = sd * sd;
    require(variance >= mean_count * (1 - 1e-9),
            "planner_comparison_experiment: std below the Poisson floor");

    NodeBelief belief = matched_count_belief(mean_count, sd, t_pred);
    PredictiveCountDist dist = predictive_pmf(belief, t_pred);

    // Large enough that the fleet constraint never binds.
    int v_max = 0;
    {
      double cum = 0;
      for (std::size_t c = 0; c < dist.pmf.size(); ++c) {
        cum += dist.pmf[c];
        if (cum >= std::max(eta, 0.999)) {
          v_max = static_cast<int>(c) + 2;
          break;
        }
      }
      if (v_max == 0) v_max = dist.max_count() + 2;
    }

    std::vector<double> expected(node_count,
                                 expected_customers(belief, t_pred));
    Allocation ev = ev_allocation(expected, node_count * (static_cast<int>(mean_count) + 2));

    // The fleet is unbounded here, so nodes decouple and every node takes the
    // window-minimizing count of the shared distribution.
    std::vector<double> one_eta{eta};
    std::vector<PredictiveCountDist> one_dist{dist};
    CostMatrix probe = cc_cost_matrix(one_dist, v_max, one_eta);
    int vstar = 0;
    for (int v = 0; v <= v_max; ++v)
      if (probe.at(v, 0) < probe.at(vstar, 0)) vstar = v;
    Allocation cc;
    cc.counts.assign(node_count, vstar);
    cc.total_cost = node_count * probe.at(vstar, 0);

    ComparisonRow row;
    row.stddev = sd;
    double evm = 0, evm2 = 0, evx = 0, evx2 = 0;
    double ccm = 0, ccm2 = 0, ccx = 0, ccx2 = 0;
    for (int t = 0; t < trials; ++t) {
      std::mt19937_64 eng = make_engine(seed, "planner-compare",
                                        (si << 32) | static_cast<std::uint64_t>(t));
      double ev_sum = 0, ev_max = 0, cc_sum = 0, cc_max = 0;
      for (int n = 0; n < node_count; ++n) {
        double c = static_cast<double>(sample_neg_binomial(mean_count, variance, eng));
        double de = c - ev.counts[n], dc = c - cc.counts[n];
        ev_sum += de * de;
        cc_sum += dc * dc;
        ev_max = std::max(ev_max, de * de);
        cc_max = std::max(cc_max, dc * dc);
      }
      double ev_mean = ev_sum / node_count, cc_mean = cc_sum / node_count;
      evm += ev_mean;
      evm2 += ev_mean * ev_mean;
      evx += ev_max;
      evx2 += ev_max * ev_max;
      ccm += cc_mean;
      ccm2 += cc_mean * cc_mean;
      ccx += cc_max;
      ccx2 += cc_max * cc_max;
    }
    auto finish = [trials](double s, double s2, double& mean, double& sd_out) {
      mean = s / trials;
      double var = s2 / trials - mean * mean;
      sd_out = var > 0 ? std::sqrt(var) : 0.0;
    };
    finish(evm, evm2, row.ev_mean_cost, row.ev_mean_cost_sd);
    finish(evx, evx2, row.ev_max_cost, row.ev_max_cost_sd);
    finish(ccm, ccm2, row.cc_mean_cost, row.cc_mean_cost_sd);
    finish(ccx, ccx2, row.cc_max_cost, row.cc_max_cost_sd);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace modhail
