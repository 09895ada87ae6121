#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace modhail {

// Rates are per minute throughout; durations passed to updates are minutes.

/// Gamma(shape alpha, rate beta) posterior over a Poisson arrival rate.
struct GammaBelief {
  double alpha = 1;
  double beta = 1;
  double mean() const { return alpha / beta; }
  double variance() const { return alpha / (beta * beta); }
};

/// Beta(a, b) posterior over a Bernoulli customer fraction.
struct BetaBelief {
  double a = 1;
  double b = 1;
  double mean() const { return a / (a + b); }
};

/// Joint belief about one node: arrival rate times customer fraction.
struct NodeBelief {
  GammaBelief rate;
  BetaBelief fraction;
};

/// Conjugate update after observing `count` arrivals over `duration_min`.
GammaBelief gamma_update(GammaBelief prior, long count, double duration_min);

/// Conjugate update after observing served customers and other pedestrians.
BetaBelief beta_update(BetaBelief prior, long customers, long non_customers);

/// Moment-matched Gamma for a sum of independent Gamma rates (the node rate
/// as seen through its outgoing links): matches sum mean M and variance V,
/// giving shape M^2/V and rate M/V.
GammaBelief node_rate_from_links(std::span<const GammaBelief> links);

/// Gauss hypergeometric 2F1(a,b;c;z) for z <= 0 and positive a, b, c,
/// via a Pfaff transform onto [0,1) and a convergent series.
/// Relative accuracy ~1e-14; throws on non-convergence.
double hyp2f1_nonpositive_z(double a, double b, double c, double z);

/// log 2F1 for the same domain; safe where the value under- or overflows.
double log_hyp2f1_nonpositive_z(double a, double b, double c, double z);

/// Predicted customer count distribution over a window, truncated where the
/// remaining tail mass drops below tail_tol. pmf[c] + tail_mass sums to one.
struct PredictiveCountDist {
  std::vector<double> pmf;
  double t_pred_min = 0;
  double tail_mass = 0;
  int max_count() const { return static_cast<int>(pmf.size()) - 1; }
  double mean() const;
  double variance() const;
};

/// Marginal P(c customers in t_pred_min) under Gamma rate and Beta fraction
/// uncertainty, evaluated in log space entry by entry.
PredictiveCountDist predictive_pmf(const NodeBelief& belief, double t_pred_min,
                                   double tail_tol = 1e-9, int c_cap = 10000);

/// P(count <= floor(x)); 0 for x < 0, >= 1 - tail_tol past the truncation.
double predictive_cdf(const PredictiveCountDist& dist, double x);

/// E[fraction] * E[rate] * t_pred: expected customer count in the window.
double expected_customers(const NodeBelief& belief, double t_pred_min);

/// Monte Carlo check of predictive_pmf: draws (rate, fraction) from the
/// belief, then a Poisson count. Returns the empirical pmf.
std::vector<double> mc_oracle_pmf(const NodeBelief& belief, double t_pred_min,
                                  long samples, std::uint64_t seed);

/// Total variation distance between two pmfs (missing entries are zero).
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace modhail
