#include "modhail/belief.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "modhail/rng.hpp"

namespace modhail {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

GammaBelief gamma_update(GammaBelief prior, long count, double duration_min) {
  require(prior.alpha > 0 && prior.beta > 0, "gamma_update: invalid prior");
  require(count >= 0, "gamma_update: negative count");
  require(duration_min > 0, "gamma_update: duration must be positive");
  return {prior.alpha + static_cast<double>(count), prior.beta + duration_min};
}

BetaBelief beta_update(BetaBelief prior, long customers, long non_customers) {
  require(prior.a > 0 && prior.b > 0, "beta_update: invalid prior");
  require(customers >= 0 && non_customers >= 0, "beta_update: negative count");
  return {prior.a + static_cast<double>(customers),
          prior.b + static_cast<double>(non_customers)};
}

GammaBelief node_rate_from_links(std::span<const GammaBelief> links) {
  require(!links.empty(), "node_rate_from_links: no links");
  double m = 0, v = 0;
  for (const GammaBelief& g : links) {
    require(g.alpha > 0 && g.beta > 0, "node_rate_from_links: invalid link belief");
    m += g.mean();
    v += g.variance();
  }
  return {m * m / v, m / v};
}

double log_hyp2f1_nonpositive_z(double a, double b, double c, double z) {
  require(a > 0 && b > 0 && c > 0, "hyp2f1: parameters must be positive");
  require(z <= 0, "hyp2f1: argument must be non-positive");
  if (z == 0) return 0.0;

  // Pfaff-transform onto w in (0,1). The a<->b symmetry leaves two pivots:
  //   (1-z)^-a * 2F1(a, c-b; c; w)   or   (1-z)^-b * 2F1(b, c-a; c; w).
  // Pick the one whose series parameters are small (and non-negative where
  // possible): with one huge parameter the wrong pivot needs ~1e6 terms or
  // alternates catastrophically, the right one collapses in a handful.
  double w = z / (z - 1.0);
  double qa = c - b, qb = c - a;
  bool pivot_a;
  if (qa >= 0 && qb >= 0)
    pivot_a = a * qa <= b * qb;
  else if (qa >= 0)
    pivot_a = true;
  else if (qb >= 0)
    pivot_a = false;
  else
    pivot_a = a * -qa <= b * -qb;
  double p = pivot_a ? a : b;
  double q = pivot_a ? qa : qb;

  double term = 1.0, sum = 1.0, prev = 1.0;
  const int cap = 200000;
  int k = 0;
  for (; k < cap; ++k) {
    term *= (p + k) * (q + k) / ((c + k) * (k + 1.0)) * w;
    sum += term;
    if (term == 0) break;
    if (std::abs(term) <= 1e-16 * std::abs(sum) &&
        std::abs(prev) <= 1e-16 * std::abs(sum))
      break;
    prev = term;
  }
  if (k >= cap)
    throw std::runtime_error("hyp2f1: series did not converge (pathological parameters)");
  if (!(sum > 0))
    throw std::runtime_error("hyp2f1: series lost positivity");
  return std::log(sum) - p * std::log1p(-z);
}

double hyp2f1_nonpositive_z(double a, double b, double c, double z) {
  return std::exp(log_hyp2f1_nonpositive_z(a, b, c, z));
}

double PredictiveCountDist::mean() const {
  double m = 0;
  for (std::size_t c = 1; c < pmf.size(); ++c) m += static_cast<double>(c) * pmf[c];
  return m;
}

double PredictiveCountDist::variance() const {
  double m = mean(), s = 0;
  for (std::size_t c = 0; c < pmf.size(); ++c) {
    double d = static_cast<double>(c) - m;
    s += d * d * pmf[c];
  }
  return s;
}

PredictiveCountDist predictive_pmf(const NodeBelief& belief, double t_pred_min,
                                   double tail_tol, int c_cap) {
  const double al = belief.rate.alpha, be = belief.rate.beta;
  const double a = belief.fraction.a, b = belief.fraction.b;
  require(al > 0 && be > 0 && a > 0 && b > 0, "predictive_pmf: invalid belief");
  require(t_pred_min > 0, "predictive_pmf: window must be positive");
  require(tail_tol > 0 && tail_tol < 1, "predictive_pmf: tail_tol out of range");
  require(c_cap >= 1, "predictive_pmf: c_cap must be >= 1");

  // P(c) = Gamma-ratio prefactor * (t/beta)^c * 2F1(a+c, alpha+c; a+b+c; -t/beta),
  // marginalising Poisson(fraction * rate * t) over both posteriors. The
  // prefactor is carried as a running log; the 2F1 log folds in its Pfaff
  // prefactor, so entries deep in the tail neither overflow nor underflow.
  const double z = -t_pred_min / be;
  const double log_tb = std::log(t_pred_min) - std::log(be);

  PredictiveCountDist dist;
  dist.t_pred_min = t_pred_min;
  double lnpre = 0, cum = 0;
  for (int c = 0; c < c_cap; ++c) {
    double lf = log_hyp2f1_nonpositive_z(a + c, al + c, a + b + c, z);
    double p = std::exp(lnpre + lf);
    dist.pmf.push_back(p);
    cum += p;
    if (cum >= 1.0 - tail_tol) {
      dist.tail_mass = std::max(0.0, 1.0 - cum);
      return dist;
    }
    lnpre += std::log(al + c) + std::log(a + c) - std::log(c + 1.0) -
             std::log(a + b + c) + log_tb;
  }
  throw std::runtime_error("predictive_pmf: count cap " + std::to_string(c_cap) +
                           " reached before tail tolerance");
}

double predictive_cdf(const PredictiveCountDist& dist, double x) {
  if (x < 0) return 0;
  long idx = static_cast<long>(std::floor(x));
  double cum = 0;
  long last = std::min<long>(idx, dist.max_count());
  for (long c = 0; c <= last; ++c) cum += dist.pmf[c];
  return cum;
}

double expected_customers(const NodeBelief& belief, double t_pred_min) {
  require(t_pred_min > 0, "expected_customers: window must be positive");
  return belief.fraction.mean() * belief.rate.mean() * t_pred_min;
}

std::vector<double> mc_oracle_pmf(const NodeBelief& belief, double t_pred_min,
                                  long samples, std::uint64_t seed) {
  require(samples > 0, "mc_oracle_pmf: need samples");
  require(t_pred_min > 0, "mc_oracle_pmf: window must be positive");
  std::mt19937_64 eng(seed);
  std::gamma_distribution<double> rate(belief.rate.alpha, 1.0 / belief.rate.beta);
  std::gamma_distribution<double> ga(belief.fraction.a, 1.0);
  std::gamma_distribution<double> gb(belief.fraction.b, 1.0);

  std::vector<double> hist;
  for (long i = 0; i < samples; ++i) {
    double lam = rate(eng);
    double x = ga(eng), y = gb(eng);
    double frac = (x + y > 0) ? x / (x + y) : 0.0;
    double mean = lam * frac * t_pred_min;
    long count = 0;
    if (mean > 0) {
      std::poisson_distribution<long> pois(mean);
      count = pois(eng);
    }
    if (static_cast<std::size_t>(count) >= hist.size()) hist.resize(count + 1, 0.0);
    hist[count] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(samples);
  return hist;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  std::size_t n = std::max(p.size(), q.size());
  double tv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = i < p.size() ? p[i] : 0.0;
    double b = i < q.size() ? q[i] : 0.0;
    tv += std::abs(a - b);
  }
  return tv / 2;
}

}  // namespace modhail
