#include "modhail/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "modhail/explore.hpp"
#include "modhail/hailing.hpp"
#include "modhail/rng.hpp"

namespace modhail {

namespace {

constexpr double kEps = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const char* msg) {
  if (!ok) fail(msg);
}

// Stable shuffle independent of library shuffle implementations.
template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(v[i - 1], v[d(eng)]);
  }
}

}  // namespace

std::vector<double> DemandScenario::true_customer_rate_per_min(const NetworkGraph& g) const {
  std::vector<double> v(g.node_count(), 0.0);
  for (const auto& r : routes) v.at(r.route.origin) += r.rate_per_min * r.customer_fraction;
  return v;
}

std::vector<double> DemandScenario::true_link_rate_per_min(const NetworkGraph& g) const {
  // Exact when every arrival walks its full route, i.e. no customers get rides.
  std::vector<double> v(g.links().size(), 0.0);
  for (const auto& r : routes)
    for (int l : r.route.links) v.at(l) += r.rate_per_min;
  return v;
}

DemandScenario make_benchmark_scenario(const NetworkGraph& g, std::uint64_t seed) {
  require(g.node_count() >= 10, "benchmark scenario needs at least 10 nodes");
  auto eng = make_engine(seed, "scenario");
  std::vector<int> origins(g.node_count());
  std::iota(origins.begin(), origins.end(), 0);
  fisher_yates(origins, eng);

  DemandScenario s;
  for (int i = 0; i < 10; ++i) {
    DemandRoute r;
    int origin = origins[i];
    std::uniform_int_distribution<int> pick(0, g.node_count() - 2);
    int dest = pick(eng);
    if (dest >= origin) ++dest;
    r.route = g.route(origin, dest);
    r.rate_per_min = 1.0;
    r.customer_fraction = 0.0;
    s.routes.push_back(std::move(r));
  }
  std::vector<int> which(10);
  std::iota(which.begin(), which.end(), 0);
  fisher_yates(which, eng);
  for (int i = 0; i < 3; ++i) s.routes[which[i]].customer_fraction = 1.0;
  return s;
}

PlannerSpec PlannerSpec::parse(const std::string& text) {
  PlannerSpec s;
  if (text == "sensing") {
    s.kind = Kind::Sensing;
  } else if (text == "ev") {
    s.kind = Kind::ExpectedValue;
  } else if (text == "oracle") {
    s.kind = Kind::Oracle;
  } else if (text == "counter") {
    s.kind = Kind::Counter;
  } else if (text == "cc" || text.starts_with("cc:")) {
    s.kind = Kind::ChanceConstrained;
    if (text.size() > 2) {
      std::size_t used = 0;
      double eta = 0;
      try {
        eta = std::stod(text.substr(3), &used);
      } catch (const std::exception&) {
        fail("bad risk threshold in planner '" + text + "'");
      }
      if (used != text.size() - 3 || !(eta > 0.0) || !(eta < 1.0))
        fail("risk threshold must be in (0,1) in planner '" + text + "'");
      s.eta = eta;
    }
  } else {
    fail("unknown planner '" + text + "' (expected sensing, ev, cc[:eta], oracle or counter)");
  }
  return s;
}

std::string PlannerSpec::name() const {
  switch (kind) {
    case Kind::Sensing: return "sensing";
    case Kind::ExpectedValue: return "ev";
    case Kind::Oracle: return "oracle";
    case Kind::Counter: return "counter";
    case Kind::ChanceConstrained: {
      std::ostringstream os;
      os << "cc:" << eta;
      return os.str();
    }
  }
  return "?";
}

std::vector<Arrival> generate_arrivals(const DemandScenario& scenario, double duration_s,
                                       double step_s, std::uint64_t seed) {
  require(duration_s > 0 && step_s > 0, "duration and step must be positive");
  long steps = std::lround(duration_s / step_s);
  require(steps >= 1 && std::abs(steps * step_s - duration_s) < 1e-6,
          "duration must be a whole number of steps");
  auto eng = make_engine(seed, "arrivals");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Arrival> out;
  for (long k = 0; k < steps; ++k) {
    for (std::size_t ri = 0; ri < scenario.routes.size(); ++ri) {
      const DemandRoute& r = scenario.routes[ri];
      if (r.rate_per_min <= 0) continue;
      long n = std::poisson_distribution<long>(r.rate_per_min * step_s / 60.0)(eng);
      for (long j = 0; j < n; ++j) {
        Arrival a;
        a.t_s = (k + u01(eng)) * step_s;
        a.route_index = static_cast<int>(ri);
        a.customer = u01(eng) < r.customer_fraction;
        out.push_back(a);
      }
    }
  }
  return out;
}

BeliefStore BeliefStore::priors(const NetworkGraph& g, const SimConfig& cfg) {
  // The prior is uniform per node, not per link: each node expects the same
  // pedestrian flux split across its approaches. Without the degree scaling,
  // well-connected intersections would look busier than a confirmed customer
  // stream and monopolize the probe posts.
  BeliefStore s;
  s.links.reserve(g.links().size());
  for (const Link& l : g.links()) {
    auto deg = static_cast<double>(g.links_from(l.origin).size());
    s.links.push_back(GammaBelief{cfg.link_prior.alpha / deg, cfg.link_prior.beta});
  }
  s.fractions.assign(g.node_count(), cfg.fraction_prior);
  return s;
}

GammaBelief BeliefStore::node_rate(const NetworkGraph& g, NodeId n) const {
  std::vector<GammaBelief> outs;
  outs.reserve(g.links_from(n).size());
  for (int l : g.links_from(n)) outs.push_back(links.at(l));
  return node_rate_from_links(outs);
}

NodeBelief BeliefStore::node(const NetworkGraph& g, NodeId n) const {
  return NodeBelief{node_rate(g, n), fractions.at(n)};
}

std::vector<double> BeliefStore::customer_rate_estimates(const NetworkGraph& g) const {
  std::vector<double> est(g.node_count());
  for (int n = 0; n < g.node_count(); ++n) {
    NodeBelief b = node(g, n);
    est[n] = b.fraction.mean() * b.rate.mean();
  }
  return est;
}

nlohmann::ordered_json beliefs_to_json(const BeliefStore& store) {
  nlohmann::ordered_json doc;
  auto& links = doc["links"] = nlohmann::ordered_json::array();
  for (const auto& b : store.links)
    links.push_back({{"alpha", b.alpha}, {"beta", b.beta}});
  auto& fractions = doc["fractions"] = nlohmann::ordered_json::array();
  for (const auto& b : store.fractions)
    fractions.push_back({{"a", b.a}, {"b", b.b}});
  return doc;
}

BeliefStore beliefs_from_json(const nlohmann::json& doc) {
  BeliefStore s;
  for (const auto& e : doc.at("links"))
    s.links.push_back({e.at("alpha").get<double>(), e.at("beta").get<double>()});
  for (const auto& e : doc.at("fractions"))
    s.fractions.push_back({e.at("a").get<double>(), e.at("b").get<double>()});
  return s;
}

double SimMetrics::fraction_served() const {
  return customers_total > 0
             ? static_cast<double>(customers_served) / static_cast<double>(customers_total)
             : 0.0;
}

double SimMetrics::max_horizon_cost() const {
  double m = 0;
  for (double c : horizon_costs) m = std::max(m, c);
  return m;
}

namespace {

enum class EventKind { CustomerSpawn, SpawnWalk, Cross };

// A pedestrian stepping onto a link. Spawning walkers enter their first
// link immediately; expired customers enter theirs at the next step start.
struct EntryEvent {
  double t_s = 0;
  int link = -1;
  EventKind kind = EventKind::Cross;
};

struct Ped {
  enum class Phase { Hailing, Walking, Riding, Done };
  int route_index = -1;
  bool customer = false;
  bool seen = false;  // a posted vehicle watched this customer arrive
  double spawn_s = 0;
  Phase phase = Phase::Hailing;
  std::size_t leg = 0;  // index into route links while walking
  double leg_m = 0;
  double walk_start_s = 0;
};

struct Veh {
  enum class Mode { Idle, Explore, ToPost, AtPost, Serving };
  Mode mode = Mode::Idle;
  bool at_node = true;
  int node = 0;    // valid when at_node
  int link = -1;   // valid when !at_node
  double link_m = 0;
  std::vector<int> path;  // links still to enter (current link excluded)
  std::size_t path_pos = 0;
  int post_node = -1;
  int passenger = -1;
  long window_count = 0;     // entries seen on the current link so far
  double window_start_s = 0;
  double park_start_s = 0;
};

struct Sim {
  const NetworkGraph& g;
  const DemandScenario& scenario;
  const PlannerSpec planner;
  const SimConfig& cfg;
  const std::uint64_t seed;
  std::ostream* trace;

  BeliefStore store;
  std::vector<GammaBelief> counter_rate;  // stationary-counter baseline
  std::vector<BetaBelief> counter_frac;

  std::vector<Arrival> arrivals;
  std::size_t next_arrival = 0;
  int horizons = 0;
  std::vector<std::vector<long>> realized;  // customer spawns per horizon/node
  std::vector<std::vector<int>> decided;    // planned posts per horizon/node
  std::vector<int> post_target;
  std::vector<double> true_rate;

  std::vector<Ped> peds;
  std::vector<Veh> vehicles;

  std::vector<EntryEvent> events;   // this step
  std::vector<std::pair<int, double>> departed_observers;  // node, watching since
  std::vector<long> cnt_rate, cnt_c, cnt_nc;               // per-step spawn tallies

  std::map<std::tuple<double, double, double, double>, PredictiveCountDist> pmf_cache;

  SimMetrics metrics;

  Sim(const NetworkGraph& g_, const DemandScenario& sc, const PlannerSpec& pl,
      const SimConfig& c, std::uint64_t sd, std::ostream* tr)
      : g(g_), scenario(sc), planner(pl), cfg(c), seed(sd), trace(tr) {}

  Vec2 lerp(const Link& l, double along_m) const {
    const Vec2& a = g.position(l.origin);
    const Vec2& b = g.position(l.dest);
    double f = along_m / l.length_m;
    return {a.x_m + f * (b.x_m - a.x_m), a.y_m + f * (b.y_m - a.y_m)};
  }

  Vec2 veh_pos(const Veh& v) const {
    return v.at_node ? g.position(v.node) : lerp(g.link(v.link), v.link_m);
  }

  Vec2 walker_pos(const Ped& p) const {
    const Route& r = scenario.routes[p.route_index].route;
    if (p.leg >= r.links.size()) return g.position(r.dest);
    return lerp(g.link(r.links[p.leg]), p.leg_m);
  }

  // Windows share exact endpoints, so >=from / <to partitions without
  // gaps or double counting.
  long count_events(int link, double from, double to) const {
    long k = 0;
    for (const EntryEvent& e : events)
      if (e.link == link && e.t_s >= from && e.t_s < to) ++k;
    return k;
  }

  const PredictiveCountDist& cached_pmf(const NodeBelief& b, double t_pred_min) {
    auto key = std::make_tuple(b.rate.alpha, b.rate.beta, b.fraction.a, b.fraction.b);
    auto it = pmf_cache.find(key);
    if (it == pmf_cache.end())
      it = pmf_cache.emplace(key, predictive_pmf(b, t_pred_min)).first;
    return it->second;
  }

  void plan(int h, double now) {
    double t_pred_min = cfg.horizon_s / 60.0;
    Allocation alloc;
    switch (planner.kind) {
      case PlannerSpec::Kind::Sensing:
      case PlannerSpec::Kind::Counter:
        alloc = sensing_allocation(g.node_count(), cfg.fleet_size);
        break;
      case PlannerSpec::Kind::ExpectedValue: {
        std::vector<double> e(g.node_count());
        for (int n = 0; n < g.node_count(); ++n)
          e[n] = expected_customers(store.node(g, n), t_pred_min);
        alloc = ev_allocation(e, cfg.fleet_size);
        break;
      }
      case PlannerSpec::Kind::ChanceConstrained: {
        std::vector<PredictiveCountDist> dists;
        dists.reserve(g.node_count());
        for (int n = 0; n < g.node_count(); ++n)
          dists.push_back(cached_pmf(store.node(g, n), t_pred_min));
        std::vector<double> risk(g.node_count(), planner.eta);
        alloc = cc_allocation(cc_cost_matrix(dists, cfg.fleet_size, risk), cfg.fleet_size);
        break;
      }
      case PlannerSpec::Kind::Oracle:
        alloc = oracle_allocation(realized[h], cfg.fleet_size);
        break;
    }
    decided[h] = alloc.counts;
    post_target = alloc.counts;
    for (Veh& v : vehicles) {
      if (v.mode == Veh::Mode::AtPost || v.mode == Veh::Mode::ToPost) {
        v.mode = Veh::Mode::Idle;
        v.post_node = -1;
        v.path.clear();
        v.path_pos = 0;
      }
    }
    if (trace) {
      *trace << now << " plan horizon=" << h << " posts=";
      bool first = true;
      for (int n = 0; n < g.node_count(); ++n)
        if (post_target[n] > 0) {
          *trace << (first ? "" : ",") << n << ":" << post_target[n];
          first = false;
        }
      if (first) *trace << "-";
      *trace << "\n";
      for (int n = 0; n < g.node_count(); ++n) {
        NodeBelief b = store.node(g, n);
        double ec = expected_customers(b, t_pred_min);
        if (ec < 0.3 && post_target[n] == 0) continue;
        *trace << "  node " << n << " rate=" << b.rate.alpha / b.rate.beta
               << " frac=" << b.fraction.a / (b.fraction.a + b.fraction.b) << " ec=" << ec
               << " v=" << post_target[n];
        if (planner.kind == PlannerSpec::Kind::ChanceConstrained) {
          std::vector<PredictiveCountDist> one{cached_pmf(b, t_pred_min)};
          std::vector<double> risk{planner.eta};
          CostMatrix km = cc_cost_matrix(one, cfg.fleet_size, risk);
          *trace << " K=";
          for (int v = 0; v <= cfg.fleet_size; ++v) *trace << (v ? "," : "") << km.at(v, 0);
        }
        *trace << "\n";
      }
    }
  }

  void spawn_until(double t1) {
    while (next_arrival < arrivals.size() && arrivals[next_arrival].t_s < t1) {
      const Arrival& a = arrivals[next_arrival++];
      const Route& r = scenario.routes[a.route_index].route;
      Ped p;
      p.route_index = a.route_index;
      p.customer = a.customer;
      p.spawn_s = a.t_s;
      if (a.customer) {
        p.phase = Ped::Phase::Hailing;
        ++metrics.customers_total;
        ++cnt_rate[r.origin];
        ++cnt_c[r.origin];
        // The spawn is the node arrival. Counting it now instead of at pickup
        // or give-up keeps observed windows unbiased for the entry rate.
        events.push_back({a.t_s, r.links.front(), EventKind::CustomerSpawn});
        for (const Veh& v : vehicles)
          if (v.mode == Veh::Mode::AtPost && v.node == r.origin &&
              v.park_start_s <= a.t_s + kEps) {
            p.seen = true;
            break;
          }
      } else {
        p.phase = Ped::Phase::Walking;
        p.walk_start_s = a.t_s;
        events.push_back({a.t_s, r.links.front(), EventKind::SpawnWalk});
      }
      if (trace)
        *trace << a.t_s << " spawn ped=" << peds.size() << " node=" << r.origin
               << " customer=" << (a.customer ? 1 : 0) << "\n";
      peds.push_back(std::move(p));
    }
  }

  void move_walkers(double t0, double t1) {
    for (Ped& p : peds) {
      if (p.phase != Ped::Phase::Walking) continue;
      double tau = std::max(t0, p.walk_start_s);
      if (tau >= t1 - kEps) continue;
      const Route& r = scenario.routes[p.route_index].route;
      Vec2 before = walker_pos(p);
      double dist = scenario.walk_speed_mps * (t1 - tau);
      while (dist > kEps) {
        const Link& l = g.link(r.links[p.leg]);
        double remain = l.length_m - p.leg_m;
        if (dist < remain - kEps) {
          p.leg_m += dist;
          break;
        }
        tau += remain / scenario.walk_speed_mps;
        dist -= remain;
        ++p.leg;
        p.leg_m = 0;
        if (p.leg == r.links.size()) {
          p.phase = Ped::Phase::Done;
          break;
        }
        events.push_back({tau, r.links[p.leg], EventKind::Cross});
      }
      metrics.max_walker_step_m = std::max(metrics.max_walker_step_m,
                                           distance_m(before, walker_pos(p)));
    }
  }

  void enter_link(Veh& v, double tau) {
    v.link = v.path[v.path_pos++];
    v.at_node = false;
    v.link_m = 0;
    v.window_count = 0;
    v.window_start_s = tau;
  }

  void flush_window(Veh& v, double exit_t) {
    double dur_min = (exit_t - v.window_start_s) / 60.0;
    if (dur_min > 0)
      store.links[v.link] = gamma_update(store.links[v.link], v.window_count, dur_min);
    v.window_count = 0;
  }

  void arrive_at_node(Veh& v, double tau) {
    switch (v.mode) {
      case Veh::Mode::Serving: {
        Ped& p = peds[v.passenger];
        const Route& r = scenario.routes[p.route_index].route;
        if (v.node == r.dest) {
          p.phase = Ped::Phase::Done;
          if (trace)
            *trace << tau << " dropoff ped=" << v.passenger << " node=" << v.node << "\n";
          v.passenger = -1;
          v.mode = Veh::Mode::Idle;
          v.path.clear();
          v.path_pos = 0;
        } else if (v.path_pos >= v.path.size()) {
          v.path = g.route(v.node, r.dest).links;
          v.path_pos = 0;
        }
        break;
      }
      case Veh::Mode::ToPost:
        if (v.node == v.post_node) {
          v.mode = Veh::Mode::AtPost;
          v.park_start_s = tau;
          v.path.clear();
          v.path_pos = 0;
        } else if (v.path_pos >= v.path.size()) {
          v.path = g.route(v.node, v.post_node).links;
          v.path_pos = 0;
        }
        break;
      case Veh::Mode::Explore:
        if (v.path_pos >= v.path.size()) {
          v.mode = Veh::Mode::Idle;
          v.path.clear();
          v.path_pos = 0;
        }
        break;
      default:
        break;
    }
  }

  void move_vehicles(double t0, double t1) {
    for (Veh& v : vehicles) {
      Vec2 before = veh_pos(v);
      double tau = t0;
      while (tau < t1 - kEps) {
        if (v.at_node) {
          if (v.path_pos < v.path.size())
            enter_link(v, tau);
          else
            break;  // parked or waiting for staffing
        } else {
          const Link& l = g.link(v.link);
          double need_s = (l.length_m - v.link_m) / l.speed_mps;
          if (need_s > (t1 - tau) + kEps) {
            v.window_count += count_events(v.link, tau, t1);
            v.link_m += (t1 - tau) * l.speed_mps;
            tau = t1;
          } else {
            double exit_t = tau + need_s;
            v.window_count += count_events(v.link, tau, exit_t);
            flush_window(v, exit_t);
            v.at_node = true;
            v.node = l.dest;
            v.link = -1;
            v.link_m = 0;
            tau = exit_t;
            arrive_at_node(v, tau);
          }
        }
      }
      metrics.max_vehicle_step_m =
          std::max(metrics.max_vehicle_step_m, distance_m(before, veh_pos(v)));
    }
  }

  void pickups(double now) {
    for (std::size_t pi = 0; pi < peds.size(); ++pi) {
      Ped& p = peds[pi];
      if (p.phase != Ped::Phase::Hailing) continue;
      const Route& r = scenario.routes[p.route_index].route;
      Vec2 at = g.position(r.origin);
      int best = -1;
      double best_d = 0;
      for (std::size_t vi = 0; vi < vehicles.size(); ++vi) {
        const Veh& v = vehicles[vi];
        if (v.mode == Veh::Mode::Serving || v.passenger >= 0) continue;
        double d = distance_m(veh_pos(v), at);
        if (d > scenario.pickup_radius_m + kEps) continue;
        if (best < 0 || d < best_d) {
          best = static_cast<int>(vi);
          best_d = d;
        }
      }
      if (best < 0) continue;
      Veh& v = vehicles[best];
      // Fraction evidence is a census of watched arrivals only. A lucky
      // drive-by pickup at an unwatched node would otherwise move the
      // customer share with no observation time behind it.
      if (p.seen) {
        store.fractions[r.origin] = beta_update(store.fractions[r.origin], 1, 0);
        p.seen = false;
      }
      if (v.mode == Veh::Mode::AtPost)
        departed_observers.emplace_back(v.node, std::max(v.park_start_s, now - cfg.step_s));
      v.post_node = -1;
      v.passenger = static_cast<int>(pi);
      v.mode = Veh::Mode::Serving;
      v.path.clear();
      v.path_pos = 0;
      ++metrics.customers_served;
      if (trace)
        *trace << now << " pickup ped=" << pi << " veh=" << best << " node=" << r.origin
               << " waited=" << now - p.spawn_s << "\n";
      if (v.at_node && v.node == r.dest) {
        // Zero-length ride: hailing within reach of the destination itself.
        p.phase = Ped::Phase::Done;
        v.passenger = -1;
        v.mode = Veh::Mode::Idle;
        continue;
      }
      p.phase = Ped::Phase::Riding;
      if (v.at_node) {
        v.path = v.node == r.origin ? r.links : g.route(v.node, r.dest).links;
      } else {
        int nd = g.link(v.link).dest;
        if (nd != r.dest) v.path = g.route(nd, r.dest).links;
      }
    }
  }

  void expiry(double t1) {
    for (std::size_t pi = 0; pi < peds.size(); ++pi) {
      Ped& p = peds[pi];
      if (p.phase != Ped::Phase::Hailing) continue;
      if (t1 - p.spawn_s < scenario.wait_limit_s - kEps) continue;
      const Route& r = scenario.routes[p.route_index].route;
      p.phase = Ped::Phase::Walking;
      p.leg = 0;
      p.leg_m = 0;
      p.walk_start_s = t1;
      ++metrics.customers_expired;
      // A watched arrival that walks off unserved lands on the non-customer
      // side of the census.
      if (p.seen) {
        store.fractions[r.origin] = beta_update(store.fractions[r.origin], 0, 1);
        p.seen = false;
      }
      if (trace) *trace << t1 << " giveup ped=" << pi << " node=" << r.origin << "\n";
    }
  }

  double travel_time_to(const Veh& v, NodeId n) const {
    if (v.at_node) return v.node == n ? 0.0 : g.route(v.node, n).travel_time_s;
    const Link& l = g.link(v.link);
    double t = (l.length_m - v.link_m) / l.speed_mps;
    if (l.dest != n) t += g.route(l.dest, n).travel_time_s;
    return t;
  }

  void staffing(double now) {
    std::vector<int> shortfall = post_target;
    for (const Veh& v : vehicles)
      if (v.mode == Veh::Mode::AtPost || v.mode == Veh::Mode::ToPost) --shortfall[v.post_node];
    long missing = 0;
    for (int m : shortfall) missing += std::max(0, m);

    std::vector<int> free;
    for (std::size_t vi = 0; vi < vehicles.size(); ++vi) {
      Veh::Mode m = vehicles[vi].mode;
      if (m == Veh::Mode::Idle || m == Veh::Mode::Explore) free.push_back(static_cast<int>(vi));
    }

    // Nearest free vehicle to each understaffed post, cheapest pair first.
    while (missing > 0) {
      double best_t = 0;
      int best_vi = -1, best_n = -1;
      for (int vi : free) {
        if (vi < 0) continue;
        for (int n = 0; n < g.node_count(); ++n) {
          if (shortfall[n] <= 0) continue;
          double t = travel_time_to(vehicles[vi], n);
          if (best_vi < 0 || t < best_t - kEps ||
              (t < best_t + kEps && (vi < best_vi || (vi == best_vi && n < best_n)))) {
            best_t = t;
            best_vi = vi;
            best_n = n;
          }
        }
      }
      if (best_vi < 0) break;  // every free vehicle is already posted or serving
      Veh& v = vehicles[best_vi];
      v.post_node = best_n;
      if (v.at_node) {
        if (v.node == best_n) {
          v.mode = Veh::Mode::AtPost;
          v.park_start_s = now;
          v.path.clear();
        } else {
          v.mode = Veh::Mode::ToPost;
          v.path = g.route(v.node, best_n).links;
        }
      } else {
        v.mode = Veh::Mode::ToPost;
        int nd = g.link(v.link).dest;
        v.path = nd == best_n ? std::vector<int>{} : g.route(nd, best_n).links;
      }
      v.path_pos = 0;
      --shortfall[best_n];
      --missing;
      *std::find(free.begin(), free.end(), best_vi) = -1;
    }

    // Remaining idle vehicles at a node go exploring; exploring vehicles'
    // unfinished links stay in the plan so routes spread out.
    VisitPlan ctx;
    for (const Veh& v : vehicles) {
      if (v.mode != Veh::Mode::Explore) continue;
      if (!v.at_node) ++ctx.visit_counts[v.link];
      for (std::size_t i = v.path_pos; i < v.path.size(); ++i) ++ctx.visit_counts[v.path[i]];
    }
    bool any_idle = false;
    for (const Veh& v : vehicles)
      if (v.mode == Veh::Mode::Idle && v.at_node) any_idle = true;
    if (!any_idle) return;

    for (Veh& v : vehicles) {
      if (v.mode != Veh::Mode::Idle || !v.at_node) continue;
      Route r = choose_exploration_route(v.node, store.links, g, ctx, cfg.route_len_links);
      for (int l : r.links) ++ctx.visit_counts[l];
      if (trace) {
        *trace << "  explore from=" << v.node << " links=";
        for (std::size_t i = 0; i < r.links.size(); ++i)
          *trace << (i ? "," : "") << r.links[i];
        *trace << "\n";
      }
      v.mode = Veh::Mode::Explore;
      v.path = std::move(r.links);
      v.path_pos = 0;
    }
  }

  void parked_observation(double t0, double t1) {
    std::map<int, double> cover;
    auto merge = [&](int n, double from) {
      auto [it, fresh] = cover.try_emplace(n, from);
      if (!fresh) it->second = std::min(it->second, from);
    };
    for (const Veh& v : vehicles)
      if (v.mode == Veh::Mode::AtPost) merge(v.node, std::max(v.park_start_s, t0));
    for (const auto& [n, from] : departed_observers) merge(n, from);

    for (const auto& [n, from] : cover) {
      if (t1 - from < kEps) continue;
      double dur_min = (t1 - from) / 60.0;
      // Every arrival counts toward the entry rate, but only ordinary walkers
      // are non-customer evidence. Pickups add the customer side at pickup
      // time, and a customer who expires unserved leaves no fraction evidence
      // either way.
      long walkers = 0;
      for (int l : g.links_from(n)) {
        long k = 0;
        for (const EntryEvent& e : events)
          if (e.link == l && e.t_s >= from && e.t_s < t1) {
            ++k;
            if (e.kind != EventKind::CustomerSpawn) ++walkers;
          }
        store.links[l] = gamma_update(store.links[l], k, dur_min);
      }
      if (walkers > 0) store.fractions[n] = beta_update(store.fractions[n], 0, walkers);
    }
  }

  void counter_observation(double dt_min) {
    for (const EntryEvent& e : events) {
      if (e.kind == EventKind::CustomerSpawn) continue;  // tallied at spawn
      int n = g.link(e.link).origin;
      ++cnt_rate[n];
      ++cnt_nc[n];
    }
    for (int n = 0; n < g.node_count(); ++n) {
      counter_rate[n] = gamma_update(counter_rate[n], cnt_rate[n], dt_min);
      if (cnt_c[n] + cnt_nc[n] > 0)
        counter_frac[n] = beta_update(counter_frac[n], cnt_c[n], cnt_nc[n]);
    }
  }

  void record_mse(double t_s) {
    std::vector<double> est;
    if (planner.kind == PlannerSpec::Kind::Counter) {
      est.resize(g.node_count());
      for (int n = 0; n < g.node_count(); ++n)
        est[n] = counter_frac[n].mean() * counter_rate[n].mean();
    } else {
      est = store.customer_rate_estimates(g);
    }
    double s = 0;
    for (int n = 0; n < g.node_count(); ++n) {
      double d = est[n] - true_rate[n];
      s += d * d;
    }
    metrics.mse_t_min.push_back(t_s / 60.0);
    metrics.mse.push_back(s / g.node_count());
  }

  void metrics_tick(double t1) {
    if (std::abs(std::remainder(t1, cfg.mse_every_s)) < 1e-6) record_mse(t1);
    if (std::abs(std::remainder(t1, cfg.horizon_s)) < 1e-6) {
      int h = static_cast<int>(std::lround(t1 / cfg.horizon_s)) - 1;
      if (h >= 0 && h < horizons) {
        double cost = 0;
        for (int n = 0; n < g.node_count(); ++n) {
          double d = static_cast<double>(realized[h][n]) - decided[h][n];
          cost += d * d;
        }
        metrics.horizon_costs.push_back(cost);
      }
    }
  }

  void validate() const {
    require(cfg.fleet_size >= 0, "fleet size must be nonnegative");
    require(cfg.step_s > 0 && cfg.horizon_s > 0 && cfg.duration_s > 0 && cfg.mse_every_s > 0,
            "times must be positive");
    require(cfg.route_len_links >= 1, "exploration routes need at least one link");
    long sph = std::lround(cfg.horizon_s / cfg.step_s);
    require(sph >= 1 && std::abs(sph * cfg.step_s - cfg.horizon_s) < 1e-6,
            "horizon must be a whole number of steps");
    long hs = std::lround(cfg.duration_s / cfg.horizon_s);
    require(hs >= 1 && std::abs(hs * cfg.horizon_s - cfg.duration_s) < 1e-6,
            "duration must be a whole number of horizons");
    require(scenario.walk_speed_mps > 0 && scenario.wait_limit_s >= 0 &&
                scenario.pickup_radius_m >= 0,
            "bad pedestrian parameters");
    for (const DemandRoute& r : scenario.routes) {
      require(r.route.origin >= 0 && r.route.origin < g.node_count() && r.route.dest >= 0 &&
                  r.route.dest < g.node_count() && !r.route.links.empty(),
              "demand route endpoints must be graph nodes joined by links");
      require(r.rate_per_min >= 0 && r.customer_fraction >= 0 && r.customer_fraction <= 1,
              "demand route rate or fraction out of range");
    }
  }

  SimMetrics go() {
    validate();
    long steps = std::lround(cfg.duration_s / cfg.step_s);
    long steps_per_h = std::lround(cfg.horizon_s / cfg.step_s);
    horizons = static_cast<int>(std::lround(cfg.duration_s / cfg.horizon_s));

    auto veng = make_engine(seed, "vehicles");
    std::vector<int> start(g.node_count());
    std::iota(start.begin(), start.end(), 0);
    fisher_yates(start, veng);
    vehicles.assign(cfg.fleet_size, Veh{});
    for (int i = 0; i < cfg.fleet_size; ++i) vehicles[i].node = start[i % g.node_count()];

    arrivals = generate_arrivals(scenario, cfg.duration_s, cfg.step_s, seed);
    realized.assign(horizons, std::vector<long>(g.node_count(), 0));
    for (const Arrival& a : arrivals) {
      if (!a.customer) continue;
      int h = std::min(horizons - 1, static_cast<int>(a.t_s / cfg.horizon_s));
      ++realized[h][scenario.routes[a.route_index].route.origin];
    }
    decided.assign(horizons, std::vector<int>(g.node_count(), 0));
    post_target.assign(g.node_count(), 0);
    true_rate = scenario.true_customer_rate_per_min(g);
    store = BeliefStore::priors(g, cfg);
    if (planner.kind == PlannerSpec::Kind::Counter) {
      counter_rate.reserve(g.node_count());
      for (int n = 0; n < g.node_count(); ++n) counter_rate.push_back(store.node_rate(g, n));
      counter_frac.assign(g.node_count(), cfg.fraction_prior);
    }
    cnt_rate.assign(g.node_count(), 0);
    cnt_c.assign(g.node_count(), 0);
    cnt_nc.assign(g.node_count(), 0);

    record_mse(0.0);
    for (long k = 0; k < steps; ++k) {
      double t0 = k * cfg.step_s;
      double t1 = (k + 1) * cfg.step_s;
      events.clear();
      departed_observers.clear();
      std::fill(cnt_rate.begin(), cnt_rate.end(), 0);
      std::fill(cnt_c.begin(), cnt_c.end(), 0);
      std::fill(cnt_nc.begin(), cnt_nc.end(), 0);
      if (k % steps_per_h == 0) plan(static_cast<int>(k / steps_per_h), t0);
      spawn_until(t1);
      move_walkers(t0, t1);
      move_vehicles(t0, t1);
      pickups(t1);
      expiry(t1);
      staffing(t1);
      parked_observation(t0, t1);
      if (planner.kind == PlannerSpec::Kind::Counter) counter_observation(cfg.step_s / 60.0);
      metrics_tick(t1);
    }
    for (const Ped& p : peds)
      if (p.phase == Ped::Phase::Hailing) ++metrics.customers_waiting_end;
    metrics.final_beliefs = store;
    return metrics;
  }
};

}  // namespace

SimMetrics run(const NetworkGraph& g, const DemandScenario& scenario,
               const PlannerSpec& planner, const SimConfig& cfg, std::uint64_t seed,
               std::ostream* trace) {
  Sim sim(g, scenario, planner, cfg, seed, trace);
  return sim.go();
}

namespace {

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0;
  sd = 0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= xs.size();
  if (xs.size() < 2) return;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / (xs.size() - 1));
}

}  // namespace

std::vector<BatchSummary> run_batch(const NetworkGraph& g,
                                    std::span<const PlannerSpec> planners, int runs,
                                    std::uint64_t base_seed, const SimConfig& cfg) {
  require(runs > 0, "need at least one run");
  std::vector<BatchSummary> out;
  for (const PlannerSpec& p : planners) {
    BatchSummary s;
    s.planner = p;
    std::vector<double> served, maxc;
    for (int i = 0; i < runs; ++i) {
      std::uint64_t run_seed = derive_seed(base_seed, "run", static_cast<std::uint64_t>(i));
      DemandScenario sc = make_benchmark_scenario(g, run_seed);
      SimMetrics m = run(g, sc, p, cfg, run_seed);
      if (i == 0) {
        s.t_min = m.mse_t_min;
        s.mean_mse.assign(m.mse.size(), 0.0);
      }
      for (std::size_t j = 0; j < s.mean_mse.size(); ++j) s.mean_mse[j] += m.mse[j];
      served.push_back(m.fraction_served());
      maxc.push_back(m.max_horizon_cost());
    }
    for (double& v : s.mean_mse) v /= runs;
    mean_sd(served, s.served_mean, s.served_sd);
    mean_sd(maxc, s.max_cost_mean, s.max_cost_sd);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<BatchSummary> estimation_benchmark(const NetworkGraph& g,
                                               std::span<const PlannerSpec> planners,
                                               int runs, bool with_counter,
                                               std::uint64_t base_seed, const SimConfig& cfg) {
  std::vector<PlannerSpec> list(planners.begin(), planners.end());
  bool have = std::any_of(list.begin(), list.end(), [](const PlannerSpec& p) {
    return p.kind == PlannerSpec::Kind::Counter;
  });
  if (with_counter && !have) {
    PlannerSpec c;
    c.kind = PlannerSpec::Kind::Counter;
    list.push_back(c);
  }
  return run_batch(g, list, runs, base_seed, cfg);
}

}  // namespace modhail
