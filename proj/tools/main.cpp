#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "modhail/belief.hpp"
#include "modhail/hailing.hpp"
#include "modhail/network.hpp"
#include "modhail/rng.hpp"
#include "modhail/sim.hpp"

using namespace modhail;

namespace {

// Writes to a file, or stdout when the path is "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open output file: " + path);
    }
    os().precision(12);
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<PlannerSpec> parse_planner_list(const std::string& csv) {
  std::vector<PlannerSpec> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(PlannerSpec::parse(item));
  if (out.empty()) throw std::runtime_error("no planners given");
  return out;
}

// Shared graph source flags: load a file or generate one on the fly.
struct GraphOpts {
  std::string path;
  int nodes = 33;
  int links = 106;
  std::uint64_t seed = 7;

  void attach(CLI::App* cmd) {
    cmd->add_option("--graph", path, "graph JSON file (generated when omitted)");
    cmd->add_option("--nodes", nodes, "node count for a generated graph");
    cmd->add_option("--links", links, "link count for a generated graph");
    cmd->add_option("--graph-seed", seed, "seed for a generated graph");
  }

  NetworkGraph build() const {
    return path.empty() ? generate_graph(nodes, links, seed) : load_graph_file(path);
  }

  std::string describe() const {
    if (!path.empty()) return path;
    std::ostringstream os;
    os << "generated(nodes=" << nodes << ",links=" << links << ",seed=" << seed << ")";
    return os.str();
  }
};

struct SimOpts {
  SimConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--fleet", cfg.fleet_size, "vehicles in the fleet");
    cmd->add_option("--horizon", cfg.horizon_s, "planning horizon in seconds");
    cmd->add_option("--duration", cfg.duration_s, "run length in seconds");
    cmd->add_option("--step", cfg.step_s, "time step in seconds");
    cmd->add_option("--route-len", cfg.route_len_links, "links per exploration route");
    cmd->add_option("--prior-alpha", cfg.link_prior.alpha, "link rate prior shape");
    cmd->add_option("--prior-beta", cfg.link_prior.beta, "link rate prior rate (minutes)");
    cmd->add_option("--prior-a", cfg.fraction_prior.a, "customer fraction prior successes");
    cmd->add_option("--prior-b", cfg.fraction_prior.b, "customer fraction prior failures");
    cmd->add_option("--mse-every", cfg.mse_every_s, "seconds between error samples");
  }

  std::string describe() const {
    std::ostringstream os;
    os << "fleet=" << cfg.fleet_size << " horizon_s=" << cfg.horizon_s
       << " duration_s=" << cfg.duration_s << " step_s=" << cfg.step_s
       << " route_len=" << cfg.route_len_links;
    return os.str();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"demand estimation and fleet hailing on a road network"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file");

  auto* gen = app.add_subcommand("gen-graph", "generate a random strongly connected graph");
  int gen_nodes = 33, gen_links = 106;
  std::uint64_t gen_seed = 7;
  std::string gen_out = "-";
  gen->add_option("--nodes", gen_nodes, "node count");
  gen->add_option("--links", gen_links, "link count (even, at least 2 per node)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output file, - for stdout");

  auto* pmf = app.add_subcommand("pmf", "predicted customer count distribution for one node");
  double pmf_alpha = 1, pmf_beta = 1, pmf_a = 1, pmf_b = 1, pmf_t = 5;
  double pmf_tail = 1e-9, pmf_mc_tol = 0;
  int pmf_cap = 10000;
  long pmf_mc_samples = 200000;
  std::uint64_t pmf_mc_seed = 1;
  bool pmf_mc = false;
  std::string pmf_out = "-";
  pmf->add_option("--alpha", pmf_alpha, "rate belief shape");
  pmf->add_option("--beta", pmf_beta, "rate belief rate (minutes)");
  pmf->add_option("--a", pmf_a, "fraction belief successes");
  pmf->add_option("--b", pmf_b, "fraction belief failures");
  pmf->add_option("--t", pmf_t, "prediction window in minutes");
  pmf->add_option("--tail-tol", pmf_tail, "tail mass where the pmf is truncated");
  pmf->add_option("--cap", pmf_cap, "hard cap on the support");
  pmf->add_flag("--mc-check", pmf_mc, "compare against a Monte Carlo estimate");
  pmf->add_option("--mc-samples", pmf_mc_samples, "Monte Carlo sample count");
  pmf->add_option("--mc-seed", pmf_mc_seed, "Monte Carlo seed");
  pmf->add_option("--mc-tol", pmf_mc_tol, "fail when total variation exceeds this (0 = report only)");
  pmf->add_option("--out", pmf_out, "output file, - for stdout");

  auto* cmp = app.add_subcommand("compare-planners",
                                 "expected-value vs chance-constrained cost on synthetic counts");
  double cmp_mean = 1.0, cmp_eta = 0.99;
  std::vector<double> cmp_stds{1, 2, 3, 4};
  int cmp_nodes = 33, cmp_trials = 1000;
  std::uint64_t cmp_seed = 1;
  std::string cmp_out = "-";
  cmp->add_option("--mean", cmp_mean, "mean arrival rate per minute");
  cmp->add_option("--stds", cmp_stds, "count standard deviations to sweep")->delimiter(',');
  cmp->add_option("--nodes", cmp_nodes, "nodes drawing independent counts");
  cmp->add_option("--eta", cmp_eta, "chance-constraint risk threshold");
  cmp->add_option("--trials", cmp_trials, "trials per standard deviation");
  cmp->add_option("--seed", cmp_seed, "experiment seed");
  cmp->add_option("--out", cmp_out, "output file, - for stdout");

  auto* sim = app.add_subcommand("simulate", "closed-loop fleet simulation");
  GraphOpts sim_graph;
  SimOpts sim_cfg;
  std::string sim_planners = "sensing,ev,cc:0.9,oracle";
  int sim_runs = 1;
  std::uint64_t sim_seed = 1;
  std::string sim_out = "-", sim_mse_out, sim_trace, sim_beliefs;
  sim_graph.attach(sim);
  sim_cfg.attach(sim);
  sim->add_option("--planners", sim_planners, "comma-separated planner list");
  sim->add_option("--runs", sim_runs, "independent runs per planner");
  sim->add_option("--seed", sim_seed, "base seed (runs derive from it)");
  sim->add_option("--out", sim_out, "summary CSV, - for stdout");
  sim->add_option("--mse-out", sim_mse_out, "estimation error time series CSV");
  sim->add_option("--trace", sim_trace, "event trace file (single planner, single run)");
  sim->add_option("--beliefs-out", sim_beliefs,
                  "final belief JSON (single planner, single run)");

  auto* bench = app.add_subcommand("estimation-bench",
                                   "mean estimation error over time per planner");
  GraphOpts bench_graph;
  SimOpts bench_cfg;
  std::string bench_planners = "sensing,ev,cc:0.9";
  int bench_runs = 10;
  bool bench_counter = true;
  std::uint64_t bench_seed = 1;
  std::string bench_out = "-";
  bench_graph.attach(bench);
  bench_cfg.attach(bench);
  bench->add_option("--planners", bench_planners, "comma-separated planner list");
  bench->add_option("--runs", bench_runs, "runs averaged per planner");
  bench->add_flag("--counter,!--no-counter", bench_counter,
                  "include the stationary-counter baseline");
  bench->add_option("--seed", bench_seed, "base seed");
  bench->add_option("--out", bench_out, "output file, - for stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(gen)) {
      NetworkGraph g = generate_graph(gen_nodes, gen_links, gen_seed);
      Output out(gen_out);
      out.os() << graph_to_json(g).dump(2) << "\n";
      std::cerr << "generated graph: nodes=" << gen_nodes << " links=" << gen_links
                << " seed=" << gen_seed << "\n";
    } else if (app.got_subcommand(pmf)) {
      NodeBelief belief{{pmf_alpha, pmf_beta}, {pmf_a, pmf_b}};
      PredictiveCountDist dist = predictive_pmf(belief, pmf_t, pmf_tail, pmf_cap);
      Output out(pmf_out);
      out.os() << "# pmf alpha=" << pmf_alpha << " beta=" << pmf_beta << " a=" << pmf_a
               << " b=" << pmf_b << " t_pred_min=" << pmf_t << " tail_tol=" << pmf_tail
               << "\n";
      out.os() << "# mean=" << dist.mean() << " variance=" << dist.variance()
               << " tail_mass=" << dist.tail_mass << " entries=" << dist.pmf.size() << "\n";
      if (pmf_mc) {
        std::vector<double> mc = mc_oracle_pmf(belief, pmf_t, pmf_mc_samples, pmf_mc_seed);
        double tv = total_variation(dist.pmf, mc);
        out.os() << "# mc_samples=" << pmf_mc_samples << " mc_seed=" << pmf_mc_seed
                 << " mc_tv=" << tv << "\n";
        if (pmf_mc_tol > 0 && tv > pmf_mc_tol) {
          std::cerr << "error: Monte Carlo disagreement, tv=" << tv << " > " << pmf_mc_tol
                    << "\n";
          return 2;
        }
      }
      out.os() << "count,probability\n";
      for (std::size_t c = 0; c < dist.pmf.size(); ++c)
        out.os() << c << "," << dist.pmf[c] << "\n";
    } else if (app.got_subcommand(cmp)) {
      auto rows = planner_comparison_experiment(cmp_mean, cmp_stds, cmp_nodes, cmp_eta,
                                                cmp_trials, cmp_seed);
      Output out(cmp_out);
      out.os() << "# compare-planners mean=" << cmp_mean << " nodes=" << cmp_nodes
               << " eta=" << cmp_eta << " trials=" << cmp_trials << " seed=" << cmp_seed
               << "\n";
      out.os() << "std,ev_mean_cost,ev_mean_cost_sd,ev_max_cost,ev_max_cost_sd,"
                  "cc_mean_cost,cc_mean_cost_sd,cc_max_cost,cc_max_cost_sd\n";
      for (const ComparisonRow& r : rows)
        out.os() << r.stddev << "," << r.ev_mean_cost << "," << r.ev_mean_cost_sd << ","
                 << r.ev_max_cost << "," << r.ev_max_cost_sd << "," << r.cc_mean_cost << ","
                 << r.cc_mean_cost_sd << "," << r.cc_max_cost << "," << r.cc_max_cost_sd
                 << "\n";
    } else if (app.got_subcommand(sim)) {
      NetworkGraph g = sim_graph.build();
      std::vector<PlannerSpec> planners = parse_planner_list(sim_planners);
      bool artifacts = !sim_trace.empty() || !sim_beliefs.empty();
      if (artifacts && (sim_runs != 1 || planners.size() != 1))
        throw std::runtime_error("--trace/--beliefs-out need --runs 1 and a single planner");
      auto summaries = run_batch(g, planners, sim_runs, sim_seed, sim_cfg.cfg);
      Output out(sim_out);
      out.os() << "# simulate graph=" << sim_graph.describe() << " " << sim_cfg.describe()
               << " runs=" << sim_runs << " seed=" << sim_seed << "\n";
      out.os() << "planner,runs,served_mean,served_sd,max_horizon_cost_mean,"
                  "max_horizon_cost_sd,final_mse\n";
      for (const BatchSummary& s : summaries)
        out.os() << s.planner.name() << "," << sim_runs << "," << s.served_mean << ","
                 << s.served_sd << "," << s.max_cost_mean << "," << s.max_cost_sd << ","
                 << s.mean_mse.back() << "\n";
      if (!sim_mse_out.empty()) {
        Output mse(sim_mse_out);
        mse.os() << "t_min";
        for (const BatchSummary& s : summaries) mse.os() << "," << s.planner.name();
        mse.os() << "\n";
        for (std::size_t i = 0; i < summaries.front().t_min.size(); ++i) {
          mse.os() << summaries.front().t_min[i];
          for (const BatchSummary& s : summaries) mse.os() << "," << s.mean_mse[i];
          mse.os() << "\n";
        }
      }
      if (artifacts) {
        std::uint64_t run_seed = derive_seed(sim_seed, "run", 0);
        DemandScenario sc = make_benchmark_scenario(g, run_seed);
        std::ofstream tr;
        if (!sim_trace.empty()) {
          tr.open(sim_trace);
          if (!tr) throw std::runtime_error("cannot open trace file: " + sim_trace);
        }
        SimMetrics m = run(g, sc, planners.front(), sim_cfg.cfg, run_seed,
                           tr.is_open() ? &tr : nullptr);
        if (!sim_beliefs.empty()) {
          Output bo(sim_beliefs);
          bo.os() << beliefs_to_json(m.final_beliefs).dump(2) << "\n";
        }
      }
    } else if (app.got_subcommand(bench)) {
      NetworkGraph g = bench_graph.build();
      std::vector<PlannerSpec> planners = parse_planner_list(bench_planners);
      auto summaries =
          estimation_benchmark(g, planners, bench_runs, bench_counter, bench_seed,
                               bench_cfg.cfg);
      Output out(bench_out);
      out.os() << "# estimation-bench graph=" << bench_graph.describe() << " "
               << bench_cfg.describe() << " runs=" << bench_runs << " seed=" << bench_seed
               << "\n";
      out.os() << "t_min";
      for (const BatchSummary& s : summaries) out.os() << "," << s.planner.name();
      out.os() << "\n";
      for (std::size_t i = 0; i < summaries.front().t_min.size(); ++i) {
        out.os() << summaries.front().t_min[i];
        for (const BatchSummary& s : summaries) out.os() << "," << s.mean_mse[i];
        out.os() << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
