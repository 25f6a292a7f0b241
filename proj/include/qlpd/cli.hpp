#ifndef QLPD_CLI_HPP
#define QLPD_CLI_HPP

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlpd/clustering.hpp"
#include "qlpd/equilibrium.hpp"
#include "qlpd/io.hpp"
#include "qlpd/ode.hpp"
#include "qlpd/simulator.hpp"
#include "qlpd/svg.hpp"

namespace qlpd::cli {

namespace detail {

// Collects outputs so a failing command leaves nothing half-written.
class OutputSet {
 public:
  void write(const std::string& path, const std::string& content) {
    io::write_file(path, content);
    paths_.push_back(path);
  }
  void rollback() {
    for (const auto& p : paths_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    paths_.clear();
  }
  const std::vector<std::string>& paths() const { return paths_; }

 private:
  std::vector<std::string> paths_;
};

inline std::map<std::string, std::string> config_snapshot(const CLI::App* cmd) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
    if (opt->get_expected_min() == 0 && opt->get_expected_max() == 0) {
      out[opt->get_single_name()] = opt->count() ? "true" : "false";
      continue;
    }
    if (opt->count()) {
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      out[opt->get_single_name()] = joined;
    } else {
      out[opt->get_single_name()] = opt->get_default_str();
    }
  }
  return out;
}

inline void finish(OutputSet& outs, const std::string& command,
                   std::map<std::string, std::string> config, std::uint64_t seed,
                   const std::string& manifest_path) {
  const auto payload_paths = outs.paths();
  outs.write(manifest_path, io::manifest_json(command, config, seed, payload_paths));
}

inline std::vector<double> linear_grid(double lo, double hi, int count) {
  std::vector<double> out;
  out.reserve(count);
  if (count == 1) {
    out.push_back(lo);
    return out;
  }
  for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
  return out;
}

// Minimal CSV-with-header reader for `plot`.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("plot: no column named '" + name + "'");
  }
};

inline Table read_table(const std::string& path) {
  const std::string content = io::read_file(path);
  std::istringstream in(content);
  std::string line;
  Table t;
  if (!std::getline(in, line)) throw std::runtime_error("plot: empty input " + path);
  t.header = io::split_csv_line(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(io::split_csv_line(line));
  return t;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Two epsilon-greedy Q-learners in a one-parameter prisoner's dilemma:\n"
               "simulation, continuous-time analysis, coupling detection, and the\n"
               "designing game over exploration rates."};
  app.require_subcommand(1);
  // flat key=value config file; keys are dotted option paths, e.g. sweep.runs=50
  app.set_config("--config", "", "flat key=value config file (keys like simulate.T)");

  // ---- simulate -------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "run one trajectory (discrete or continuous-time)");
  struct {
    double g = 1.7, gamma = 0.95, alpha = 0.1, eps_a = 0.1, eps_b = 0.1;
    long long horizon = 20000;
    std::uint64_t seed = 1;
    std::vector<double> init;
    bool ode = false;
    double t_end = 5000.0, step = 0.0;
    int record_every = 100;
    std::string out = "trajectory.csv";
  } sim_opt;
  sim->add_option("--g", sim_opt.g, "cooperation value, in [1,2]")->capture_default_str();
  sim->add_option("--gamma", sim_opt.gamma, "discount factor")->capture_default_str();
  sim->add_option("--alpha", sim_opt.alpha, "learning rate")->capture_default_str();
  sim->add_option("--eps-a", sim_opt.eps_a, "exploration rate of player A")->capture_default_str();
  sim->add_option("--eps-b", sim_opt.eps_b, "exploration rate of player B")->capture_default_str();
  sim->add_option("--T", sim_opt.horizon, "discrete horizon (rows written)")->capture_default_str();
  sim->add_option("--seed", sim_opt.seed, "base seed")->envname("QLPD_SEED")->capture_default_str();
  sim->add_option("--init", sim_opt.init, "initial state qac,qad,qbc,qbd (default: sampled)")
      ->delimiter(',')
      ->expected(4);
  sim->add_flag("--ode", sim_opt.ode, "integrate the continuous-time approximation instead");
  sim->add_option("--t-end", sim_opt.t_end, "[ode] time horizon")->capture_default_str();
  sim->add_option("--step", sim_opt.step, "[ode] RK4 step (default alpha/10)")->capture_default_str();
  sim->add_option("--record-every", sim_opt.record_every, "[ode] sample stride in steps")
      ->capture_default_str();
  sim->add_option("--out", sim_opt.out, "trajectory CSV path")->capture_default_str();
  sim->callback([&] {
    const ModelParams params{sim_opt.g, sim_opt.gamma, sim_opt.alpha, sim_opt.eps_a, sim_opt.eps_b};
    params.validate();
    QVector init;
    if (sim_opt.init.size() == 4) {
      init = QVector::from_flat({sim_opt.init[0], sim_opt.init[1], sim_opt.init[2], sim_opt.init[3]});
    } else {
      rng::Stream s(rng::derive(sim_opt.seed, 0));
      init = sample_initial_state(params, s);
    }
    detail::OutputSet outs;
    auto config = detail::config_snapshot(sim);
    try {
      std::ostringstream csv;
      csv << io::trajectory_header();
      if (sim_opt.ode) {
        ode::IntegrateOptions opt;
        opt.record_every = sim_opt.record_every;
        const double step = sim_opt.step > 0.0 ? sim_opt.step : sim_opt.alpha / 10.0;
        const ode::Trajectory traj = ode::integrate(init, params, sim_opt.t_end, step, opt);
        for (const auto& s : traj.samples) io::append_trajectory_row(csv, s.t, s.q, s.region);
        config["termination"] = ode::termination_name(traj.termination);
      } else {
        SimConfig cfg{sim_opt.horizon, sim_opt.horizon, 1, sim_opt.seed};
        run(params, init, cfg, rng::derive(sim_opt.seed, 1), false,
            [&](long long t, const QVector& q, Region r) {
              io::append_trajectory_row(csv, static_cast<double>(t + 1), q, r);
            });
      }
      outs.write(sim_opt.out, csv.str());
      detail::finish(outs, "simulate", config, sim_opt.seed, sim_opt.out + ".manifest.json");
    } catch (...) {
      outs.rollback();
      throw;
    }
  });

  // ---- sweep ---------------------------------------------------------------
  auto* swp = app.add_subcommand("sweep", "estimate tau over a (g, eps_a, eps_b) grid");
  struct {
    std::string profile = "desk";
    std::vector<double> g_values;
    int g_count = 0, eps_count = 0;
    double g_min = 1.0, g_max = 2.0, eps_min = 0.0, eps_max = 1.0;
    double gamma = 0.95, alpha = 0.1;
    long long horizon = 0, window = 1000;
    int runs = 0, jobs = 1;
    bool symmetric = false;
    std::uint64_t seed = 1;
    std::string out = "tau.csv", terminals;
  } sw;
  swp->add_option("--profile", sw.profile, "desk (16^3, T=2e4, k=20) or paper (64^3, T=1e5, k=100)")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  swp->add_option("--g-values", sw.g_values, "explicit g list (overrides --g-count)")->delimiter(',');
  swp->add_option("--g-count", sw.g_count, "size of the g grid (default from profile)");
  swp->add_option("--g-min", sw.g_min, "")->capture_default_str();
  swp->add_option("--g-max", sw.g_max, "")->capture_default_str();
  swp->add_option("--eps-count", sw.eps_count, "size of each eps grid (default from profile)");
  swp->add_option("--eps-min", sw.eps_min, "")->capture_default_str();
  swp->add_option("--eps-max", sw.eps_max, "")->capture_default_str();
  swp->add_option("--gamma", sw.gamma, "")->capture_default_str();
  swp->add_option("--alpha", sw.alpha, "")->capture_default_str();
  swp->add_option("--T", sw.horizon, "horizon (default from profile)");
  swp->add_option("--window", sw.window, "measurement window")->capture_default_str();
  swp->add_option("--runs", sw.runs, "runs per triplet (default from profile)");
  swp->add_flag("--symmetric", sw.symmetric, "sweep the diagonal eps_a = eps_b only");
  swp->add_option("--jobs", sw.jobs, "worker threads")->capture_default_str();
  swp->add_option("--seed", sw.seed, "base seed")->envname("QLPD_SEED")->capture_default_str();
  swp->add_option("--out", sw.out, "tau table CSV path")->capture_default_str();
  swp->add_option("--terminals", sw.terminals, "also dump per-run terminal Q-vectors to this CSV");
  swp->callback([&] {
    const bool paper = sw.profile == "paper";
    const int g_count = sw.g_count > 0 ? sw.g_count : (paper ? 64 : 16);
    const int eps_count = sw.eps_count > 0 ? sw.eps_count : (paper ? 64 : 16);
    SimConfig cfg;
    cfg.horizon = sw.horizon > 0 ? sw.horizon : (paper ? 100000 : 20000);
    cfg.window = sw.window;
    cfg.runs = sw.runs > 0 ? sw.runs : (paper ? 100 : 20);
    cfg.seed = sw.seed;
    const std::vector<double> gs =
        sw.g_values.empty() ? detail::linear_grid(sw.g_min, sw.g_max, g_count) : sw.g_values;
    const std::vector<double> eps = detail::linear_grid(sw.eps_min, sw.eps_max, eps_count);
    std::vector<ModelParams> grid;
    for (double g : gs)
      for (double ea : eps) {
        if (sw.symmetric) {
          grid.push_back({g, sw.gamma, sw.alpha, ea, ea});
        } else {
          for (double eb : eps) grid.push_back({g, sw.gamma, sw.alpha, ea, eb});
        }
      }
    const TauTable table = sweep(grid, cfg, sw.jobs, !sw.terminals.empty());
    detail::OutputSet outs;
    try {
      outs.write(sw.out, io::tau_table_csv(table));
      if (!sw.terminals.empty()) outs.write(sw.terminals, io::terminals_csv(table));
      detail::finish(outs, "sweep", detail::config_snapshot(swp), sw.seed,
                     sw.out + ".manifest.json");
    } catch (...) {
      outs.rollback();
      throw;
    }
  });

  // ---- detect ----------------------------------------------------------------
  auto* det = app.add_subcommand("detect", "three-stage coupling detection and basin measurement");
  struct {
    std::string tau, terminals, out = "basins.csv";
    double gamma = 0.95, alpha = 0.1;
    int restarts = 10;
    std::uint64_t seed = 1;
  } dt;
  det->add_option("--tau", dt.tau, "tau table CSV from `sweep`")->required();
  det->add_option("--terminals", dt.terminals, "terminal Q dump CSV from `sweep`")->required();
  det->add_option("--gamma", dt.gamma, "discount used in the sweep")->capture_default_str();
  det->add_option("--alpha", dt.alpha, "learning rate used in the sweep")->capture_default_str();
  det->add_option("--restarts", dt.restarts, "k-means restarts")->capture_default_str();
  det->add_option("--seed", dt.seed, "k-means seed")->envname("QLPD_SEED")->capture_default_str();
  det->add_option("--out", dt.out, "basin CSV path")->capture_default_str();
  det->callback([&] {
    const TauTable table = io::parse_tau_table_csv(io::read_file(dt.tau), dt.gamma, dt.alpha);
    const auto terminals = io::parse_terminals_csv(io::read_file(dt.terminals));
    std::vector<clustering::TripletObservations> trips;
    std::vector<ModelParams> params;
    trips.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      clustering::TripletObservations t;
      t.params = row.params;
      t.tau_cc = row.tau[0];
      const auto it = terminals.find(io::triplet_key(row.params));
      if (it != terminals.end()) t.terminal_qs = it->second;
      trips.push_back(std::move(t));
      params.push_back(row.params);
    }
    const auto basins = clustering::estimate_basins(trips, dt.restarts, dt.seed);
    detail::OutputSet outs;
    try {
      outs.write(dt.out, io::basins_csv(params, basins));
      detail::finish(outs, "detect", detail::config_snapshot(det), dt.seed,
                     dt.out + ".manifest.json");
    } catch (...) {
      outs.rollback();
      throw;
    }
  });

  // ---- transitions -------------------------------------------------------------
  auto* trn = app.add_subcommand("transitions", "empirical region-transition matrix for one triplet");
  struct {
    double g = 1.7, gamma = 0.95, alpha = 0.1, eps_a = 0.1, eps_b = 0.1;
    long long horizon = 100000, window = 1000;
    int runs = 100;
    std::uint64_t seed = 1;
    std::string out = "transitions.json";
  } tr;
  trn->add_option("--g", tr.g, "")->capture_default_str();
  trn->add_option("--gamma", tr.gamma, "")->capture_default_str();
  trn->add_option("--alpha", tr.alpha, "")->capture_default_str();
  trn->add_option("--eps-a", tr.eps_a, "")->capture_default_str();
  trn->add_option("--eps-b", tr.eps_b, "")->capture_default_str();
  trn->add_option("--T", tr.horizon, "")->capture_default_str();
  trn->add_option("--window", tr.window, "")->capture_default_str();
  trn->add_option("--runs", tr.runs, "")->capture_default_str();
  trn->add_option("--seed", tr.seed, "")->envname("QLPD_SEED")->capture_default_str();
  trn->add_option("--out", tr.out, "transition JSON path")->capture_default_str();
  trn->callback([&] {
    const ModelParams params{tr.g, tr.gamma, tr.alpha, tr.eps_a, tr.eps_b};
    const SimConfig cfg{tr.horizon, tr.window, tr.runs, tr.seed};
    const TransitionMatrix tm = transition_stats(params, cfg, rng::derive(tr.seed, 0));
    detail::OutputSet outs;
    try {
      outs.write(tr.out, io::transitions_json(params, tm));
      detail::finish(outs, "transitions", detail::config_snapshot(trn), tr.seed,
                     tr.out + ".manifest.json");
    } catch (...) {
      outs.rollback();
      throw;
    }
  });

  // ---- equilibria ---------------------------------------------------------------
  auto* eq = app.add_subcommand("equilibria", "best responses, Nash/Pareto sets, de-noised frequencies");
  struct {
    std::string tau, out = "equilibria.json", freq = "frequency.csv", svg = "frequency.svg";
    double gamma = 0.95, alpha = 0.1, eta = 0.005;
    int perturb = 1000, jobs = 1;
    std::uint64_t seed = 1;
  } eqo;
  eq->add_option("--tau", eqo.tau, "tau table CSV from `sweep`")->required();
  eq->add_option("--gamma", eqo.gamma, "")->capture_default_str();
  eq->add_option("--alpha", eqo.alpha, "")->capture_default_str();
  eq->add_option("--perturb", eqo.perturb, "number of perturbed tables M")->capture_default_str();
  eq->add_option("--eta", eqo.eta, "perturbation size")->capture_default_str();
  eq->add_option("--jobs", eqo.jobs, "worker threads")->capture_default_str();
  eq->add_option("--seed", eqo.seed, "")->envname("QLPD_SEED")->capture_default_str();
  eq->add_option("--out", eqo.out, "equilibria JSON path")->capture_default_str();
  eq->add_option("--freq", eqo.freq, "equilibrium-frequency CSV path")->capture_default_str();
  eq->add_option("--svg", eqo.svg, "frequency heatmap SVG path")->capture_default_str();
  eq->callback([&] {
    const TauTable table = io::parse_tau_table_csv(io::read_file(eqo.tau), eqo.gamma, eqo.alpha);
    std::vector<double> gs;
    for (const auto& r : table.rows) gs.push_back(r.params.g);
    std::sort(gs.begin(), gs.end());
    gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
    std::vector<io::LabeledEquilibria> all;
    for (double g : gs) {
      const auto grid = equilibrium::synthesize_payoffs(table, g);
      const auto br = equilibrium::best_response(grid, Player::A);
      all.push_back({g, equilibrium::nash_equilibria(br), equilibrium::pareto_profiles(grid)});
    }
    const auto heat = equilibrium::perturb_and_count(table, eqo.perturb, eqo.eta, eqo.seed, eqo.jobs);
    detail::OutputSet outs;
    try {
      outs.write(eqo.out, io::equilibria_json(all));
      outs.write(eqo.freq, io::frequency_csv(heat));
      outs.write(eqo.svg,
                 svg::heatmap(heat.freq, "eps bin", "g", "Nash-equilibrium frequency",
                              heat.eps_edges.front(), heat.eps_edges.back(), heat.g_values.front(),
                              heat.g_values.back()));
      detail::finish(outs, "equilibria", detail::config_snapshot(eq), eqo.seed,
                     eqo.out + ".manifest.json");
    } catch (...) {
      outs.rollback();
      throw;
    }
  });

  // ---- plot --------------------------------------------------------------------
  auto* plt = app.add_subcommand("plot", "render a dataset CSV as a static SVG");
  struct {
    std::string in, kind = "heatmap", out = "plot.svg";
    std::string x = "eps_a", y = "eps_b", value = "tau_cc";
    double filter_g = std::numeric_limits<double>::quiet_NaN();
  } pl;
  plt->add_option("--in", pl.in, "input CSV")->required();
  plt->add_option("--kind", pl.kind, "heatmap | curve")
      ->check(CLI::IsMember({"heatmap", "curve"}))
      ->capture_default_str();
  plt->add_option("--x", pl.x, "x column")->capture_default_str();
  plt->add_option("--y", pl.y, "[heatmap] y column")->capture_default_str();
  plt->add_option("--value", pl.value, "value column")->capture_default_str();
  plt->add_option("--filter-g", pl.filter_g, "[heatmap] keep rows with this g");
  plt->add_option("--out", pl.out, "output SVG")->capture_default_str();
  plt->callback([&] {
    const auto table = detail::read_table(pl.in);
    detail::OutputSet outs;
    try {
      std::string svg_text;
      if (pl.kind == "heatmap") {
        const int cx = table.col(pl.x), cy = table.col(pl.y), cv = table.col(pl.value);
        const int cg = !std::isnan(pl.filter_g) ? table.col("g") : -1;
        std::vector<double> xs, ys;
        std::vector<std::array<double, 3>> cells;
        for (const auto& row : table.rows) {
          if (cg >= 0 && io::parse_double(row[cg]) != pl.filter_g) continue;
          const double x = io::parse_double(row[cx]);
          const double y = io::parse_double(row[cy]);
          xs.push_back(x);
          ys.push_back(y);
          cells.push_back({x, y, io::parse_double(row[cv])});
        }
        if (cells.empty()) throw std::runtime_error("plot: no rows after filtering");
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        std::sort(ys.begin(), ys.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
        auto idx = [](const std::vector<double>& axis, double v) {
          return static_cast<int>(std::lower_bound(axis.begin(), axis.end(), v) - axis.begin());
        };
        std::vector<std::vector<double>> grid(ys.size(), std::vector<double>(xs.size(), 0.0));
        for (const auto& c : cells) grid[idx(ys, c[1])][idx(xs, c[0])] = c[2];
        svg_text = svg::heatmap(grid, pl.x, pl.y, pl.value, xs.front(), xs.back(), ys.front(),
                                ys.back());
      } else {
        const int cx = table.col(pl.x), cv = table.col(pl.value);
        std::vector<double> xs, vs;
        for (const auto& row : table.rows) {
          xs.push_back(io::parse_double(row[cx]));
          vs.push_back(io::parse_double(row[cv]));
        }
        svg_text = svg::curve(xs, {vs}, {pl.value}, pl.value + " vs " + pl.x);
      }
      outs.write(pl.out, svg_text);
      detail::finish(outs, "plot", detail::config_snapshot(plt), 0, pl.out + ".manifest.json");
    } catch (...) {
      outs.rollback();
      throw;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("qlpd");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace qlpd::cli

#endif  // QLPD_CLI_HPP
