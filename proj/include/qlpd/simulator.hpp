#ifndef QLPD_SIMULATOR_HPP
#define QLPD_SIMULATOR_HPP

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qlpd/agent.hpp"
#include "qlpd/game.hpp"
#include "qlpd/rng.hpp"

namespace qlpd {

// Full parameterization of one system: the stage game plus both agents.
struct ModelParams {
  double g;
  double gamma;
  double alpha;
  double eps_a;
  double eps_b;

  void validate() const {
    StageGame check(g);
    agent_params(Player::A).validate();
    agent_params(Player::B).validate();
  }

  AgentParams agent_params(Player p) const {
    return {alpha, gamma, p == Player::A ? eps_a : eps_b};
  }

  double eps(Player p) const { return p == Player::A ? eps_a : eps_b; }
};

// Joint state of the process.
struct QVector {
  QPair a;
  QPair b;

  const QPair& of(Player p) const { return p == Player::A ? a : b; }
  QPair& of(Player p) { return p == Player::A ? a : b; }

  std::array<double, 4> flat() const { return {a.c, a.d, b.c, b.d}; }
  static QVector from_flat(const std::array<double, 4>& v) { return {{v[0], v[1]}, {v[2], v[3]}}; }
};

// Player-wise argmax with exact ties assigned to D. Total and deterministic;
// tie-broken greedy play stays random in the agent layer.
inline Region classify(const QVector& q) {
  return make_region(q.a.argmax_tie_d(), q.b.argmax_tie_d());
}

struct SimConfig {
  long long horizon = 20000;  // T
  long long window = 1000;    // W, terminal measurement window
  int runs = 20;              // k
  std::uint64_t seed = 0;

  void validate() const {
    if (!(window > 0 && window <= horizon))
      throw std::invalid_argument("SimConfig: need 0 < window <= horizon");
    if (runs < 1) throw std::invalid_argument("SimConfig: need runs >= 1");
  }
};

struct RunRecord {
  QVector terminal_q{};
  std::array<long long, 4> window_regions{};  // counts per Region, sum = window
  std::vector<QVector> window_trace;          // filled only when requested
};

// One synchronous step: both agents pick actions against the current state,
// both collect stage payoffs, both update from the pre-step state. The policy
// parameters are the extension seam; everything in this module drives it with
// the epsilon-greedy policies of `params`.
template <class PolicyA, class PolicyB>
QVector advance_with_policies(const ModelParams& params, const StageGame& game, const QVector& q,
                              PolicyA&& policy_a, PolicyB&& policy_b, rng::Stream& stream_a,
                              rng::Stream& stream_b) {
  const Action act_a = policy_a(q.a, stream_a);
  const Action act_b = policy_b(q.b, stream_b);
  QVector next;
  next.a = update(q.a, act_a, game.payoff(act_a, act_b), params.agent_params(Player::A));
  next.b = update(q.b, act_b, game.payoff(act_b, act_a), params.agent_params(Player::B));
  return next;
}

inline QVector advance(const ModelParams& params, const StageGame& game, const QVector& q,
                       rng::Stream& stream_a, rng::Stream& stream_b) {
  return advance_with_policies(params, game, q, EpsilonGreedyPolicy{params.eps_a},
                               EpsilonGreedyPolicy{params.eps_b}, stream_a, stream_b);
}

namespace detail {
struct NullObserver {
  void operator()(long long, const QVector&, Region) const {}
};
}  // namespace detail

// Iterate the process for cfg.horizon steps from `init`, recording region
// counts over the last cfg.window post-update states. The observer sees every
// post-update state.
template <class PolicyA, class PolicyB, class Observer = detail::NullObserver>
RunRecord run_with_policies(const ModelParams& params, const QVector& init, const SimConfig& cfg,
                            std::uint64_t stream_key, PolicyA&& policy_a, PolicyB&& policy_b,
                            bool keep_window_trace = false, Observer&& observe = Observer{}) {
  params.validate();
  cfg.validate();
  const StageGame game(params.g);
  rng::Stream stream_a(rng::derive(stream_key, 1));
  rng::Stream stream_b(rng::derive(stream_key, 2));
  RunRecord rec;
  if (keep_window_trace) rec.window_trace.reserve(static_cast<std::size_t>(cfg.window));
  QVector q = init;
  for (long long t = 0; t < cfg.horizon; ++t) {
    q = advance_with_policies(params, game, q, policy_a, policy_b, stream_a, stream_b);
    const Region r = classify(q);
    observe(t, q, r);
    if (t >= cfg.horizon - cfg.window) {
      ++rec.window_regions[static_cast<int>(r)];
      if (keep_window_trace) rec.window_trace.push_back(q);
    }
  }
  rec.terminal_q = q;
  return rec;
}

template <class Observer = detail::NullObserver>
RunRecord run(const ModelParams& params, const QVector& init, const SimConfig& cfg,
              std::uint64_t stream_key, bool keep_window_trace = false,
              Observer&& observe = Observer{}) {
  return run_with_policies(params, init, cfg, stream_key, EpsilonGreedyPolicy{params.eps_a},
                           EpsilonGreedyPolicy{params.eps_b}, keep_window_trace,
                           std::forward<Observer>(observe));
}

inline QVector sample_initial_state(const ModelParams& params, rng::Stream& stream) {
  QVector q;
  q.a = sample_initial(params.g, params.gamma, stream);
  q.b = sample_initial(params.g, params.gamma, stream);
  return q;
}

struct TauEstimate {
  std::array<double, 4> tau{};                       // mean window fractions
  std::vector<std::array<double, 4>> run_fractions;  // per run
  std::vector<QVector> terminal_qs;                  // per run
};

// Mean window occupancy over cfg.runs independent runs with fresh uniform
// initial conditions. Per-run streams derive from (stream_key, run index).
inline TauEstimate estimate_tau(const ModelParams& params, const SimConfig& cfg,
                                std::uint64_t stream_key) {
  TauEstimate est;
  est.run_fractions.reserve(cfg.runs);
  est.terminal_qs.reserve(cfg.runs);
  for (int k = 0; k < cfg.runs; ++k) {
    const std::uint64_t run_key = rng::derive(stream_key, static_cast<std::uint64_t>(k));
    rng::Stream init_stream(rng::derive(run_key, 0));
    const QVector init = sample_initial_state(params, init_stream);
    const RunRecord rec = run(params, init, cfg, run_key);
    std::array<double, 4> frac{};
    for (int r = 0; r < 4; ++r)
      frac[r] = static_cast<double>(rec.window_regions[r]) / static_cast<double>(cfg.window);
    for (int r = 0; r < 4; ++r) est.tau[r] += frac[r] / cfg.runs;
    est.run_fractions.push_back(frac);
    est.terminal_qs.push_back(rec.terminal_q);
  }
  return est;
}

struct TransitionMatrix {
  std::array<std::array<double, 4>, 4> prob{};  // row-stochastic where defined
  std::array<bool, 4> defined{};                // false when the source region was never visited
  std::array<std::array<long long, 4>, 4> counts{};

  // P(CC -> CD | CC -> CD or DC); empty when the condition never occurred.
  std::optional<double> p_cc_to_cd_given_asym() const {
    const long long cd = counts[0][1], dc = counts[0][2];
    if (cd + dc == 0) return std::nullopt;
    return static_cast<double>(cd) / static_cast<double>(cd + dc);
  }
};

// Empirical one-step region transition frequencies over consecutive window
// states, pooled across runs.
inline TransitionMatrix transition_stats(const ModelParams& params, const SimConfig& cfg,
                                         std::uint64_t stream_key) {
  TransitionMatrix tm;
  for (int k = 0; k < cfg.runs; ++k) {
    const std::uint64_t run_key = rng::derive(stream_key, static_cast<std::uint64_t>(k));
    rng::Stream init_stream(rng::derive(run_key, 0));
    const QVector init = sample_initial_state(params, init_stream);
    int prev = -1;
    run(params, init, cfg, run_key, false,
        [&](long long t, const QVector&, Region r) {
          if (t >= cfg.horizon - cfg.window) {
            if (prev >= 0) ++tm.counts[prev][static_cast<int>(r)];
            prev = static_cast<int>(r);
          }
        });
  }
  for (int i = 0; i < 4; ++i) {
    long long total = 0;
    for (int j = 0; j < 4; ++j) total += tm.counts[i][j];
    tm.defined[i] = total > 0;
    if (tm.defined[i])
      for (int j = 0; j < 4; ++j)
        tm.prob[i][j] = static_cast<double>(tm.counts[i][j]) / static_cast<double>(total);
  }
  return tm;
}

// Run fn(0..n-1) on `jobs` threads. Work items must be independent; results
// keyed by index so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), n));
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct TauRow {
  ModelParams params{};
  std::array<double, 4> tau{};
};

// Stream key of one grid triplet, derived from the parameter values themselves
// so that reordering the grid leaves every triplet's estimate unchanged.
inline std::uint64_t triplet_stream_key(std::uint64_t seed, const ModelParams& p) {
  auto bits = [](double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    __builtin_memcpy(&u, &v, sizeof(u));
    return u;
  };
  return rng::derive(seed, {bits(p.g), bits(p.gamma), bits(p.alpha), bits(p.eps_a), bits(p.eps_b)});
}

struct TauTable {
  std::vector<TauRow> rows;
  SimConfig config;                                    // shared run configuration
  std::vector<std::vector<QVector>> terminal_qs;       // per row, when kept
  std::vector<std::vector<std::array<double, 4>>> run_fractions;  // per row, when kept
};

// Estimate tau for every grid triplet. Each triplet's stream key comes from
// its own parameter values, so results depend on neither evaluation order nor
// worker count.
inline TauTable sweep(const std::vector<ModelParams>& grid, const SimConfig& cfg, int jobs = 1,
                      bool keep_terminals = false) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  cfg.validate();
  TauTable table;
  table.config = cfg;
  table.rows.resize(grid.size());
  table.terminal_qs.resize(keep_terminals ? grid.size() : 0);
  table.run_fractions.resize(keep_terminals ? grid.size() : 0);
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    TauEstimate est = estimate_tau(grid[i], cfg, triplet_stream_key(cfg.seed, grid[i]));
    table.rows[i] = {grid[i], est.tau};
    if (keep_terminals) {
      table.terminal_qs[i] = std::move(est.terminal_qs);
      table.run_fractions[i] = std::move(est.run_fractions);
    }
  });
  return table;
}

}  // namespace qlpd

#endif  // QLPD_SIMULATOR_HPP
