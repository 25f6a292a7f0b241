#ifndef QLPD_EQUILIBRIUM_HPP
#define QLPD_EQUILIBRIUM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "qlpd/game.hpp"
#include "qlpd/rng.hpp"
#include "qlpd/simulator.hpp"

namespace qlpd::equilibrium {

// Designer payoffs on an (eps_A, eps_B) grid at fixed g. Only player A is
// stored; B follows from symmetry: Pi_B(x, y) = Pi_A(y, x).
struct PayoffGrid {
  double g = 0.0;
  double gamma = 0.0;
  double alpha = 0.0;
  std::vector<double> eps;                    // sorted axis, shared by both players
  std::vector<std::vector<double>> payoff_a;  // [eps_a index][eps_b index]

  double payoff_A(int i, int j) const { return payoff_a[i][j]; }
  double payoff_B(int i, int j) const { return payoff_a[j][i]; }
  double cell() const { return eps.size() > 1 ? eps[1] - eps[0] : 1.0; }
};

// Build the payoff grid from the tau rows at one g value.
inline PayoffGrid synthesize_payoffs(const TauTable& table, double g_value, double g_tol = 1e-12) {
  std::vector<const TauRow*> rows;
  for (const auto& r : table.rows)
    if (std::abs(r.params.g - g_value) <= g_tol) rows.push_back(&r);
  if (rows.empty()) throw std::invalid_argument("synthesize_payoffs: no rows at requested g");

  std::vector<double> eps;
  for (const auto* r : rows) {
    eps.push_back(r->params.eps_a);
    eps.push_back(r->params.eps_b);
  }
  std::sort(eps.begin(), eps.end());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  const int n = static_cast<int>(eps.size());
  auto index_of = [&](double v) {
    const auto it = std::lower_bound(eps.begin(), eps.end(), v);
    return static_cast<int>(it - eps.begin());
  };

  PayoffGrid grid;
  grid.g = g_value;
  grid.gamma = rows.front()->params.gamma;
  grid.alpha = rows.front()->params.alpha;
  grid.eps = eps;
  grid.payoff_a.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  const StageGame game(g_value);
  for (const auto* r : rows) {
    const int i = index_of(r->params.eps_a);
    const int j = index_of(r->params.eps_b);
    grid.payoff_a[i][j] =
        designer_payoff(r->tau, game, r->params.eps_a, r->params.eps_b, Player::A);
  }
  std::ostringstream missing;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::isnan(grid.payoff_a[i][j])) missing << " (" << eps[i] << "," << eps[j] << ")";
  if (!missing.str().empty())
    throw std::invalid_argument("synthesize_payoffs: missing grid cells:" + missing.str());
  return grid;
}

// Best response as a function of the opponent's exploration rate: per-column
// argmax (ties toward smaller eps) plus the piecewise-linear interpolation
// coefficients (a, b) with value a*x + b on each grid interval.
struct BestResponse {
  std::vector<double> opp_eps;
  std::vector<double> br;
  std::vector<std::pair<double, double>> segments;
  double cell = 1.0;
};

inline BestResponse best_response(const PayoffGrid& grid, Player player) {
  const int n = static_cast<int>(grid.eps.size());
  if (n < 2) throw std::invalid_argument("best_response: degenerate grid");
  BestResponse out;
  out.opp_eps = grid.eps;
  out.cell = grid.cell();
  out.br.resize(n);
  for (int j = 0; j < n; ++j) {
    int arg = 0;
    for (int i = 1; i < n; ++i) {
      const double v = player == Player::A ? grid.payoff_A(i, j) : grid.payoff_B(j, i);
      const double best = player == Player::A ? grid.payoff_A(arg, j) : grid.payoff_B(j, arg);
      if (v > best) arg = i;
    }
    out.br[j] = grid.eps[arg];
  }
  out.segments.reserve(n - 1);
  for (int j = 0; j + 1 < n; ++j) {
    const double a = (out.br[j + 1] - out.br[j]) / (grid.eps[j + 1] - grid.eps[j]);
    const double b = out.br[j] - a * grid.eps[j];
    out.segments.emplace_back(a, b);
  }
  return out;
}

struct NashPoint {
  double eps_a = 0.0;
  double eps_b = 0.0;
  bool symmetric = false;
};

namespace detail {

struct P2 {
  double x, y;
};

inline double cross(P2 a, P2 b) { return a.x * b.y - a.y * b.x; }

// Segment-segment intersection; collinear overlaps contribute their endpoints.
inline void intersect_segments(P2 p1, P2 p2, P2 q1, P2 q2, double tol, std::vector<P2>& out) {
  const P2 r{p2.x - p1.x, p2.y - p1.y};
  const P2 s{q2.x - q1.x, q2.y - q1.y};
  const P2 pq{q1.x - p1.x, q1.y - p1.y};
  const double denom = cross(r, s);
  const double r_len = std::hypot(r.x, r.y), s_len = std::hypot(s.x, s.y);
  if (r_len == 0.0 || s_len == 0.0) return;
  if (std::abs(denom) > tol * r_len * s_len) {
    const double t = cross(pq, s) / denom;
    const double u = cross(pq, r) / denom;
    const double slack_t = tol / r_len, slack_u = tol / s_len;
    if (t >= -slack_t && t <= 1 + slack_t && u >= -slack_u && u <= 1 + slack_u)
      out.push_back({p1.x + t * r.x, p1.y + t * r.y});
    return;
  }
  if (std::abs(cross(pq, r)) > tol * r_len) return;  // parallel, not collinear
  const double rr = r.x * r.x + r.y * r.y;
  double t0 = (pq.x * r.x + pq.y * r.y) / rr;
  double t1 = t0 + (s.x * r.x + s.y * r.y) / rr;
  if (t0 > t1) std::swap(t0, t1);
  const double lo = std::max(0.0, t0), hi = std::min(1.0, t1);
  if (lo > hi + tol / r_len) return;
  out.push_back({p1.x + lo * r.x, p1.y + lo * r.y});
  out.push_back({p1.x + hi * r.x, p1.y + hi * r.y});
}

}  // namespace detail

// Nash equilibria of the symmetric designing game: intersections of the best
// response polyline with its mirror across the 45-degree line, deduplicated at
// half a grid cell.
inline std::vector<NashPoint> nash_equilibria(const BestResponse& br, double tol = 1e-9) {
  const int n = static_cast<int>(br.opp_eps.size());
  std::vector<detail::P2> raw;
  for (int i = 0; i + 1 < n; ++i) {
    const detail::P2 p1{br.br[i], br.opp_eps[i]}, p2{br.br[i + 1], br.opp_eps[i + 1]};
    for (int j = 0; j + 1 < n; ++j) {
      const detail::P2 q1{br.opp_eps[j], br.br[j]}, q2{br.opp_eps[j + 1], br.br[j + 1]};
      detail::intersect_segments(p1, p2, q1, q2, tol, raw);
    }
  }
  // mirror closure, then greedy dedup at half a grid cell
  const std::size_t base = raw.size();
  for (std::size_t i = 0; i < base; ++i) raw.push_back({raw[i].y, raw[i].x});
  std::sort(raw.begin(), raw.end(), [](auto a, auto b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  const double radius = br.cell / 2;
  std::vector<NashPoint> out;
  for (const auto& p : raw) {
    bool dup = false;
    for (const auto& q : out)
      if (std::hypot(p.x - q.eps_a, p.y - q.eps_b) <= radius) {
        dup = true;
        break;
      }
    if (!dup) out.push_back({p.x, p.y, std::abs(p.x - p.y) <= radius});
  }
  return out;
}

// Pareto-optimal profiles: grid argmax of the joint payoff, all ties returned.
inline std::vector<std::pair<double, double>> pareto_profiles(const PayoffGrid& grid) {
  const int n = static_cast<int>(grid.eps.size());
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      best = std::max(best, grid.payoff_A(i, j) + grid.payoff_B(i, j));
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (grid.payoff_A(i, j) + grid.payoff_B(i, j) >= best - tol)
        out.emplace_back(grid.eps[i], grid.eps[j]);
  return out;
}

// Frequency with which a (symmetric) Nash equilibrium lands in each eps bin,
// per g, across M perturbed tau tables.
struct FrequencyHeatmap {
  std::vector<double> g_values;
  std::vector<double> eps_edges;           // n edges -> n-1 bins
  std::vector<std::vector<double>> freq;   // [g index][bin index]
};

namespace detail {

inline TauTable perturb_table(const TauTable& table, double eta, rng::Stream& stream) {
  TauTable out = table;
  for (auto& row : out.rows) {
    int ups[4], downs[4];
    int n_up = 0;
    for (int r = 0; r < 4; ++r)
      if (row.tau[r] <= 1.0 - eta) ups[n_up++] = r;
    if (n_up == 0) throw std::runtime_error("perturb: no region can absorb +eta");
    const int up = ups[stream.below(static_cast<std::uint64_t>(n_up))];
    int n_down = 0;
    for (int r = 0; r < 4; ++r)
      if (r != up && row.tau[r] >= eta) downs[n_down++] = r;
    if (n_down == 0) throw std::runtime_error("perturb: no region can give up eta");
    const int down = downs[stream.below(static_cast<std::uint64_t>(n_down))];
    row.tau[up] += eta;
    row.tau[down] -= eta;
  }
  return out;
}

}  // namespace detail

inline FrequencyHeatmap perturb_and_count(const TauTable& table, int M, double eta,
                                          std::uint64_t seed, int jobs = 1) {
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("perturb_and_count: eta in [0,1)");
  if (M < 1) throw std::invalid_argument("perturb_and_count: M >= 1");
  std::vector<double> gs;
  for (const auto& r : table.rows) gs.push_back(r.params.g);
  std::sort(gs.begin(), gs.end());
  gs.erase(std::unique(gs.begin(), gs.end()), gs.end());

  FrequencyHeatmap heat;
  heat.g_values = gs;
  heat.eps_edges = synthesize_payoffs(table, gs.front()).eps;
  const int bins = static_cast<int>(heat.eps_edges.size()) - 1;
  if (bins < 1) throw std::invalid_argument("perturb_and_count: need at least 2 eps values");

  std::vector<std::vector<long long>> counts(gs.size(), std::vector<long long>(bins, 0));
  std::vector<std::vector<std::vector<char>>> replica_hits(
      M, std::vector<std::vector<char>>(gs.size(), std::vector<char>(bins, 0)));

  parallel_for(static_cast<std::size_t>(M), jobs, [&](std::size_t m) {
    rng::Stream stream(rng::derive(seed, m));
    const TauTable perturbed = detail::perturb_table(table, eta, stream);
    for (std::size_t gi = 0; gi < gs.size(); ++gi) {
      const PayoffGrid grid = synthesize_payoffs(perturbed, gs[gi]);
      const BestResponse br = best_response(grid, Player::A);
      for (const NashPoint& p : nash_equilibria(br)) {
        if (!p.symmetric) continue;
        const double x = 0.5 * (p.eps_a + p.eps_b);
        int bin = static_cast<int>(std::upper_bound(heat.eps_edges.begin(), heat.eps_edges.end(), x) -
                                   heat.eps_edges.begin()) - 1;
        bin = std::clamp(bin, 0, bins - 1);
        replica_hits[m][gi][bin] = 1;
      }
    }
  });

  for (int m = 0; m < M; ++m)
    for (std::size_t gi = 0; gi < gs.size(); ++gi)
      for (int b = 0; b < bins; ++b) counts[gi][b] += replica_hits[m][gi][b];

  heat.freq.assign(gs.size(), std::vector<double>(bins, 0.0));
  for (std::size_t gi = 0; gi < gs.size(); ++gi)
    for (int b = 0; b < bins; ++b)
      heat.freq[gi][b] = static_cast<double>(counts[gi][b]) / static_cast<double>(M);
  return heat;
}

}  // namespace qlpd::equilibrium

#endif  // QLPD_EQUILIBRIUM_HPP
