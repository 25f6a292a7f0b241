#ifndef QLPD_ODE_HPP
#define QLPD_ODE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qlpd/simulator.hpp"

namespace qlpd::ode {

// ---------------------------------------------------------------------------
// Flow of the continuous-time approximation
// ---------------------------------------------------------------------------

// Average payoff to a player for playing `mine` while the opponent holds
// `opp_greedy` and explores at rate eps_opp.
inline double pi_hat(const StageGame& game, Action mine, Action opp_greedy, double eps_opp) {
  return (1.0 - eps_opp / 2.0) * game.payoff(mine, opp_greedy) +
         (eps_opp / 2.0) * game.payoff(mine, opposite(opp_greedy));
}

// Region flow, evaluated as the affine formula of `region` regardless of where
// q actually lies. This is the one-sided limit used by the Filippov pieces.
// Time unit: one expected discrete update, so this equals the expected one-step
// increment of the stochastic process.
inline std::array<double, 4> flow_in_region(const QVector& q, const ModelParams& params,
                                            Region region) {
  const StageGame game(params.g);
  std::array<double, 4> out{};
  for (Player p : {Player::A, Player::B}) {
    const Player o = (p == Player::A) ? Player::B : Player::A;
    const Action mine = region_action(region, p);
    const Action theirs = region_action(region, o);
    const double eps_p = params.eps(p);
    const double eps_o = params.eps(o);
    const QPair& qp = q.of(p);
    const double d_greedy = params.alpha * (1.0 - eps_p / 2.0) *
                            (pi_hat(game, mine, theirs, eps_o) - (1.0 - params.gamma) * qp.value(mine));
    const double d_other =
        params.alpha * (eps_p / 2.0) *
        (pi_hat(game, opposite(mine), theirs, eps_o) + params.gamma * qp.value(mine) -
         qp.value(opposite(mine)));
    const int base = (p == Player::A) ? 0 : 2;
    out[base + static_cast<int>(mine)] = d_greedy;
    out[base + static_cast<int>(opposite(mine))] = d_other;
  }
  return out;
}

// Public flow: defined on region interiors only.
inline std::array<double, 4> flow(const QVector& q, const ModelParams& params, Region region) {
  if (q.a.c == q.a.d || q.b.c == q.b.d)
    throw std::invalid_argument("flow: state lies on a region boundary");
  if (classify(q) != region)
    throw std::invalid_argument("flow: state is not in the requested region");
  return flow_in_region(q, params, region);
}

// The unique steady state of the continuous-time approximation, obtained by
// zeroing the omega_DD flow. Strictly inside omega_DD for every g < 2; at g = 2
// the C and D components coincide.
inline QVector dd_steady_state(const ModelParams& params) {
  const StageGame game(params.g);
  QVector q;
  for (Player p : {Player::A, Player::B}) {
    const double eps_o = params.eps(p == Player::A ? Player::B : Player::A);
    const double qd = pi_hat(game, Action::D, Action::D, eps_o) / (1.0 - params.gamma);
    const double qc = pi_hat(game, Action::C, Action::D, eps_o) + params.gamma * qd;
    q.of(p) = {qc, qd};
  }
  return q;
}

struct SteadyStateCandidate {
  QVector candidate{};
  bool violated = false;  // candidate fails the region's defining inequalities
};

// Solve the flow-zero linear system of `region` and report whether the
// solution escapes the region (it always does outside omega_DD).
inline SteadyStateCandidate no_steady_state_residual(const ModelParams& params, Region region) {
  if (region == Region::DD) {
    SteadyStateCandidate out{dd_steady_state(params), false};
    out.violated = classify(out.candidate) != Region::DD;
    return out;
  }
  if (params.eps_a == 0.0 || params.eps_b == 0.0)
    throw std::invalid_argument(
        "no_steady_state_residual: non-greedy component is unconstrained at eps=0 (singular system)");
  const StageGame game(params.g);
  QVector q;
  for (Player p : {Player::A, Player::B}) {
    const Player o = (p == Player::A) ? Player::B : Player::A;
    const Action mine = region_action(region, p);
    const Action theirs = region_action(region, o);
    const double eps_o = params.eps(o);
    const double q_greedy = pi_hat(game, mine, theirs, eps_o) / (1.0 - params.gamma);
    const double q_other = pi_hat(game, opposite(mine), theirs, eps_o) + params.gamma * q_greedy;
    q.of(p).value(mine) = q_greedy;
    q.of(p).value(opposite(mine)) = q_other;
  }
  return {q, classify(q) != region};
}

// Symmetric-exploration threshold of Banchio & Mantegazza: above it, the
// symmetric continuous-time system converges to the omega_DD steady state from
// every initial condition.
inline double symmetric_threshold(double g) {
  StageGame check(g);
  return 1.0 - std::sqrt((2.0 - g) / g);
}

// ---------------------------------------------------------------------------
// Generic piecewise-smooth integrator (fixed-step RK4, bisection events,
// Filippov sliding on codimension-1 surfaces)
// ---------------------------------------------------------------------------

enum class Termination { Horizon, Converged, SlidingEntered, Codim2 };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Horizon: return "horizon";
    case Termination::Converged: return "converged";
    case Termination::SlidingEntered: return "sliding-entered";
    case Termination::Codim2: return "codim2-abort";
  }
  return "?";
}

template <int N>
struct Surface {
  std::array<double, N> normal{};
  double offset = 0.0;

  double eval(const std::array<double, N>& x) const {
    double s = offset;
    for (int i = 0; i < N; ++i) s += normal[i] * x[i];
    return s;
  }
  double norm2() const {
    double s = 0.0;
    for (double v : normal) s += v * v;
    return s;
  }
};

// Piecewise-smooth vector field: flows selected by the sign pattern of the
// surfaces (bit i set <=> s_i(x) > 0).
template <int N>
struct PiecewiseSystem {
  std::vector<Surface<N>> surfaces;
  std::function<std::array<double, N>(const std::array<double, N>&, unsigned)> flow;
};

struct IntegrateOptions {
  double step = 0.01;
  double conv_tol = 1e-10;       // field inf-norm treated as converged
  double boundary_tol = 1e-9;    // bisection target for |s|
  double simultaneous_tol = 1e-7;  // two surfaces within this of zero = codim-2
  int record_every = 100;        // sample stride, in steps
  bool stop_on_sliding = false;
};

template <int N>
struct PiecewiseSample {
  double t = 0.0;
  std::array<double, N> x{};
  unsigned signs = 0;
  int sliding_on = -1;  // surface index, -1 when in a region interior
};

template <int N>
struct PiecewiseResult {
  std::vector<PiecewiseSample<N>> samples;
  Termination termination = Termination::Horizon;
  std::array<double, N> final_x{};
  double final_t = 0.0;
  unsigned final_signs = 0;
  int final_sliding_on = -1;
};

namespace detail {

template <class Vec>
Vec axpy(const Vec& x, double a, const Vec& y) {
  Vec out;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * y[i];
  return out;
}

template <class Vec, class Fn>
Vec rk4(const Vec& x, double h, Fn&& f) {
  const Vec k1 = f(x);
  const Vec k2 = f(axpy(x, h / 2, k1));
  const Vec k3 = f(axpy(x, h / 2, k2));
  const Vec k4 = f(axpy(x, h, k3));
  Vec out;
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return out;
}

template <class Vec>
double inf_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

template <class Vec>
bool finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

template <int N>
void project_onto(std::array<double, N>& x, const Surface<N>& s) {
  const double shift = s.eval(x) / s.norm2();
  for (int i = 0; i < N; ++i) x[i] -= shift * s.normal[i];
}

}  // namespace detail

// Sliding data at a point on surface `j`: convex weight tau on the s>0 side
// flow annihilating the normal component, and the resulting sliding vector.
template <int N>
struct SlidingData {
  double tau = 0.0;
  std::array<double, N> vector{};
  bool feasible = false;  // tau in [0,1], i.e. the normal components oppose
};

template <int N>
SlidingData<N> sliding_at(const PiecewiseSystem<N>& sys, const std::array<double, N>& x, int j,
                          unsigned signs) {
  const auto& surf = sys.surfaces[static_cast<std::size_t>(j)];
  const auto f_pos = sys.flow(x, signs | (1u << j));
  const auto f_neg = sys.flow(x, signs & ~(1u << j));
  double d_pos = 0.0, d_neg = 0.0;
  for (int i = 0; i < N; ++i) {
    d_pos += f_pos[i] * surf.normal[i];
    d_neg += f_neg[i] * surf.normal[i];
  }
  SlidingData<N> out;
  const double den = d_neg - d_pos;
  if (den == 0.0) return out;  // degenerate: flows share the normal component
  out.tau = d_neg / den;
  out.feasible = out.tau >= 0.0 && out.tau <= 1.0;
  for (int i = 0; i < N; ++i) out.vector[i] = out.tau * f_pos[i] + (1.0 - out.tau) * f_neg[i];
  return out;
}

// Locate a pseudo steady-state on surface `j`: the zero of the sliding field's
// tangential component along the segment [a, b] (both on the surface). Works
// for attracting and repelling sliding segments alike; bisection on the
// projection of the sliding vector onto b - a.
template <int N>
std::optional<std::array<double, N>> find_pseudo_steady(const PiecewiseSystem<N>& sys, int j,
                                                        unsigned signs,
                                                        const std::array<double, N>& a,
                                                        const std::array<double, N>& b,
                                                        double tol = 1e-12) {
  using Vec = std::array<double, N>;
  Vec dir;
  for (int i = 0; i < N; ++i) dir[i] = b[i] - a[i];
  auto tangential = [&](double s) {
    Vec x;
    for (int i = 0; i < N; ++i) x[i] = a[i] + s * dir[i];
    const auto slide = sliding_at<N>(sys, x, j, signs);
    double proj = 0.0;
    for (int i = 0; i < N; ++i) proj += slide.vector[i] * dir[i];
    return proj;
  };
  double lo = 0.0, hi = 1.0;
  double f_lo = tangential(lo), f_hi = tangential(hi);
  if (f_lo == 0.0) return a;
  if (f_hi == 0.0) return b;
  if ((f_lo > 0) == (f_hi > 0)) return std::nullopt;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = tangential(mid);
    if (f_mid == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((f_mid > 0) == (f_lo > 0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  const double s = 0.5 * (lo + hi);
  Vec x;
  for (int i = 0; i < N; ++i) x[i] = a[i] + s * dir[i];
  return x;
}

template <int N>
PiecewiseResult<N> integrate_piecewise(const PiecewiseSystem<N>& sys,
                                       const std::array<double, N>& x0, double t_end,
                                       const IntegrateOptions& opt) {
  using Vec = std::array<double, N>;
  if (!(opt.step > 0.0)) throw std::invalid_argument("integrate: step must be positive");
  if (!detail::finite(x0)) throw std::invalid_argument("integrate: non-finite initial state");
  const int n_surf = static_cast<int>(sys.surfaces.size());

  PiecewiseResult<N> result;
  Vec x = x0;
  double t = 0.0;
  int sliding_on = -1;
  unsigned signs = 0;
  for (int i = 0; i < n_surf; ++i)
    if (sys.surfaces[i].eval(x) > 0.0) signs |= (1u << i);

  long long step_count = 0;
  auto record = [&] {
    result.samples.push_back({t, x, signs, sliding_on});
  };
  auto finish = [&](Termination why) {
    result.termination = why;
    result.final_x = x;
    result.final_t = t;
    result.final_signs = signs;
    result.final_sliding_on = sliding_on;
    record();
    return result;
  };
  record();

  // Bisection along a single RK4 substep for the earliest zero of surface j.
  auto locate = [&](const Vec& from, int j, double h, auto&& field) {
    double lo = 0.0, hi = h;
    Vec x_hi = detail::rk4(from, hi, field);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      Vec x_mid = detail::rk4(from, mid, field);
      const double s_mid = sys.surfaces[j].eval(x_mid);
      const double s_hi = sys.surfaces[j].eval(x_hi);
      if (s_mid == 0.0 || std::abs(s_mid) < opt.boundary_tol) return std::make_pair(mid, x_mid);
      if ((s_mid > 0) == (s_hi > 0)) {
        hi = mid;
        x_hi = x_mid;
      } else {
        lo = mid;
      }
      if (hi - lo < 1e-16 * h) return std::make_pair(mid, x_mid);
    }
    return std::make_pair(hi, x_hi);
  };

  while (t < t_end) {
    const double h = std::min(opt.step, t_end - t);
    if (sliding_on < 0) {
      auto field = [&](const Vec& y) { return sys.flow(y, signs); };
      if (detail::inf_norm(field(x)) < opt.conv_tol) return finish(Termination::Converged);
      Vec x_new = detail::rk4(x, h, field);
      if (!detail::finite(x_new)) throw std::runtime_error("integrate: state became non-finite");
      // Earliest surface crossing inside this step, if any.
      int hit = -1;
      double hit_h = h;
      Vec hit_x = x_new;
      for (int j = 0; j < n_surf; ++j) {
        const bool was_pos = (signs >> j) & 1u;
        const double s_new = sys.surfaces[j].eval(x_new);
        if ((s_new > 0.0) != was_pos || std::abs(s_new) < opt.boundary_tol) {
          auto [hj, xj] = locate(x, j, h, field);
          if (hj < hit_h || hit < 0) {
            hit = j;
            hit_h = hj;
            hit_x = xj;
          }
        }
      }
      if (hit < 0) {
        x = x_new;
        t += h;
      } else {
        x = hit_x;
        t += hit_h;
        // Simultaneous second surface -> codimension 2; caller decides.
        for (int j = 0; j < n_surf; ++j)
          if (j != hit && std::abs(sys.surfaces[j].eval(x)) < opt.simultaneous_tol)
            return finish(Termination::Codim2);
        detail::project_onto<N>(x, sys.surfaces[hit]);
        const auto slide = sliding_at<N>(sys, x, hit, signs);
        if (slide.feasible) {
          sliding_on = hit;
          if (opt.stop_on_sliding) return finish(Termination::SlidingEntered);
        } else {
          // Transversal crossing: adopt the sign the flow actually carries
          // the state into and nudge off the surface.
          const auto f_pos = sys.flow(x, signs | (1u << hit));
          double d_pos = 0.0;
          for (int i = 0; i < N; ++i) d_pos += f_pos[i] * sys.surfaces[hit].normal[i];
          const bool to_pos = d_pos > 0.0;
          if (to_pos)
            signs |= (1u << hit);
          else
            signs &= ~(1u << hit);
          const double nudge = 2.0 * opt.boundary_tol / sys.surfaces[hit].norm2();
          for (int i = 0; i < N; ++i)
            x[i] += (to_pos ? 1.0 : -1.0) * nudge * sys.surfaces[hit].normal[i];
        }
      }
    } else {
      // Sliding along surface `sliding_on`.
      const int j = sliding_on;
      auto current = sliding_at<N>(sys, x, j, signs);
      if (!current.feasible) {
        // Flows now agree: leave the surface on the side they point to.
        const auto f_pos = sys.flow(x, signs | (1u << j));
        double d_pos = 0.0;
        for (int i = 0; i < N; ++i) d_pos += f_pos[i] * sys.surfaces[j].normal[i];
        const bool to_pos = d_pos > 0.0;
        if (to_pos)
          signs |= (1u << j);
        else
          signs &= ~(1u << j);
        const double nudge = 2.0 * opt.boundary_tol / sys.surfaces[j].norm2();
        for (int i = 0; i < N; ++i)
          x[i] += (to_pos ? 1.0 : -1.0) * nudge * sys.surfaces[j].normal[i];
        sliding_on = -1;
        continue;
      }
      if (detail::inf_norm(current.vector) < opt.conv_tol)
        return finish(Termination::Converged);  // pseudo steady-state
      auto field = [&](const Vec& y) { return sliding_at<N>(sys, y, j, signs).vector; };
      Vec x_new = detail::rk4(x, h, field);
      detail::project_onto<N>(x_new, sys.surfaces[j]);
      if (!detail::finite(x_new)) throw std::runtime_error("integrate: state became non-finite");
      int hit = -1;
      double hit_h = h;
      Vec hit_x = x_new;
      for (int k = 0; k < n_surf; ++k) {
        if (k == j) continue;
        const bool was_pos = (signs >> k) & 1u;
        const double s_new = sys.surfaces[k].eval(x_new);
        if ((s_new > 0.0) != was_pos || std::abs(s_new) < opt.boundary_tol) {
          auto [hk, xk] = locate(x, k, h, field);
          if (hk < hit_h || hit < 0) {
            hit = k;
            hit_h = hk;
            hit_x = xk;
          }
        }
      }
      if (hit >= 0) {
        x = hit_x;
        t += hit_h;
        // Crossing the second surface transversally keeps the problem
        // codimension 1: compare the sliding fields for both signs of the hit
        // surface. Only an attracting intersection (true codimension-2
        // sliding) aborts.
        const auto s_here = sliding_at<N>(sys, x, j, signs);
        const auto s_there = sliding_at<N>(sys, x, j, signs ^ (1u << hit));
        double d_here = 0.0, d_there = 0.0;
        for (int i = 0; i < N; ++i) {
          d_here += s_here.vector[i] * sys.surfaces[hit].normal[i];
          d_there += s_there.vector[i] * sys.surfaces[hit].normal[i];
        }
        if (!s_here.feasible || !s_there.feasible || d_here * d_there <= 0.0)
          return finish(Termination::Codim2);
        const bool to_pos = d_there > 0.0;
        if (to_pos)
          signs |= (1u << hit);
        else
          signs &= ~(1u << hit);
        const double nudge = 2.0 * opt.boundary_tol / sys.surfaces[hit].norm2();
        for (int i = 0; i < N; ++i)
          x[i] += (to_pos ? 1.0 : -1.0) * nudge * sys.surfaces[hit].normal[i];
        detail::project_onto<N>(x, sys.surfaces[j]);
        continue;
      }
      x = x_new;
      t += h;
    }
    if (++step_count % opt.record_every == 0) record();
  }
  return finish(Termination::Horizon);
}

// ---------------------------------------------------------------------------
// Concrete systems
// ---------------------------------------------------------------------------

// Full 4-D Q system; surfaces: s_A = qac - qad, s_B = qbc - qbd
// (s > 0 <=> the player prefers C).
inline PiecewiseSystem<4> q_system(const ModelParams& params) {
  PiecewiseSystem<4> sys;
  sys.surfaces.push_back({{1.0, -1.0, 0.0, 0.0}, 0.0});
  sys.surfaces.push_back({{0.0, 0.0, 1.0, -1.0}, 0.0});
  sys.flow = [params](const std::array<double, 4>& x, unsigned signs) {
    const Region r = make_region((signs & 1u) ? Action::C : Action::D,
                                 (signs & 2u) ? Action::C : Action::D);
    return flow_in_region(QVector::from_flat(x), params, r);
  };
  return sys;
}

// Symmetric-subspace reduction (eps_a == eps_b, q_A == q_B = (c, d)); the
// codimension-2 corner of the full system is an ordinary codimension-1
// boundary here.
inline PiecewiseSystem<2> symmetric_system(const ModelParams& params) {
  if (params.eps_a != params.eps_b)
    throw std::invalid_argument("symmetric_system: needs eps_a == eps_b");
  PiecewiseSystem<2> sys;
  sys.surfaces.push_back({{1.0, -1.0}, 0.0});
  sys.flow = [params](const std::array<double, 2>& x, unsigned signs) {
    const Region r = (signs & 1u) ? Region::CC : Region::DD;
    const QVector q{{x[0], x[1]}, {x[0], x[1]}};
    const auto f = flow_in_region(q, params, r);
    return std::array<double, 2>{f[0], f[1]};
  };
  return sys;
}

// Player B's 2-D subsystem when A explores fully (eps_a = 1): A's play is an
// unconditional fair coin, so B faces a stationary bandit.
inline PiecewiseSystem<2> full_explorer_opponent_system(const ModelParams& params) {
  PiecewiseSystem<2> sys;
  sys.surfaces.push_back({{1.0, -1.0}, 0.0});
  const StageGame game(params.g);
  const double hat_c = 0.5 * (game.payoff(Action::C, Action::C) + game.payoff(Action::C, Action::D));
  const double hat_d = 0.5 * (game.payoff(Action::D, Action::C) + game.payoff(Action::D, Action::D));
  const double alpha = params.alpha, gamma = params.gamma, eps = params.eps_b;
  sys.flow = [=](const std::array<double, 2>& x, unsigned signs) -> std::array<double, 2> {
    if (signs & 1u)  // C preferred
      return {alpha * (1.0 - eps / 2.0) * (hat_c - (1.0 - gamma) * x[0]),
              alpha * (eps / 2.0) * (hat_d + gamma * x[0] - x[1])};
    return {alpha * (eps / 2.0) * (hat_c + gamma * x[1] - x[0]),
            alpha * (1.0 - eps / 2.0) * (hat_d - (1.0 - gamma) * x[1])};
  };
  return sys;
}

// Classic planar Filippov demonstration: xdot = x - 10 everywhere, ydot pushes
// onto the x-axis from both sides. Sliding weights are 1/2 and the sliding
// flow (x - 10, 0) has the pseudo steady-state (10, 0), which repels along the
// surface (recover it with find_pseudo_steady, not forward integration).
// Test fixture.
inline PiecewiseSystem<2> toy_filippov_system() {
  PiecewiseSystem<2> sys;
  sys.surfaces.push_back({{0.0, 1.0}, 0.0});
  sys.flow = [](const std::array<double, 2>& x, unsigned signs) -> std::array<double, 2> {
    const double dy = std::exp(x[1]);
    return {x[0] - 10.0, (signs & 1u) ? -dy : dy};
  };
  return sys;
}

// ---------------------------------------------------------------------------
// Model-level trajectory integration
// ---------------------------------------------------------------------------

struct TrajectorySample {
  double t = 0.0;
  QVector q{};
  Region region = Region::DD;
  int sliding_on = -1;  // 0 = A's surface, 1 = B's, 2 = symmetric subspace
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Termination termination = Termination::Horizon;
  QVector final_q{};
  double final_t = 0.0;
};

// Integrate the continuous-time approximation of the Q process. A simultaneous
// double-boundary hit is continued through the symmetric reduction when both
// the parameters and the state are symmetric; otherwise it aborts (generic
// codimension-2 sliding is not defined).
inline Trajectory integrate(const QVector& init, const ModelParams& params, double t_end,
                            double step, IntegrateOptions opt = {}) {
  params.validate();
  opt.step = step;
  Trajectory traj;
  const auto sys = q_system(params);
  auto res = integrate_piecewise<4>(sys, init.flat(), t_end, opt);
  for (const auto& s : res.samples) {
    const QVector q = QVector::from_flat(s.x);
    traj.samples.push_back({s.t, q, classify(q), s.sliding_on});
  }
  traj.termination = res.termination;
  traj.final_q = QVector::from_flat(res.final_x);
  traj.final_t = res.final_t;
  if (res.termination != Termination::Codim2) return traj;

  const QVector qc = traj.final_q;
  const bool symmetric_state = std::abs(qc.a.c - qc.b.c) < opt.simultaneous_tol &&
                               std::abs(qc.a.d - qc.b.d) < opt.simultaneous_tol;
  if (params.eps_a != params.eps_b || !symmetric_state) return traj;  // genuine abort

  const auto reduced = symmetric_system(params);
  std::array<double, 2> x0 = {0.5 * (qc.a.c + qc.b.c), 0.5 * (qc.a.d + qc.b.d)};
  auto res2 = integrate_piecewise<2>(reduced, x0, t_end - res.final_t, opt);
  for (const auto& s : res2.samples) {
    const QVector q{{s.x[0], s.x[1]}, {s.x[0], s.x[1]}};
    traj.samples.push_back({res.final_t + s.t, q, classify(q), s.sliding_on >= 0 ? 2 : -1});
  }
  traj.termination = res2.termination;
  traj.final_q = {{res2.final_x[0], res2.final_x[1]}, {res2.final_x[0], res2.final_x[1]}};
  traj.final_t = res.final_t + res2.final_t;
  return traj;
}

// Filippov construction on one player's indifference surface.
struct SlidingSolution {
  Player boundary = Player::A;
  double tau_star = 0.0;                  // weight on the player's C-preferred side
  std::array<double, 4> sliding_vector{};
  bool feasible = false;                  // tau in [0,1]
  bool pseudo_steady = false;             // sliding vector vanishes
};

inline SlidingSolution sliding(const QVector& q, const ModelParams& params, Player boundary,
                               double tol = 1e-9) {
  const QPair& qp = q.of(boundary);
  if (std::abs(qp.c - qp.d) > tol)
    throw std::invalid_argument("sliding: state is not on the named boundary");
  const QPair& other = q.of(boundary == Player::A ? Player::B : Player::A);
  if (std::abs(other.c - other.d) <= tol)
    throw std::invalid_argument("sliding: both boundaries active (codimension 2)");
  const auto sys = q_system(params);
  const int j = boundary == Player::A ? 0 : 1;
  unsigned signs = 0;
  if (q.a.c > q.a.d) signs |= 1u;
  if (q.b.c > q.b.d) signs |= 2u;
  const auto data = sliding_at<4>(sys, q.flat(), j, signs);
  SlidingSolution out;
  out.boundary = boundary;
  out.tau_star = data.tau;
  out.sliding_vector = data.vector;
  out.feasible = data.feasible;
  double norm = 0.0;
  for (double v : data.vector) norm = std::max(norm, std::abs(v));
  out.pseudo_steady = data.feasible && norm < 1e-8;
  return out;
}

}  // namespace qlpd::ode

#endif  // QLPD_ODE_HPP
