#ifndef QLPD_AGENT_HPP
#define QLPD_AGENT_HPP

#include <algorithm>
#include <stdexcept>

#include "qlpd/game.hpp"
#include "qlpd/rng.hpp"

namespace qlpd {

// Stateless Q-vector of one agent: one value per action.
struct QPair {
  double c = 0.0;
  double d = 0.0;

  double value(Action a) const { return a == Action::C ? c : d; }
  double& value(Action a) { return a == Action::C ? c : d; }
  double max() const { return std::max(c, d); }
  // Preferred action; an exact tie counts as D (region classification rule).
  Action argmax_tie_d() const { return c > d ? Action::C : Action::D; }
};

struct AgentParams {
  double alpha;    // learning rate, (0,1]
  double gamma;    // discount, [0,1)
  double epsilon;  // exploration, [0,1]

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0,1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0,1]");
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double mid() const { return 0.5 * (lo + hi); }
};

// I_X = [pi(X,D)/(1-gamma), pi(X,C)/(1-gamma)]: the band the Q-value of X
// settles into when X is played as a greedy action often enough.
struct Intervals {
  Interval i_c;
  Interval i_d;
  const Interval& of(Action a) const { return a == Action::C ? i_c : i_d; }
};

inline Intervals intervals(double g, double gamma) {
  StageGame game(g);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("intervals: gamma must be in [0,1)");
  const double s = 1.0 / (1.0 - gamma);
  return {{game.payoff(Action::C, Action::D) * s, game.payoff(Action::C, Action::C) * s},
          {game.payoff(Action::D, Action::D) * s, game.payoff(Action::D, Action::C) * s}};
}

// Epsilon-greedy selection. Exploring still allows the greedy action, so the
// greedy action's total frequency is 1 - eps/2. Greedy ties resolve by fair coin.
inline Action select_action(const QPair& q, double epsilon, rng::Stream& stream) {
  detail::check_eps(epsilon, "epsilon");
  if (stream.bernoulli(epsilon)) return stream.bernoulli(0.5) ? Action::D : Action::C;
  if (q.c == q.d) return stream.bernoulli(0.5) ? Action::D : Action::C;
  return q.c > q.d ? Action::C : Action::D;
}

// Extension seam: anything callable as Action(const QPair&, rng::Stream&) can
// drive an agent. Epsilon-greedy is the only shipped policy; greedy play is
// its eps = 0 case.
struct EpsilonGreedyPolicy {
  double epsilon = 0.0;
  Action operator()(const QPair& q, rng::Stream& stream) const {
    return select_action(q, epsilon, stream);
  }
};

inline EpsilonGreedyPolicy greedy_policy() { return {0.0}; }

// Asynchronous stateless Q-update: only the played component moves, and the
// bootstrap max reads the pre-update pair.
inline QPair update(const QPair& q, Action played, double reward, const AgentParams& params) {
  QPair out = q;
  const double target = reward + params.gamma * q.max();
  out.value(played) = (1.0 - params.alpha) * q.value(played) + params.alpha * target;
  return out;
}

// Initial condition: independent uniforms on I_C x I_D.
inline QPair sample_initial(double g, double gamma, rng::Stream& stream) {
  const Intervals iv = intervals(g, gamma);
  QPair q;
  q.c = stream.uniform(iv.i_c.lo, iv.i_c.hi);
  q.d = stream.uniform(iv.i_d.lo, iv.i_d.hi);
  return q;
}

}  // namespace qlpd

#endif  // QLPD_AGENT_HPP
