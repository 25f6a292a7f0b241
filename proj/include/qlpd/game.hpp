#ifndef QLPD_GAME_HPP
#define QLPD_GAME_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qlpd {

enum class Action : int { C = 0, D = 1 };

inline Action opposite(Action a) { return a == Action::C ? Action::D : Action::C; }

enum class Player : int { A = 0, B = 1 };

// Quarter-space of the joint Q-state: first letter is A's preferred action,
// second is B's.
enum class Region : int { CC = 0, CD = 1, DC = 2, DD = 3 };

inline Region make_region(Action a, Action b) {
  return static_cast<Region>(2 * static_cast<int>(a) + static_cast<int>(b));
}

inline Action region_action(Region r, Player p) {
  int bits = static_cast<int>(r);
  int bit = (p == Player::A) ? (bits >> 1) : (bits & 1);
  return static_cast<Action>(bit);
}

inline const char* region_name(Region r) {
  static constexpr const char* names[4] = {"CC", "CD", "DC", "DD"};
  return names[static_cast<int>(r)];
}

constexpr std::array<Region, 4> kAllRegions = {Region::CC, Region::CD, Region::DC, Region::DD};

// One-parameter prisoner's dilemma: two endowments of 2 grow by g when pooled.
//
//             C            D
//   C     (2g, 2g)     (g, 2+g)
//   D     (2+g, g)     (2, 2)
class StageGame {
 public:
  explicit StageGame(double g) : g_(g) {
    if (!(g >= 1.0 && g <= 2.0)) throw std::invalid_argument("StageGame: g must be in [1,2]");
  }

  double g() const { return g_; }

  // Payoff to the row player when she plays `mine` and the opponent `theirs`.
  double payoff(Action mine, Action theirs) const {
    if (mine == Action::C) return theirs == Action::C ? 2.0 * g_ : g_;
    return theirs == Action::C ? 2.0 + g_ : 2.0;
  }

  double min_payoff() const { return std::min(g_, 2.0); }
  double max_payoff() const { return std::max(2.0 * g_, 2.0 + g_); }

 private:
  double g_;
};

inline std::pair<double, double> stage_payoff(const StageGame& game, Action a, Action b) {
  return {game.payoff(a, b), game.payoff(b, a)};
}

namespace detail {
inline void check_eps(double eps, const char* name) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
}
}  // namespace detail

// Expected per-period payoff inside a region: each player plays its preferred
// action with probability 1 - eps/2 and the other with eps/2.
inline double zone_payoff(const StageGame& game, double eps_a, double eps_b, Region region,
                          Player player) {
  detail::check_eps(eps_a, "eps_a");
  detail::check_eps(eps_b, "eps_b");
  if (player == Player::B)
    return zone_payoff(game, eps_b, eps_a,
                       make_region(region_action(region, Player::B), region_action(region, Player::A)),
                       Player::A);
  const Action ga = region_action(region, Player::A);
  const Action gb = region_action(region, Player::B);
  double total = 0.0;
  for (Action aa : {ga, opposite(ga)}) {
    for (Action ab : {gb, opposite(gb)}) {
      const double pa = (aa == ga) ? 1.0 - eps_a / 2.0 : eps_a / 2.0;
      const double pb = (ab == gb) ? 1.0 - eps_b / 2.0 : eps_b / 2.0;
      total += pa * pb * game.payoff(aa, ab);
    }
  }
  return total;
}

// Designer payoff: occupancy-weighted sum of zone payoffs. `tau` is indexed by
// Region and must sum to 1.
inline double designer_payoff(const std::array<double, 4>& tau, const StageGame& game,
                              double eps_a, double eps_b, Player player) {
  double sum = 0.0;
  for (double t : tau) {
    if (t < 0.0) throw std::invalid_argument("designer_payoff: negative occupancy");
    sum += t;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("designer_payoff: occupancies must sum to 1");
  double value = 0.0;
  for (Region r : kAllRegions)
    value += tau[static_cast<int>(r)] * zone_payoff(game, eps_a, eps_b, r, player);
  return value;
}

}  // namespace qlpd

#endif  // QLPD_GAME_HPP
