#include <catch_amalgamated.hpp>
#include <cmath>

#include "qlpd/ode.hpp"
#include "qlpd/simulator.hpp"

using namespace qlpd;

namespace {

// Monte Carlo oracle: sample mean and standard error of the one-step increment
// of the discrete process from a fixed state.
struct McIncrement {
  std::array<double, 4> mean{};
  std::array<double, 4> sem{};
};

McIncrement mc_one_step(const ModelParams& params, const QVector& q, int n, std::uint64_t seed) {
  const StageGame game(params.g);
  std::array<double, 4> sum{}, sumsq{};
  for (int i = 0; i < n; ++i) {
    rng::Stream sa(rng::derive(seed, i, 1));
    rng::Stream sb(rng::derive(seed, i, 2));
    const QVector next = advance(params, game, q, sa, sb);
    const auto before = q.flat();
    const auto after = next.flat();
    for (int c = 0; c < 4; ++c) {
      const double d = after[c] - before[c];
      sum[c] += d;
      sumsq[c] += d * d;
    }
  }
  McIncrement out;
  for (int c = 0; c < 4; ++c) {
    out.mean[c] = sum[c] / n;
    const double var = std::max(0.0, sumsq[c] / n - out.mean[c] * out.mean[c]);
    out.sem[c] = std::sqrt(var / n);
  }
  return out;
}

// Draw a state uniformly in (I_C x I_D)^2 conditioned on a region.
QVector draw_in_region(const ModelParams& params, Region r, rng::Stream& s) {
  for (;;) {
    const QVector q = sample_initial_state(params, s);
    if (classify(q) == r && q.a.c != q.a.d && q.b.c != q.b.d) return q;
  }
}

// Independent root-finding oracle for the symmetric pseudo steady-state:
// tau F_CC + (1-tau) F_DD = 0 on the diagonal reduces to a quadratic in
// beta = (1-gamma) q after eliminating tau.
struct SymmetricPseudo {
  double q;
  double tau;
};

std::vector<SymmetricPseudo> symmetric_pseudo_oracle(double g, double gamma, double eps) {
  const double w = eps / 2;
  // u1 = g(2-w)-b, v1 = 2+g(1-w)-b, u2 = g(1+w)-b, v2 = 2+wg-b
  // condition: w^2 u2 v1 = (1-w)^2 u1 v2
  const double A = w * w - (1 - w) * (1 - w);
  const double B = -w * w * (g * (1 + w) + 2 + g * (1 - w)) +
                   (1 - w) * (1 - w) * (g * (2 - w) + 2 + w * g);
  const double C = w * w * g * (1 + w) * (2 + g * (1 - w)) -
                   (1 - w) * (1 - w) * g * (2 - w) * (2 + w * g);
  const double disc = B * B - 4 * A * C;
  std::vector<SymmetricPseudo> out;
  if (disc < 0) return out;
  for (double sign : {1.0, -1.0}) {
    const double b = (-B + sign * std::sqrt(disc)) / (2 * A);
    const double u1 = g * (2 - w) - b, u2 = g * (1 + w) - b;
    const double den = w * u2 - (1 - w) * u1;
    if (den == 0) continue;
    const double tau = w * u2 / den;
    if (tau >= 0 && tau <= 1) out.push_back({b / (1 - gamma), tau});
  }
  return out;
}

}  // namespace

TEST_CASE("pi_hat mixes the opponent's actions") {
  const StageGame g(1.7);
  CHECK(ode::pi_hat(g, Action::D, Action::D, 0.0) == Catch::Approx(2.0));
  CHECK(ode::pi_hat(g, Action::D, Action::D, 1.0) == Catch::Approx(0.5 * (2 + 3.7)));
  CHECK(ode::pi_hat(g, Action::C, Action::D, 0.2) == Catch::Approx(0.9 * 1.7 + 0.1 * 3.4));
}

TEST_CASE("symmetric threshold formula") {
  CHECK(ode::symmetric_threshold(1.0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(ode::symmetric_threshold(2.0) == Catch::Approx(1.0));
  CHECK(ode::symmetric_threshold(1.7) == Catch::Approx(0.5799159747915971).epsilon(1e-12));
}

TEST_CASE("dd steady state closed form") {
  const ModelParams p{1.7, 0.95, 0.1, 0.1, 0.1};
  const QVector eq = ode::dd_steady_state(p);
  CHECK(eq.a.d == Catch::Approx(41.7).epsilon(1e-12));
  CHECK(eq.a.c == Catch::Approx(41.4).epsilon(1e-12));
  CHECK(eq.b.d == eq.a.d);

  // symmetric eps: the D component equals (4 + eps g) / (2 (1 - gamma))
  for (double eps : {0.0, 0.3, 0.7, 1.0}) {
    const ModelParams ps{1.7, 0.95, 0.1, eps, eps};
    CHECK(ode::dd_steady_state(ps).a.d ==
          Catch::Approx((4 + eps * 1.7) / (2 * 0.05)).epsilon(1e-12));
  }

  // eps -> 0 limit
  const ModelParams p0{1.7, 0.95, 0.1, 0.0, 0.0};
  const QVector eq0 = ode::dd_steady_state(p0);
  CHECK(eq0.a.d == Catch::Approx(2.0 / 0.05));
  CHECK(eq0.a.c == Catch::Approx(1.7 + 2 * 0.95 / 0.05));

  // the point lies in omega_DD (strictly for g < 2), and the flow vanishes there
  rng::Stream s(3);
  for (int i = 0; i < 100; ++i) {
    const ModelParams pr{s.uniform(1.0, 2.0), s.uniform(0.0, 0.99), s.uniform(0.01, 1.0),
                         s.uniform01(), s.uniform01()};
    const QVector e = ode::dd_steady_state(pr);
    if (pr.g < 2.0) {
      CHECK(e.a.d > e.a.c);
      CHECK(e.b.d > e.b.c);
    }
    const auto f = ode::flow_in_region(e, pr, Region::DD);
    for (double v : f) CHECK(std::abs(v) < 1e-10);
  }
}

TEST_CASE("flow rejects boundary and mislabeled states") {
  const ModelParams p{1.7, 0.95, 0.1, 0.1, 0.2};
  CHECK_THROWS_AS(ode::flow(QVector::from_flat({50, 50, 60, 40}), p, Region::CC),
                  std::invalid_argument);
  CHECK_THROWS_AS(ode::flow(QVector::from_flat({50, 40, 60, 40.5}), p, Region::DD),
                  std::invalid_argument);
  CHECK_NOTHROW(ode::flow(QVector::from_flat({50, 40, 60, 40.5}), p, Region::CC));
}

TEST_CASE("greedy exploration rate freezes the unplayed component") {
  const ModelParams p{1.7, 0.95, 0.1, 0.0, 0.4};
  const auto f = ode::flow(QVector::from_flat({60, 50, 55, 50}), p, Region::CC);
  CHECK(f[1] == 0.0);  // A never updates D when eps_a = 0 and C is greedy
}

TEST_CASE("flow equals the expected one-step increment, per region") {
  const ModelParams p{1.7, 0.95, 0.1, 0.1, 0.2};
  rng::Stream s(17);
  for (Region r : kAllRegions) {
    const QVector q = draw_in_region(p, r, s);
    const auto f = ode::flow(q, p, r);
    const McIncrement mc = mc_one_step(p, q, 200000, rng::derive(99, static_cast<int>(r)));
    for (int c = 0; c < 4; ++c) {
      const double tol = 4 * mc.sem[c] + 1e-12;
      INFO("region " << region_name(r) << " component " << c << " flow " << f[c] << " mc "
                     << mc.mean[c] << " sem " << mc.sem[c]);
      CHECK(std::abs(f[c] - mc.mean[c]) <= tol);
    }
  }
}

TEST_CASE("omega_DD flow is affine and contracting") {
  rng::Stream s(23);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p{s.uniform(1.0, 2.0), s.uniform(0.5, 0.99), s.uniform(0.05, 0.5),
                        s.uniform(0.05, 1.0), s.uniform(0.05, 1.0)};
    const QVector base = ode::dd_steady_state(p);
    // finite differences recover the Jacobian exactly for an affine field
    std::array<std::array<double, 4>, 4> jac{};
    const auto f0 = ode::flow_in_region(base, p, Region::DD);
    for (int c = 0; c < 4; ++c) {
      auto x = base.flat();
      x[c] += 1.0;
      const auto f1 = ode::flow_in_region(QVector::from_flat(x), p, Region::DD);
      for (int rrow = 0; rrow < 4; ++rrow) jac[rrow][c] = f1[rrow] - f0[rrow];
    }
    // affinity: doubling the displacement doubles the response
    auto x2 = base.flat();
    x2[0] += 2.0;
    const auto f2 = ode::flow_in_region(QVector::from_flat(x2), p, Region::DD);
    CHECK(f2[0] - f0[0] == Catch::Approx(2 * jac[0][0]).margin(1e-12));
    // player blocks are decoupled
    for (int rrow = 0; rrow < 2; ++rrow)
      for (int c = 2; c < 4; ++c) {
        CHECK(jac[rrow][c] == 0.0);
        CHECK(jac[c - 2][rrow + 2] == 0.0);
      }
    // per-player 2x2 eigenvalues, via trace and determinant
    for (int blk = 0; blk < 2; ++blk) {
      const double a = jac[2 * blk][2 * blk], b = jac[2 * blk][2 * blk + 1];
      const double c = jac[2 * blk + 1][2 * blk], d = jac[2 * blk + 1][2 * blk + 1];
      const double tr = a + d, det = a * d - b * c;
      const double disc = tr * tr - 4 * det;
      if (disc >= 0) {
        CHECK((tr + std::sqrt(disc)) / 2 < 0);
        CHECK((tr - std::sqrt(disc)) / 2 < 0);
      } else {
        CHECK(tr / 2 < 0);
      }
    }
  }
}

TEST_CASE("no steady state exists outside omega_DD") {
  rng::Stream s(29);
  for (int trial = 0; trial < 200; ++trial) {
    const ModelParams p{s.uniform(1.0, 2.0), s.uniform(0.0, 0.99), s.uniform(0.01, 1.0),
                        s.uniform(0.01, 1.0), s.uniform(0.01, 1.0)};
    for (Region r : {Region::CC, Region::CD, Region::DC})
      CHECK(ode::no_steady_state_residual(p, r).violated);
    const auto dd = ode::no_steady_state_residual(p, Region::DD);
    CHECK_FALSE(dd.violated);
    CHECK(dd.candidate.flat() == ode::dd_steady_state(p).flat());
  }
  CHECK_THROWS_AS(
      ode::no_steady_state_residual(ModelParams{1.7, 0.95, 0.1, 0.0, 0.3}, Region::CC),
      std::invalid_argument);
}

TEST_CASE("integration inside omega_DD converges to the steady state") {
  const ModelParams p{1.7, 0.95, 0.1, 0.1, 0.2};
  const QVector eq = ode::dd_steady_state(p);
  rng::Stream s(37);
  for (int trial = 0; trial < 5; ++trial) {
    QVector init;
    init.a.d = s.uniform(42.0, 48.0);
    init.a.c = s.uniform(35.0, 40.0);
    init.b.d = s.uniform(42.0, 48.0);
    init.b.c = s.uniform(35.0, 40.0);
    const ode::Trajectory traj = ode::integrate(init, p, 20000.0, p.alpha / 10);
    CHECK(traj.termination == ode::Termination::Converged);
    const auto fx = traj.final_q.flat(), ex = eq.flat();
    for (int c = 0; c < 4; ++c) CHECK(std::abs(fx[c] - ex[c]) < 1e-6);
  }
}

TEST_CASE("toy planar Filippov system") {
  const auto sys = ode::toy_filippov_system();
  ode::IntegrateOptions opt;
  opt.step = 0.001;
  opt.conv_tol = 1e-12;
  opt.record_every = 200;

  SECTION("trajectories from the upper half plane enter sliding on the axis") {
    const auto res = ode::integrate_piecewise<2>(sys, {3.0, 1.0}, 5.0, opt);
    CHECK(res.final_sliding_on == 0);
    CHECK(std::abs(res.final_x[1]) < 1e-8);
    // x - 10 < 0 here, so the slide runs away from the pseudo steady state
    CHECK(res.final_x[0] < 3.0);

    ode::IntegrateOptions stop = opt;
    stop.stop_on_sliding = true;
    const auto entry = ode::integrate_piecewise<2>(sys, {3.0, 1.0}, 5.0, stop);
    CHECK(entry.termination == ode::Termination::SlidingEntered);
    CHECK(std::abs(entry.final_x[1]) < 1e-6);
  }

  SECTION("sliding weights are 1/2 on the axis with sliding vector (x-10, 0)") {
    const auto slide = ode::sliding_at<2>(sys, {3.0, 0.0}, 0, 0u);
    CHECK(slide.feasible);
    CHECK(slide.tau == Catch::Approx(0.5));
    CHECK(slide.vector[0] == Catch::Approx(3.0 - 10.0));
    CHECK(std::abs(slide.vector[1]) < 1e-12);
  }

  SECTION("the pseudo steady state (10, 0) is recovered by root finding") {
    const auto ps = ode::find_pseudo_steady<2>(sys, 0, 0u, {-20.0, 0.0}, {40.0, 0.0});
    REQUIRE(ps.has_value());
    CHECK(std::abs((*ps)[0] - 10.0) < 1e-8);
    CHECK(std::abs((*ps)[1]) < 1e-8);
    const auto at = ode::sliding_at<2>(sys, *ps, 0, 0u);
    CHECK(at.tau == Catch::Approx(0.5));
    CHECK(std::abs(at.vector[0]) < 1e-8);
  }
}

TEST_CASE("full-explorer opponent subsystem has no feasible pseudo steady state") {
  const double g = 1.7, gamma = 0.95, eps_b = 0.3;
  const ModelParams p{g, gamma, 0.1, 1.0, eps_b};
  const auto sys = ode::full_explorer_opponent_system(p);

  // stationary-sliding candidates in closed form
  const double q1 = 3 * g / (2 * (1 - gamma));       // 51
  const double q2 = (4 + g) / (2 * (1 - gamma));     // 57
  const double tau1 = (2 - eps_b) / (2 * (1 - eps_b));
  const double tau2 = -eps_b / (2 * (1 - eps_b));

  const auto s1 = ode::sliding_at<2>(sys, {q1, q1}, 0, 0u);
  CHECK(s1.tau == Catch::Approx(tau1));
  CHECK_FALSE(s1.feasible);
  // the blended field is stationary at the candidate, yet infeasible
  CHECK(std::abs(s1.vector[0]) < 1e-9);
  CHECK(std::abs(s1.vector[1]) < 1e-9);

  const auto s2 = ode::sliding_at<2>(sys, {q2, q2}, 0, 0u);
  CHECK(s2.tau == Catch::Approx(tau2));
  CHECK_FALSE(s2.feasible);
  CHECK(std::abs(s2.vector[0]) < 1e-9);
  CHECK(std::abs(s2.vector[1]) < 1e-9);

  // the subsystem simply converges to its defection fixed point
  ode::IntegrateOptions opt;
  opt.step = 0.01;
  const auto res = ode::integrate_piecewise<2>(sys, {55.0, 50.0}, 30000.0, opt);
  CHECK(res.termination == ode::Termination::Converged);
  CHECK(res.final_x[1] > res.final_x[0]);
}

TEST_CASE("symmetric trajectories stay in CC and DD") {
  const double g = 1.7, gamma = 0.95, alpha = 0.1;

  SECTION("below the threshold: sliding pseudo-equilibrium") {
    const double eps = 0.1;
    const ModelParams p{g, gamma, alpha, eps, eps};
    const QVector init = QVector::from_flat({62, 48, 62, 48});
    const ode::Trajectory traj = ode::integrate(init, p, 20000.0, alpha / 10);
    CHECK(traj.termination == ode::Termination::Converged);
    bool entered_sliding = false;
    for (const auto& smp : traj.samples) {
      CHECK((smp.region == Region::CC || smp.region == Region::DD));
      if (smp.sliding_on == 2) entered_sliding = true;
    }
    CHECK(entered_sliding);
    // converged point matches the independent quadratic oracle
    const auto roots = symmetric_pseudo_oracle(g, gamma, eps);
    REQUIRE_FALSE(roots.empty());
    const double q_star = roots.back().q;  // attractive root (larger q)
    CHECK(traj.final_q.a.c == Catch::Approx(q_star).epsilon(1e-6));
    CHECK(traj.final_q.a.d == Catch::Approx(q_star).epsilon(1e-6));
    CHECK(traj.final_q.b.c == Catch::Approx(q_star).epsilon(1e-6));
  }

  SECTION("above the threshold: crossing into DD") {
    const double eps = 0.7;  // > 0.58 threshold at g=1.7
    const ModelParams p{g, gamma, alpha, eps, eps};
    const QVector init = QVector::from_flat({62, 48, 62, 48});
    const ode::Trajectory traj = ode::integrate(init, p, 30000.0, alpha / 10);
    CHECK(traj.termination == ode::Termination::Converged);
    for (const auto& smp : traj.samples)
      CHECK((smp.region == Region::CC || smp.region == Region::DD));
    const auto eq = ode::dd_steady_state(p).flat();
    const auto fx = traj.final_q.flat();
    for (int c = 0; c < 4; ++c) CHECK(fx[c] == Catch::Approx(eq[c]).margin(1e-5));
  }

  SECTION("oracle roots disappear above the threshold") {
    CHECK(symmetric_pseudo_oracle(g, gamma, 0.59).empty());
    CHECK_FALSE(symmetric_pseudo_oracle(g, gamma, 0.57).empty());
  }
}

TEST_CASE("trajectory bookkeeping") {
  const ModelParams p{1.7, 0.95, 0.1, 0.1, 0.2};
  const QVector init = QVector::from_flat({37, 44, 38, 45});
  const ode::Trajectory traj = ode::integrate(init, p, 2000.0, 0.01);
  REQUIRE(traj.samples.size() > 2);
  for (std::size_t i = 1; i < traj.samples.size(); ++i)
    CHECK(traj.samples[i].t > traj.samples[i - 1].t);
  for (const auto& s : traj.samples)
    if (s.sliding_on < 0) CHECK(s.region == classify(s.q));

  // bit-identical reruns
  const ode::Trajectory again = ode::integrate(init, p, 2000.0, 0.01);
  REQUIRE(again.samples.size() == traj.samples.size());
  for (std::size_t i = 0; i < traj.samples.size(); ++i)
    CHECK(again.samples[i].q.flat() == traj.samples[i].q.flat());
}

TEST_CASE("above the threshold the diagonal is crossed, not slid on") {
  // for eps = 0.7 > eps_bar(1.7) = 0.58 the normal components point the same
  // way on the diagonal stretch below (1-gamma)q = 2.945, so arrivals there
  // cross straight into DD
  const double g = 1.7, eps = 0.7;
  const ModelParams p{g, 0.95, 0.1, eps, eps};
  const auto sys = ode::symmetric_system(p);
  ode::IntegrateOptions opt;
  opt.step = 0.01;
  opt.stop_on_sliding = true;
  const auto res = ode::integrate_piecewise<2>(sys, {52.0, 48.0}, 30000.0, opt);
  CHECK(res.termination != ode::Termination::SlidingEntered);
  bool crossed = false;
  const auto full = ode::integrate_piecewise<2>(sys, {52.0, 48.0}, 30000.0,
                                                ode::IntegrateOptions{.step = 0.01});
  for (std::size_t i = 1; i < full.samples.size(); ++i) {
    if (full.samples[i - 1].signs != full.samples[i].signs) {
      const double q = 0.5 * (full.samples[i].x[0] + full.samples[i].x[1]);
      const auto slide = ode::sliding_at<2>(sys, {q, q}, 0, 0u);
      CHECK_FALSE(slide.feasible);
      crossed = true;
    }
  }
  CHECK(crossed);
  CHECK(full.termination == ode::Termination::Converged);
  CHECK(full.final_x[1] > full.final_x[0]);
}

TEST_CASE("sliding solution on a player's surface") {
  const ModelParams p{1.7, 0.95, 0.1, 0.1, 0.2};
  // B on its boundary, A strictly prefers C
  const QVector q = QVector::from_flat({60, 50, 55, 55});
  const auto sol = ode::sliding(q, p, Player::B);
  // normal component of the sliding vector vanishes when feasible
  if (sol.feasible) CHECK(std::abs(sol.sliding_vector[2] - sol.sliding_vector[3]) < 1e-10);
  CHECK_THROWS_AS(ode::sliding(QVector::from_flat({60, 50, 55, 54}), p, Player::B),
                  std::invalid_argument);
  CHECK_THROWS_AS(ode::sliding(QVector::from_flat({55, 55, 55, 55}), p, Player::B),
                  std::invalid_argument);
}

TEST_CASE("generic codimension-2 hits abort") {
  // two surfaces x=0 and y=0 with a constant flow into the corner from the
  // (+,+) quadrant; both are hit simultaneously from (1, 1)
  ode::PiecewiseSystem<2> sys;
  sys.surfaces.push_back({{1.0, 0.0}, 0.0});
  sys.surfaces.push_back({{0.0, 1.0}, 0.0});
  sys.flow = [](const std::array<double, 2>&, unsigned) -> std::array<double, 2> {
    return {-1.0, -1.0};
  };
  ode::IntegrateOptions opt;
  opt.step = 0.01;
  const auto res = ode::integrate_piecewise<2>(sys, {1.0, 1.0}, 10.0, opt);
  CHECK(res.termination == ode::Termination::Codim2);
  CHECK(std::abs(res.final_x[0]) < 1e-6);
  CHECK(std::abs(res.final_x[1]) < 1e-6);
}
