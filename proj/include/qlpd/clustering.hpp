#ifndef QLPD_CLUSTERING_HPP
#define QLPD_CLUSTERING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qlpd/ode.hpp"
#include "qlpd/rng.hpp"
#include "qlpd/simulator.hpp"

namespace qlpd::clustering {

using Point = std::vector<double>;

struct ClusterResult {
  std::vector<Point> centers;  // sorted by ascending first coordinate
  std::vector<int> labels;
  double inertia = 0.0;                  // sum of squared distances to own center
  std::vector<double> inertia_history;   // one entry per Lloyd iteration
};

namespace detail {

inline double sq_dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline int nearest(const Point& p, const std::vector<Point>& centers) {
  int best = 0;
  double best_d = sq_dist(p, centers[0]);
  for (int c = 1; c < static_cast<int>(centers.size()); ++c) {
    const double d = sq_dist(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline double total_inertia(const std::vector<Point>& pts, const std::vector<Point>& centers,
                            const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += sq_dist(pts[i], centers[labels[i]]);
  return s;
}

}  // namespace detail

// Lloyd's algorithm, best of `restarts` random center initializations.
// Deterministic given (points, k, restarts, seed). Empty clusters are reseeded
// from the point farthest off its center.
inline ClusterResult kmeans(const std::vector<Point>& points, int k, int restarts,
                            std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (restarts < 1) restarts = 1;
  const std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw std::invalid_argument("kmeans: inconsistent dimensions");

  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int attempt = 0; attempt < restarts; ++attempt) {
    rng::Stream stream(rng::derive(seed, static_cast<std::uint64_t>(attempt)));
    // k distinct observations as initial centers
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(stream.below(static_cast<std::uint64_t>(n - i)));
      std::swap(order[i], order[j]);
    }
    std::vector<Point> centers;
    centers.reserve(k);
    for (int i = 0; i < k; ++i) centers.push_back(points[order[i]]);

    std::vector<int> labels(n, -1);
    std::vector<double> history;
    for (int iter = 0; iter < 1000; ++iter) {
      std::vector<int> new_labels(n);
      for (int i = 0; i < n; ++i) new_labels[i] = detail::nearest(points[i], centers);
      // reseed empty clusters from the farthest point
      for (int c = 0; c < k; ++c) {
        if (std::count(new_labels.begin(), new_labels.end(), c) > 0) continue;
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = detail::sq_dist(points[i], centers[new_labels[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[c] = points[far];
        new_labels[far] = c;
      }
      const bool settled = new_labels == labels;
      labels = std::move(new_labels);
      for (int c = 0; c < k; ++c) {
        Point mean(dim, 0.0);
        int count = 0;
        for (int i = 0; i < n; ++i) {
          if (labels[i] != c) continue;
          ++count;
          for (std::size_t d = 0; d < dim; ++d) mean[d] += points[i][d];
        }
        if (count > 0) {
          for (double& v : mean) v /= count;
          centers[c] = mean;
        }
      }
      const double inertia = detail::total_inertia(points, centers, labels);
      if (!history.empty() && inertia > history.back() + 1e-9 * (1.0 + history.back()))
        throw std::logic_error("kmeans: inertia increased across a Lloyd iteration");
      history.push_back(inertia);
      if (settled) break;
    }

    const double inertia = history.back();
    if (inertia < best.inertia) {
      best.centers = centers;
      best.labels = labels;
      best.inertia = inertia;
      best.inertia_history = history;
    }
  }

  // canonical cluster order: ascending first coordinate of centers
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return best.centers[a] < best.centers[b]; });
  std::vector<Point> centers(k);
  std::vector<int> relabel(k);
  for (int c = 0; c < k; ++c) {
    centers[c] = best.centers[perm[c]];
    relabel[perm[c]] = c;
  }
  best.centers = std::move(centers);
  for (int& l : best.labels) l = relabel[l];
  return best;
}

// Stage 1 of the coupling pipeline: split triplets by their tau_CC value;
// the higher-center cluster is the one that allows spontaneous coupling.
inline std::vector<bool> detect_coupling(const std::vector<double>& tau_cc, int restarts = 10,
                                         std::uint64_t seed = 0x7a6b5c4d3e2f1a0bULL) {
  if (tau_cc.size() < 2) throw std::invalid_argument("detect_coupling: need at least 2 triplets");
  const bool degenerate =
      std::all_of(tau_cc.begin(), tau_cc.end(), [&](double v) { return v == tau_cc.front(); });
  if (degenerate) return std::vector<bool>(tau_cc.size(), false);
  std::vector<Point> pts;
  pts.reserve(tau_cc.size());
  for (double v : tau_cc) pts.push_back({v});
  const ClusterResult res = kmeans(pts, 2, restarts, seed);
  // centers are sorted ascending, so cluster 1 is the coupling one
  std::vector<bool> flags(tau_cc.size());
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = res.labels[i] == 1;
  return flags;
}

enum class Provenance { ForcedZero, ForcedOne, Measured };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::ForcedZero: return "forced-zero";
    case Provenance::ForcedOne: return "forced-one";
    case Provenance::Measured: return "measured";
  }
  return "?";
}

struct BasinEstimate {
  double lambda = 0.0;  // normalized basin size of spontaneous coupling
  Provenance provenance = Provenance::ForcedZero;
};

// Measured path: 4-D K=2 on terminal Q-vectors; lambda is the fraction of runs
// in the cluster whose center lies farther from the omega_DD steady state.
inline BasinEstimate measure_basin(const std::vector<QVector>& terminals,
                                   const ModelParams& params, int restarts, std::uint64_t seed) {
  if (terminals.size() < 4) throw std::invalid_argument("measure_basin: need at least 4 runs");
  std::vector<Point> pts;
  pts.reserve(terminals.size());
  for (const auto& q : terminals) {
    const auto f = q.flat();
    pts.push_back({f[0], f[1], f[2], f[3]});
  }
  const ClusterResult res = kmeans(pts, 2, restarts, seed);
  const auto dd = ode::dd_steady_state(params).flat();
  const Point dd_pt{dd[0], dd[1], dd[2], dd[3]};
  const double d0 = detail::sq_dist(res.centers[0], dd_pt);
  const double d1 = detail::sq_dist(res.centers[1], dd_pt);
  const int coupled_cluster = d1 >= d0 ? 1 : 0;
  const auto in_coupled = std::count(res.labels.begin(), res.labels.end(), coupled_cluster);
  return {static_cast<double>(in_coupled) / static_cast<double>(terminals.size()),
          Provenance::Measured};
}

struct TripletObservations {
  ModelParams params{};
  double tau_cc = 0.0;
  std::vector<QVector> terminal_qs;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Three-stage detection / basin-measurement pipeline:
//   1. 1-D K=2 on tau_CC flags triplets that allow coupling (others: lambda 0).
//   2. Per flagged triplet, 4-D K=2 on terminal Q-vectors yields the inertia
//      drop K=1 -> K=2 and the inter-center distance.
//   3. A meta K=2 over (sigmoid of standardized inertia drop, center distance)
//      separates triplets with two real clusters (lambda measured) from
//      single-cluster ones (lambda forced to 1).
inline std::vector<BasinEstimate> estimate_basins(const std::vector<TripletObservations>& triplets,
                                                  int restarts = 10,
                                                  std::uint64_t seed = 0x51c3a9e7d2b8f046ULL) {
  std::vector<double> tau;
  tau.reserve(triplets.size());
  for (const auto& t : triplets) tau.push_back(t.tau_cc);
  const std::vector<bool> flags = detect_coupling(tau, restarts, rng::derive(seed, 1));

  std::vector<BasinEstimate> out(triplets.size(), BasinEstimate{0.0, Provenance::ForcedZero});
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < triplets.size(); ++i)
    if (flags[i]) flagged.push_back(i);
  if (flagged.empty()) return out;

  std::vector<double> drop(flagged.size()), span(flagged.size());
  for (std::size_t f = 0; f < flagged.size(); ++f) {
    const auto& trip = triplets[flagged[f]];
    if (trip.terminal_qs.size() < 4)
      throw std::invalid_argument("estimate_basins: flagged triplet has fewer than 4 runs");
    std::vector<Point> pts;
    pts.reserve(trip.terminal_qs.size());
    for (const auto& q : trip.terminal_qs) {
      const auto v = q.flat();
      pts.push_back({v[0], v[1], v[2], v[3]});
    }
    const ClusterResult r2 = kmeans(pts, 2, restarts, rng::derive(seed, 2, flagged[f]));
    const ClusterResult r1 = kmeans(pts, 1, 1, rng::derive(seed, 3, flagged[f]));
    drop[f] = r1.inertia - r2.inertia;
    span[f] = std::sqrt(detail::sq_dist(r2.centers[0], r2.centers[1]));
  }

  // Which flagged triplets really have two clusters?
  std::vector<bool> two_clusters(flagged.size(), true);
  if (flagged.size() >= 2) {
    double mean = 0.0;
    for (double d : drop) mean += d / drop.size();
    double var = 0.0;
    for (double d : drop) var += (d - mean) * (d - mean) / drop.size();
    const double sd = std::sqrt(var);
    std::vector<Point> meta;
    meta.reserve(flagged.size());
    for (std::size_t f = 0; f < flagged.size(); ++f)
      meta.push_back({sigmoid(sd > 0.0 ? (drop[f] - mean) / sd : 0.0), span[f]});
    const ClusterResult mres = kmeans(meta, 2, restarts, rng::derive(seed, 4));
    // the meta cluster with the larger center distance holds the two-cluster triplets
    const int two_id = mres.centers[1][1] >= mres.centers[0][1] ? 1 : 0;
    for (std::size_t f = 0; f < flagged.size(); ++f) two_clusters[f] = mres.labels[f] == two_id;
  }

  for (std::size_t f = 0; f < flagged.size(); ++f) {
    const std::size_t i = flagged[f];
    if (!two_clusters[f]) {
      out[i] = {1.0, Provenance::ForcedOne};
    } else {
      out[i] = measure_basin(triplets[i].terminal_qs, triplets[i].params, restarts,
                             rng::derive(seed, 5, i));
    }
  }
  return out;
}

}  // namespace qlpd::clustering

#endif  // QLPD_CLUSTERING_HPP
