#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mirnav/evalkit/episode.hpp"

namespace mirnav::eval {

inline constexpr int kBinWidth = 2;
inline constexpr int kBinLimit = 20;  // last bin is [kBinLimit, inf)
inline constexpr int kLongPathMoves = 5;

struct BinStats {
  int lo = 0;
  int hi = -1;  // exclusive; -1 = unbounded
  int n = 0;
  double sr = 0;
  double spl = 0;
};

struct SubsetStats {
  int n = 0;
  double sr = 0;
  double spl = 0;
};

struct EvalReport {
  int n = 0;
  double sr = 0;   // %
  double spl = 0;  // %
  double cr = 0;   // % of episodes with at least one collision
  std::vector<BinStats> bins;  // by start geodesic
  SubsetStats long_paths;      // optimal path of at least kLongPathMoves moves
};

// S_i * l_i / max(p_i, l_i)
inline double spl_term(const Trajectory& t) {
  if (!t.success) return 0.0;
  return static_cast<double>(t.optimal_length) / static_cast<double>(std::max(t.steps, t.optimal_length));
}

inline int bin_index(int geodesic) { return std::min(geodesic, kBinLimit) / kBinWidth; }

// Order-independent sum (terms sorted first) so metrics do not depend on the
// order of the trajectory list.
inline double stable_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += x;
  return s;
}

inline EvalReport compute_metrics(const std::vector<Trajectory>& trajs) {
  require(!trajs.empty(), "compute_metrics: no trajectories");
  EvalReport r;
  r.n = static_cast<int>(trajs.size());
  const int nbins = kBinLimit / kBinWidth + 1;
  for (int b = 0; b < nbins; ++b)
    r.bins.push_back({b * kBinWidth, b + 1 < nbins ? (b + 1) * kBinWidth : -1, 0, 0.0, 0.0});

  int succ = 0, coll = 0, long_succ = 0;
  std::vector<double> spl, long_spl;
  std::vector<int> bin_succ(r.bins.size(), 0);
  std::vector<std::vector<double>> bin_spl(r.bins.size());
  for (const auto& t : trajs) {
    const auto b = static_cast<std::size_t>(bin_index(t.start_geodesic));
    const double w = spl_term(t);
    succ += t.success;
    coll += t.collisions > 0;
    spl.push_back(w);
    ++r.bins[b].n;
    bin_succ[b] += t.success;
    bin_spl[b].push_back(w);
    if (t.optimal_length - 1 >= kLongPathMoves) {
      ++r.long_paths.n;
      long_succ += t.success;
      long_spl.push_back(w);
    }
  }
  const double n = static_cast<double>(r.n);
  r.sr = 100.0 * succ / n;
  r.spl = 100.0 * stable_sum(spl) / n;
  r.cr = 100.0 * coll / n;
  for (std::size_t b = 0; b < r.bins.size(); ++b)
    if (r.bins[b].n) {
      r.bins[b].sr = 100.0 * bin_succ[b] / r.bins[b].n;
      r.bins[b].spl = 100.0 * stable_sum(bin_spl[b]) / r.bins[b].n;
    }
  if (r.long_paths.n) {
    r.long_paths.sr = 100.0 * long_succ / r.long_paths.n;
    r.long_paths.spl = 100.0 * stable_sum(long_spl) / r.long_paths.n;
  }
  return r;
}

}  // namespace mirnav::eval
