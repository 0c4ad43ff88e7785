#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mirnav/nnet/param_store.hpp"

namespace mirnav::nnet {

struct ProbeResult {
  int array = -1;
  Eigen::Index coord = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckResult {
  double max_rel_error = 0;
  int probes = 0;
  int skipped = 0;  // probes whose +-step crossed a kink
  std::vector<ProbeResult> worst;  // the worst probe first
};

// |a - n| / max(|a|, |n|), with both values below `abs_floor` counted as agreeing.
inline double relative_error(double analytic, double numeric, double abs_floor = 1e-10) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < abs_floor) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

// A loss value plus a fingerprint of the piecewise-smooth region the
// evaluation falls in (activation signs, clamps). Central differences are only
// meaningful when both probe points share the base point's region.
template <class S>
struct Evaluation {
  S value;
  std::uint64_t regime = 0;
};

template <class S>
using EvalFn = std::function<Evaluation<S>(const ParamStore<S>&)>;

// Central differences at randomly probed coordinates of the listed arrays.
// `eval` must be deterministic in the parameters (fixed noise). Coordinates are
// sampled without replacement until `probes` have been checked; probes whose
// +-step leaves the base region are replaced by fresh coordinates.
template <class S>
GradCheckResult grad_check_regions(const EvalFn<S>& eval, ParamStore<S> params, const GradientSet<S>& analytic,
                                   const std::vector<int>& arrays, int probes, std::uint64_t seed,
                                   double step = 1e-4) {
  std::vector<std::pair<int, Eigen::Index>> coords;
  for (int a : arrays)
    for (Eigen::Index k = 0; k < params[a].size(); ++k) coords.emplace_back(a, k);
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  const std::uint64_t base = eval(params).regime;

  GradCheckResult out;
  ProbeResult worst;
  for (auto [a, k] : coords) {
    if (out.probes >= probes) break;
    S* x = params[a].value.data() + k;
    const S orig = *x;
    const S h = static_cast<S>(step);
    *x = orig + h;
    const auto up = eval(params);
    *x = orig - h;
    const auto down = eval(params);
    *x = orig;
    if (up.regime != base || down.regime != base) {
      ++out.skipped;
      continue;
    }
    const double numeric = static_cast<double>((up.value - down.value) / (S(2) * h));
    const double an = static_cast<double>(analytic[a].data()[k]);
    const double err = relative_error(an, numeric);
    ++out.probes;
    if (err >= out.max_rel_error) {
      out.max_rel_error = err;
      worst = {a, k, an, numeric, err};
    }
  }
  if (out.probes) out.worst.push_back(worst);
  return out;
}

// Smooth losses: no region tracking.
template <class S>
GradCheckResult grad_check(const std::function<S(const ParamStore<S>&)>& loss, ParamStore<S> params,
                           const GradientSet<S>& analytic, const std::vector<int>& arrays, int probes,
                           std::uint64_t seed, double step = 1e-4) {
  return grad_check_regions<S>([&](const ParamStore<S>& p) { return Evaluation<S>{loss(p), 0}; }, std::move(params),
                               analytic, arrays, probes, seed, step);
}

}  // namespace mirnav::nnet
