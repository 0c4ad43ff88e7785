#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "mirnav/world/nav_graph.hpp"

namespace mirnav::eval {

inline constexpr double kLogFloor = 1e-12;

// Tabular p(x' | x, a) with a uniform action prior over `actions`.
struct TabularDynamics {
  int states = 0;
  int next_states = 0;
  int actions = world::kNumActions;
  std::vector<double> p;  // [x][a][x']

  TabularDynamics() = default;
  TabularDynamics(int s, int ns, int a = world::kNumActions)
      : states(s), next_states(ns), actions(a), p(static_cast<std::size_t>(s * a * ns), 0.0) {}

  double& at(int x, int a, int x2) { return p[idx(x, a, x2)]; }
  double at(int x, int a, int x2) const { return p[idx(x, a, x2)]; }

  void validate(double tol = 1e-9) const {
    require(states > 0 && next_states > 0 && actions > 0, "tabular dynamics: empty");
    require(p.size() == static_cast<std::size_t>(states * actions * next_states), "tabular dynamics: bad size");
    for (int x = 0; x < states; ++x)
      for (int a = 0; a < actions; ++a) {
        double s = 0;
        for (int x2 = 0; x2 < next_states; ++x2) {
          require(at(x, a, x2) >= 0.0, "tabular dynamics: negative probability");
          s += at(x, a, x2);
        }
        require(std::abs(s - 1.0) <= tol, "tabular dynamics: row not normalised");
      }
  }

 private:
  std::size_t idx(int x, int a, int x2) const { return static_cast<std::size_t>((x * actions + a) * next_states + x2); }
};

// Action classifier q(a | x, x').
struct ActionClassifier {
  int states = 0;
  int next_states = 0;
  int actions = world::kNumActions;
  std::vector<double> q;  // [x][x'][a]

  ActionClassifier() = default;
  ActionClassifier(int s, int ns, int a)
      : states(s), next_states(ns), actions(a), q(static_cast<std::size_t>(s * ns * a), 0.0) {}

  double& at(int x, int x2, int a) { return q[idx(x, x2, a)]; }
  double at(int x, int x2, int a) const { return q[idx(x, x2, a)]; }

 private:
  std::size_t idx(int x, int x2, int a) const { return static_cast<std::size_t>((x * next_states + x2) * actions + a); }
};

// I(a; x' | x) in bits, a uniform, averaged uniformly over x.
inline double mi_exact(const TabularDynamics& d) {
  d.validate();
  const double pa = 1.0 / d.actions;
  double total = 0;
  for (int x = 0; x < d.states; ++x) {
    std::vector<double> marg(static_cast<std::size_t>(d.next_states), 0.0);
    for (int a = 0; a < d.actions; ++a)
      for (int x2 = 0; x2 < d.next_states; ++x2) marg[static_cast<std::size_t>(x2)] += d.at(x, a, x2);
    // Sum first, divide once: identical rows give a ratio of exactly 1.
    for (auto& m : marg) m /= d.actions;
    double ix = 0;
    for (int a = 0; a < d.actions; ++a)
      for (int x2 = 0; x2 < d.next_states; ++x2) {
        const double pj = d.at(x, a, x2);
        if (pj > 0) ix += pa * pj * std::log2(pj / marg[static_cast<std::size_t>(x2)]);
      }
    total += ix;
  }
  return total / d.states;
}

// Posterior over actions given (x, x'); uniform where x' is unreachable from x.
inline ActionClassifier bayes_classifier(const TabularDynamics& d) {
  ActionClassifier c(d.states, d.next_states, d.actions);
  for (int x = 0; x < d.states; ++x)
    for (int x2 = 0; x2 < d.next_states; ++x2) {
      double s = 0;
      for (int a = 0; a < d.actions; ++a) s += d.at(x, a, x2);
      for (int a = 0; a < d.actions; ++a) c.at(x, x2, a) = s > 0 ? d.at(x, a, x2) / s : 1.0 / d.actions;
    }
  return c;
}

inline ActionClassifier uniform_classifier(const TabularDynamics& d) {
  ActionClassifier c(d.states, d.next_states, d.actions);
  for (auto& v : c.q) v = 1.0 / d.actions;
  return c;
}

// Count-based classifier from `samples` draws of (x, a, x') with add-`smoothing`.
inline ActionClassifier fit_classifier(const TabularDynamics& d, int samples, std::uint64_t seed,
                                       double smoothing = 0.5) {
  ActionClassifier c(d.states, d.next_states, d.actions);
  for (auto& v : c.q) v = smoothing;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ux(0, d.states - 1), ua(0, d.actions - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    const int x = ux(rng), a = ua(rng);
    double r = u01(rng), acc = 0;
    int x2 = d.next_states - 1;
    for (int k = 0; k < d.next_states; ++k) {
      acc += d.at(x, a, k);
      if (r < acc) {
        x2 = k;
        break;
      }
    }
    c.at(x, x2, a) += 1.0;
  }
  for (int x = 0; x < d.states; ++x)
    for (int x2 = 0; x2 < d.next_states; ++x2) {
      double s = 0;
      for (int a = 0; a < d.actions; ++a) s += c.at(x, x2, a);
      for (int a = 0; a < d.actions; ++a) c.at(x, x2, a) /= s;
    }
  return c;
}

struct BoundResult {
  double bits = 0;
  int floored = 0;  // classifier entries raised to kLogFloor inside a log
};

// E_{x, a ~ U, x' ~ p(.|x,a)} [log2 q(a | x, x')] + log2 C, in bits.
inline BoundResult mi_bound_detailed(const TabularDynamics& d, const ActionClassifier& c) {
  d.validate();
  require(c.states == d.states && c.next_states == d.next_states && c.actions == d.actions,
          "mi_bound: classifier shape mismatch");
  for (int x = 0; x < c.states; ++x)
    for (int x2 = 0; x2 < c.next_states; ++x2) {
      double s = 0;
      for (int a = 0; a < c.actions; ++a) s += c.at(x, x2, a);
      require(std::abs(s - 1.0) <= 1e-9, "mi_bound: classifier row not normalised");
    }
  const double pa = 1.0 / d.actions;
  BoundResult r;
  double total = 0;
  for (int x = 0; x < d.states; ++x) {
    double ex = 0;
    for (int a = 0; a < d.actions; ++a)
      for (int x2 = 0; x2 < d.next_states; ++x2) {
        const double pj = d.at(x, a, x2);
        if (pj <= 0) continue;
        double q = c.at(x, x2, a);
        if (q < kLogFloor) {
          q = kLogFloor;
          ++r.floored;
        }
        ex += pa * pj * std::log2(q);
      }
    total += ex;
  }
  if (r.floored)
    std::cerr << "[mi_bound] warning: " << r.floored << " classifier probabilities floored at " << kLogFloor << "\n";
  r.bits = total / d.states + std::log2(static_cast<double>(d.actions));
  return r;
}

inline double mi_bound(const TabularDynamics& d, const ActionClassifier& c) { return mi_bound_detailed(d, c).bits; }

// ---- instances -------------------------------------------------------------

// Each action leads to its own successor.
inline TabularDynamics injective_dynamics(int states, int actions = world::kNumActions) {
  TabularDynamics d(states, states * actions, actions);
  for (int x = 0; x < states; ++x)
    for (int a = 0; a < actions; ++a) d.at(x, a, x * actions + a) = 1.0;
  return d;
}

// Every action leads to the same successor.
inline TabularDynamics constant_dynamics(int states, int actions = world::kNumActions) {
  TabularDynamics d(states, 1, actions);
  for (int x = 0; x < states; ++x)
    for (int a = 0; a < actions; ++a) d.at(x, a, 0) = 1.0;
  return d;
}

// Random rows; each row is supported on `support` random successors.
inline TabularDynamics random_dynamics(int states, int next_states, int support, std::uint64_t seed,
                                       int actions = world::kNumActions) {
  require(support >= 1 && support <= next_states, "random_dynamics: bad support");
  TabularDynamics d(states, next_states, actions);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> ex(1.0);
  std::vector<int> idx(static_cast<std::size_t>(next_states));
  for (int i = 0; i < next_states; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int x = 0; x < states; ++x)
    for (int a = 0; a < actions; ++a) {
      std::shuffle(idx.begin(), idx.end(), rng);
      double s = 0;
      std::vector<double> w(static_cast<std::size_t>(support));
      for (auto& v : w) s += (v = ex(rng));
      for (int k = 0; k < support; ++k) d.at(x, a, idx[static_cast<std::size_t>(k)]) = w[static_cast<std::size_t>(k)] / s;
    }
  return d;
}

// Pose-indexed navigation dynamics of a scene (deterministic; stop and
// blocked moves stay in place).
inline TabularDynamics graph_dynamics(const world::NavGraph& g) {
  TabularDynamics d(g.size(), g.size(), world::kNumActions);
  for (int n = 0; n < g.size(); ++n)
    for (const auto a : world::kAllActions) d.at(n, world::index_of(a), g.successor(n, a).value_or(n)) = 1.0;
  return d;
}

// Merges successor outcome `j` into `i` (a coarser observation of x').
inline TabularDynamics merge_outcomes(const TabularDynamics& d, int i, int j) {
  require(i != j && i >= 0 && j >= 0 && i < d.next_states && j < d.next_states, "merge_outcomes: bad indices");
  TabularDynamics m(d.states, d.next_states - 1, d.actions);
  for (int x = 0; x < d.states; ++x)
    for (int a = 0; a < d.actions; ++a)
      for (int k = 0; k < d.next_states; ++k) {
        int t = k == j ? i : k;
        if (t > j) --t;
        m.at(x, a, t) += d.at(x, a, k);
      }
  return m;
}

struct MiRow {
  int id = 0;
  std::string instance;
  double exact = 0;
  double bound = 0;
  double gap() const { return exact - bound; }
};

// Canonical instances (injective, constant, optional scene graph) followed
// by `n` random instances scored with a classifier fitted from samples.
inline std::vector<MiRow> mi_sweep(int n, std::uint64_t seed, const world::NavGraph* scene_graph = nullptr) {
  std::vector<MiRow> rows;
  auto add = [&](const std::string& name, const TabularDynamics& d, const ActionClassifier& c) {
    rows.push_back({static_cast<int>(rows.size()), name, mi_exact(d), mi_bound(d, c)});
  };
  const auto inj = injective_dynamics(5);
  add("injective", inj, bayes_classifier(inj));
  const auto con = constant_dynamics(5);
  add("constant", con, bayes_classifier(con));
  if (scene_graph) {
    const auto g = graph_dynamics(*scene_graph);
    add("scene_graph", g, bayes_classifier(g));
  }
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    const int states = 2 + static_cast<int>(rng() % 6);
    const int next = 2 + static_cast<int>(rng() % 12);
    const int support = 1 + static_cast<int>(rng() % static_cast<unsigned>(next));
    const auto d = random_dynamics(states, next, support, rng());
    add("random_" + std::to_string(i), d, fit_classifier(d, 200, rng()));
  }
  return rows;
}

}  // namespace mirnav::eval
