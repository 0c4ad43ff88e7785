#pragma once

#include <random>
#include <string>

#include "mirnav/nnet/param_store.hpp"

namespace mirnav::nnet {

inline constexpr double kLeakySlope = 0.1;

enum class Activation { kLinear, kLeakyRelu };

struct DenseSpec {
  std::string name;
  int in = 0;
  int out = 0;
  Activation act = Activation::kLeakyRelu;
  bool spectral = false;
  double init_gain = 1.0;
};

// Handles into a ParamStore for one affine layer.
struct Dense {
  DenseSpec spec;
  int w = -1;
  int b = -1;
  int u = -1;  // spectral-norm left vector (out)
  int v = -1;  // spectral-norm right vector (in)

  template <class S>
  static Dense create(ParamStore<S>& store, const DenseSpec& spec) {
    Dense d;
    d.spec = spec;
    d.w = store.add(spec.name + ".w", spec.out, spec.in);
    d.b = store.add(spec.name + ".b", spec.out, 1);
    if (spec.spectral) {
      d.u = store.add(spec.name + ".sn_u", spec.out, 1, false);
      d.v = store.add(spec.name + ".sn_v", spec.in, 1, false);
    }
    return d;
  }
};

// sigma = u^T W v for the persisted vectors; one call = `iterations` rounds
// of v <- W^T u / |.|, u <- W v / |.|.
template <class S>
S power_iterate(const Mat<S>& w, Mat<S>& u, Mat<S>& v, int iterations) {
  for (int i = 0; i < iterations; ++i) {
    Vec<S> nv = w.transpose() * u.col(0);
    S nvn = nv.norm();
    if (nvn > S(0)) v.col(0) = nv / nvn;
    Vec<S> nu = w * v.col(0);
    S nun = nu.norm();
    if (nun > S(0)) u.col(0) = nu / nun;
  }
  return (u.col(0).transpose() * w * v.col(0))(0, 0);
}

inline constexpr double kSigmaFloor = 1e-8;

// Runs power iteration on the stored vectors and returns the effective weight
// W / sigma (W itself when sigma is below the degenerate-matrix floor).
template <class S>
Mat<S> spectral_normalize(ParamStore<S>& store, const Dense& layer, int iterations = 1) {
  require(layer.spec.spectral, "spectral_normalize on a non-spectral layer");
  const auto& w = store[layer.w].value;
  const S sigma = power_iterate(w, store[layer.u].value, store[layer.v].value, iterations);
  if (std::abs(sigma) < S(kSigmaFloor)) return w;
  return w / sigma;
}

template <class S, class Rng>
void init_dense(ParamStore<S>& store, const Dense& d, Rng& rng, int sn_warmup = 5) {
  orthogonal_init(store[d.w].value, rng, d.spec.init_gain);
  store[d.b].value.setZero();
  if (d.spec.spectral) {
    std::normal_distribution<double> n01(0.0, 1.0);
    auto& u = store[d.u].value;
    for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, 0) = static_cast<S>(n01(rng));
    u /= u.norm();
    store[d.v].value.setZero();
    power_iterate(store[d.w].value, u, store[d.v].value, sn_warmup);
  }
}

// Effective weights of a layer for one parameter snapshot.
template <class S>
struct PreparedDense {
  const Dense* layer = nullptr;
  Mat<S> weight;
  Vec<S> bias;
  S sigma = S(1);
  bool normalized = false;

  PreparedDense() = default;
  PreparedDense(const ParamStore<S>& store, const Dense& d) : layer(&d) {
    const auto& w = store[d.w].value;
    bias = store[d.b].value.col(0);
    if (d.spec.spectral) {
      sigma = (store[d.u].value.col(0).transpose() * w * store[d.v].value.col(0))(0, 0);
      normalized = std::abs(sigma) >= S(kSigmaFloor);
    }
    weight = normalized ? Mat<S>(w / sigma) : w;
  }
};

template <class S>
struct DenseCache {
  Vec<S> input;
  Vec<S> pre;
};

template <class S>
inline S leaky(S x) {
  return x > S(0) ? x : S(kLeakySlope) * x;
}

template <class S>
Vec<S> dense_forward(const PreparedDense<S>& p, const Vec<S>& x, DenseCache<S>* cache = nullptr) {
  require(x.size() == p.weight.cols(), "dense_forward: input dimension mismatch for " + p.layer->spec.name);
  Vec<S> z = p.bias;
  z.noalias() += p.weight * x;
  Vec<S> out = z;
  if (p.layer->spec.act == Activation::kLeakyRelu) out = z.unaryExpr([](S t) { return leaky(t); });
  if (cache) {
    cache->input = x;
    cache->pre = std::move(z);
  }
  return out;
}

// Accumulates dL/dW_eff and dL/db into `grads`; returns dL/dx.
template <class S>
Vec<S> dense_backward(const PreparedDense<S>& p, const DenseCache<S>& c, const Vec<S>& d_out, GradientSet<S>& grads) {
  Vec<S> dz = d_out;
  if (p.layer->spec.act == Activation::kLeakyRelu)
    for (Eigen::Index i = 0; i < dz.size(); ++i)
      if (c.pre[i] <= S(0)) dz[i] *= S(kLeakySlope);
  grads[p.layer->w].noalias() += dz * c.input.transpose();
  grads[p.layer->b].col(0) += dz;
  return p.weight.transpose() * dz;
}

// Maps accumulated gradients w.r.t. W_eff = W / (u^T W v) onto the raw W.
template <class S>
void finalize_spectral_grad(const ParamStore<S>& store, const PreparedDense<S>& p, GradientSet<S>& grads) {
  if (!p.normalized) return;
  auto& g = grads[p.layer->w];
  const S inner = (g.array() * p.weight.array()).sum();
  g = (g - inner * store[p.layer->u].value.col(0) * store[p.layer->v].value.col(0).transpose()) / p.sigma;
}

}  // namespace mirnav::nnet
