#pragma once

#include <algorithm>
#include <cmath>

#include "mirnav/nnet/param_store.hpp"

namespace mirnav::nnet {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Diagonal Gaussian over the latent space.
template <class S>
struct GaussianParams {
  Vec<S> mean;
  Vec<S> logvar;  // clamped to [kLogVarMin, kLogVarMax]

  Eigen::Index dim() const { return mean.size(); }
  static GaussianParams standard(Eigen::Index d) { return {Vec<S>::Zero(d), Vec<S>::Zero(d)}; }
};

template <class S>
Vec<S> clamp_logvar(const Vec<S>& raw) {
  return raw.unaryExpr([](S x) { return std::clamp(x, S(kLogVarMin), S(kLogVarMax)); });
}

// Zeroes the gradient where the raw head output was clamped.
template <class S>
Vec<S> clamp_logvar_backward(const Vec<S>& raw, const Vec<S>& d_logvar) {
  Vec<S> g = d_logvar;
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    if (raw[i] < S(kLogVarMin) || raw[i] > S(kLogVarMax)) g[i] = S(0);
  return g;
}

// z = mean + exp(logvar / 2) * noise
template <class S>
Vec<S> gaussian_sample(const GaussianParams<S>& g, const Vec<S>& noise) {
  require(noise.size() == g.dim(), "gaussian_sample: noise dimension mismatch");
  return g.mean + ((S(0.5) * g.logvar.array()).exp() * noise.array()).matrix();
}

template <class S>
struct GaussianGrad {
  Vec<S> d_mean;
  Vec<S> d_logvar;
};

template <class S>
GaussianGrad<S> gaussian_sample_backward(const GaussianParams<S>& g, const Vec<S>& noise, const Vec<S>& d_z) {
  GaussianGrad<S> out;
  out.d_mean = d_z;
  out.d_logvar = (d_z.array() * noise.array() * S(0.5) * (S(0.5) * g.logvar.array()).exp()).matrix();
  return out;
}

// KL(q || p) for diagonal Gaussians, summed over dimensions.
template <class S>
S gaussian_kl(const GaussianParams<S>& q, const GaussianParams<S>& p) {
  require(q.dim() == p.dim(), "gaussian_kl: dimension mismatch");
  // Per dimension: (r - 1 - log r) + diff^2 / vp with r = vq / vp. Written via
  // expm1 each term is >= 0 in floating point too.
  const Vec<S> d = q.logvar - p.logvar;
  const auto vp = p.logvar.array().exp();
  const auto diff = (q.mean - p.mean).array();
  return S(0.5) * (d.array().unaryExpr([](S x) { return std::expm1(x) - x; }) + diff.square() / vp).sum();
}

template <class S>
struct KlGrad {
  GaussianGrad<S> q;
  GaussianGrad<S> p;
};

template <class S>
KlGrad<S> gaussian_kl_backward(const GaussianParams<S>& q, const GaussianParams<S>& p, S scale = S(1)) {
  const Vec<S> vq = q.logvar.array().exp().matrix();
  const Vec<S> vp = p.logvar.array().exp().matrix();
  const Vec<S> diff = q.mean - p.mean;
  KlGrad<S> g;
  g.q.d_mean = scale * (diff.array() / vp.array()).matrix();
  g.p.d_mean = -g.q.d_mean;
  g.q.d_logvar = scale * (S(0.5) * (vq.array() / vp.array() - S(1))).matrix();
  g.p.d_logvar = scale * (S(0.5) * (S(1) - (vq.array() + diff.array().square()) / vp.array())).matrix();
  return g;
}

}  // namespace mirnav::nnet
