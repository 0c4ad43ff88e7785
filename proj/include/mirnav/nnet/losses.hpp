#pragma once

#include <cmath>

#include "mirnav/nnet/param_store.hpp"

namespace mirnav::nnet {

template <class S>
Vec<S> softmax(const Vec<S>& logits) {
  const S m = logits.maxCoeff();
  Vec<S> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

template <class S>
Vec<S> log_softmax(const Vec<S>& logits) {
  const S m = logits.maxCoeff();
  const S lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

template <class S>
struct LossGrad {
  S value;
  Vec<S> grad;
};

// -log softmax(logits)[target]; gradient softmax - onehot.
template <class S>
LossGrad<S> softmax_cross_entropy(const Vec<S>& logits, int target) {
  require(target >= 0 && target < logits.size(), "softmax_cross_entropy: target out of range");
  LossGrad<S> out;
  out.value = -log_softmax(logits)[target];
  out.grad = softmax(logits);
  out.grad[target] -= S(1);
  return out;
}

// Entropy of softmax(logits) and its gradient w.r.t. the logits.
template <class S>
LossGrad<S> softmax_entropy(const Vec<S>& logits) {
  const Vec<S> p = softmax(logits);
  const Vec<S> lp = log_softmax(logits);
  LossGrad<S> out;
  out.value = -(p.array() * lp.array()).sum();
  // dH/dl_j = -p_j (log p_j + H)
  out.grad = (-(p.array() * (lp.array() + out.value))).matrix();
  return out;
}

// |a - b|_2 (or its square). The gradient is taken w.r.t. `a`; zero at a == b.
template <class S>
LossGrad<S> l2_distance(const Vec<S>& a, const Vec<S>& b, bool squared = false) {
  require(a.size() == b.size(), "l2_distance: dimension mismatch");
  const Vec<S> d = a - b;
  LossGrad<S> out;
  if (squared) {
    out.value = d.squaredNorm();
    out.grad = S(2) * d;
    return out;
  }
  out.value = d.norm();
  out.grad = out.value > S(1e-12) ? Vec<S>(d / out.value) : Vec<S>(Vec<S>::Zero(d.size()));
  return out;
}

}  // namespace mirnav::nnet
