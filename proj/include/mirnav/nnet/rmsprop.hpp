#pragma once

#include <atomic>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <vector>

#include "mirnav/nnet/dense.hpp"

namespace mirnav::nnet {

struct RmspropConfig {
  double lr = 1e-4;
  double smoothing = 0.99;
  double eps = 1e-8;
};

// Squared-gradient running averages aligned with a ParamStore.
template <class S>
using RmspropState = GradientSet<S>;

template <class S>
void rmsprop_apply_array(Mat<S>& p, const Mat<S>& g, Mat<S>& v, const RmspropConfig& cfg) {
  const S rho = static_cast<S>(cfg.smoothing);
  v.array() = rho * v.array() + (S(1) - rho) * g.array().square();
  p.array() -= static_cast<S>(cfg.lr) * g.array() / (v.array().sqrt() + static_cast<S>(cfg.eps));
}

// v <- rho v + (1-rho) g^2; p <- p - lr g / (sqrt(v) + eps). A non-finite
// gradient rejects the whole update (returns false, nothing changes).
template <class S>
bool rmsprop_update(ParamStore<S>& params, const GradientSet<S>& grads, RmspropState<S>& state,
                    const RmspropConfig& cfg = {}) {
  require(grads.size() == params.size() && state.size() == params.size(), "rmsprop_update: misaligned arrays");
  if (!grads.all_finite()) {
    std::cerr << "[rmsprop] non-finite gradient, update rejected\n";
    return false;
  }
  for (int i = 0; i < params.size(); ++i)
    if (params[i].trainable) rmsprop_apply_array(params[i].value, grads[i], state[i], cfg);
  params.bump_version();
  return true;
}

// Shared parameter store for asynchronous workers. Readers copy a snapshot
// array by array under that array's lock; writers apply RMSprop array by
// array under the same locks, so no single array is ever observed torn.
template <class S>
class SharedParameters {
 public:
  SharedParameters(ParamStore<S> init, std::vector<Dense> spectral_layers, RmspropConfig cfg, int sn_iterations = 1)
      : params_(std::move(init)), state_(params_), spectral_(std::move(spectral_layers)), cfg_(cfg),
        sn_iterations_(sn_iterations), locks_(static_cast<std::size_t>(params_.size())) {
    version_ = params_.version();
  }

  void snapshot(ParamStore<S>& out) const {
    if (!out.same_layout(params_)) out = params_.layout_clone();
    for (int i = 0; i < params_.size(); ++i) {
      std::lock_guard<std::mutex> g(locks_[static_cast<std::size_t>(i)]);
      out[i].value = params_[i].value;
    }
    out.set_version(version_.load());
  }

  // Applies one RMSprop step and one round of spectral-norm power iteration.
  bool apply(const GradientSet<S>& grads) {
    if (!grads.all_finite()) {
      std::cerr << "[shared-params] non-finite gradient, update rejected\n";
      return false;
    }
    for (int i = 0; i < params_.size(); ++i) {
      if (!params_[i].trainable) continue;
      std::lock_guard<std::mutex> g(locks_[static_cast<std::size_t>(i)]);
      rmsprop_apply_array(params_[i].value, grads[i], state_[i], cfg_);
    }
    for (const auto& d : spectral_) {
      std::scoped_lock g(locks_[static_cast<std::size_t>(d.w)], locks_[static_cast<std::size_t>(d.u)],
                         locks_[static_cast<std::size_t>(d.v)]);
      power_iterate(params_[d.w].value, params_[d.u].value, params_[d.v].value, sn_iterations_);
    }
    params_.set_version(++version_);
    return true;
  }

  std::uint64_t version() const { return version_.load(); }

  // Exclusive access for checkpointing; callers must not race with apply().
  const ParamStore<S>& unsafe_params() const { return params_; }
  const RmspropState<S>& unsafe_state() const { return state_; }
  void unsafe_restore(const ParamStore<S>& p, const RmspropState<S>& st) {
    require(p.same_layout(params_), "restore: layout mismatch");
    params_ = p;
    state_ = st;
    version_ = p.version();
  }

 private:
  ParamStore<S> params_;
  RmspropState<S> state_;
  std::vector<Dense> spectral_;
  RmspropConfig cfg_;
  int sn_iterations_;
  mutable std::vector<std::mutex> locks_;
  std::atomic<std::uint64_t> version_{0};
};

}  // namespace mirnav::nnet
