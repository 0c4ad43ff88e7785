#pragma once

#include <array>
#include <cmath>
#include <map>
#include <type_traits>
#include <random>
#include <string>
#include <vector>

#include "mirnav/navmodel/config.hpp"
#include "mirnav/nnet/dense.hpp"
#include "mirnav/nnet/gaussian.hpp"
#include "mirnav/nnet/losses.hpp"
#include "mirnav/world/env.hpp"

namespace mirnav::nav {

using nnet::DenseCache;
using nnet::GaussianParams;
using nnet::GradientSet;
using nnet::Mat;
using nnet::ParamStore;
using nnet::PreparedDense;
using nnet::Vec;

inline constexpr int kActions = world::kNumActions;
inline constexpr int kViews = 4;

template <class S>
Vec<S> to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).cast<S>();
}

template <class S>
Vec<S> action_onehot(int a) {
  Vec<S> v = Vec<S>::Zero(kActions);
  if (a >= 0) v[a] = S(1);
  return v;
}

template <class S>
Vec<S> concat(std::initializer_list<const Vec<S>*> parts) {
  Eigen::Index n = 0;
  for (const auto* p : parts) n += p->size();
  Vec<S> out(n);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

// Everything act() may read: current views, the target, the previous action.
template <class S>
struct StepInput {
  std::array<Vec<S>, kViews> views;  // front, left, back, right
  Vec<S> target;                     // target view, or class one-hot in class mode
  Vec<S> prev_action;                // one-hot; zero vector at t = 0
};

// One supervised training step. Expert fields are empty for plain_rl.
template <class S>
struct TrainSample {
  StepInput<S> input;
  int taken_action = -1;
  int expert_action = -1;
  Vec<S> next_front;  // front view after the expert action
  S ret = S(0);       // discounted return R_t
  Vec<S> noise;       // latent noise, d_z
};

// Stop-gradient quantities evaluated with the same parameters before the
// differentiated pass.
template <class S>
struct StepTargets {
  Vec<S> next_state;  // f(next_front)
  S baseline = S(0);  // v(x_t) for the actor-critic advantage
};

template <class T>
struct BasicLossBreakdown {
  T e1 = 0;       // predictive control (cross-entropy vs expert action)
  T e2 = 0;       // reconstruction of the next encoded state
  T e3 = 0;       // KL(q || p)
  T lv = 0;       // (R - v)^2
  T pg = 0;       // -A log pi(a), plain_rl only
  T entropy = 0;  // policy entropy (bonus subtracted from total in plain_rl)
  T total = 0;
  T alpha = 0, beta = 0, gamma = 0, omega = 0, entropy_coef = 0;

  T weighted_total() const { return alpha * e1 + beta * e2 + gamma * e3 + omega * lv + pg - entropy_coef * entropy; }
  bool finite() const {
    for (T x : {e1, e2, e3, lv, pg, entropy, total})
      if (!std::isfinite(x)) return false;
    return true;
  }
};

using LossBreakdown = BasicLossBreakdown<double>;

// Accumulation type for losses: at least double.
template <class S>
using LossScalar = std::conditional_t<(sizeof(S) > sizeof(double)), S, double>;

inline LossBreakdown mean_of(const std::vector<LossBreakdown>& parts) {
  LossBreakdown m;
  if (parts.empty()) return m;
  m.alpha = parts[0].alpha;
  m.beta = parts[0].beta;
  m.gamma = parts[0].gamma;
  m.omega = parts[0].omega;
  m.entropy_coef = parts[0].entropy_coef;
  const double n = static_cast<double>(parts.size());
  for (const auto& p : parts) {
    m.e1 += p.e1 / n;
    m.e2 += p.e2 / n;
    m.e3 += p.e3 / n;
    m.lv += p.lv / n;
    m.pg += p.pg / n;
    m.entropy += p.entropy / n;
  }
  m.total = m.weighted_total();
  return m;
}

template <class S>
struct PolicyOutput {
  Vec<S> logits;
  Vec<S> penultimate;
};

// Test-time forward result.
template <class S>
struct Forward {
  Vec<S> logits;
  S value = S(0);
  Vec<S> next_state;
};

// Architecture description: layer handles into a parameter layout plus
// parameter groups. Holds no parameter values.
class NavModel {
 public:
  struct Ids {
    int enc1 = -1, enc2 = -1, goal = -1, fuse = -1;
    int post_h = -1, post_mu = -1, post_lv = -1;
    int prior_h = -1, prior_mu = -1, prior_lv = -1;
    int dec_h = -1, dec_out = -1;
    int ctx_h = -1, ctx_out = -1;
    int act = -1, pol_h = -1, pol_pen = -1, pol_logits = -1;
    int val_h = -1, val_out = -1;
  };

  explicit NavModel(ModelConfig cfg) : cfg_(cfg) {
    if (cfg_.variant == Variant::kRandom) return;
    const int ds = cfg_.state_dim, dz = cfg_.latent_dim, h = cfg_.hidden;
    using nnet::Activation;
    const auto lr = Activation::kLeakyRelu;
    const auto lin = Activation::kLinear;
    const bool sn = cfg_.spectral_norm;

    ids_.enc1 = add("encoder", {"enc1", cfg_.view_dim, h, lr, sn, 1.0});
    ids_.enc2 = add("encoder", {"enc2", h, ds, lr, sn, 1.0});
    if (cfg_.target_mode == TargetMode::kClass) ids_.goal = add("goal_embed", {"goal", cfg_.classes, ds, lr, false, 1.0});
    ids_.fuse = add("fusion", {"fuse", 2 * ds, ds, lr, false, 1.0});

    if (is_generative(cfg_.variant)) {
      ids_.post_h = add("posterior", {"post_h", cfg_.posterior_views() * ds, h, lr, false, 1.0});
      ids_.post_mu = add("posterior", {"post_mu", h, dz, lin, false, 1.0});
      ids_.post_lv = add("posterior", {"post_lv", h, dz, lin, false, 0.01});
      if (has_prior_net(cfg_.variant)) {
        ids_.prior_h = add("prior", {"prior_h", ds + kActions, h, lr, false, 1.0});
        ids_.prior_mu = add("prior", {"prior_mu", h, dz, lin, false, 1.0});
        ids_.prior_lv = add("prior", {"prior_lv", h, dz, lin, false, 0.01});
      }
      ids_.dec_h = add("decoder", {"dec_h", dz, h, lr, false, 1.0});
      ids_.dec_out = add("decoder", {"dec_out", h, ds, lin, false, 1.0});
    } else {
      ids_.ctx_h = add("context", {"ctx_h", kViews * ds, h, lr, false, 1.0});
      ids_.ctx_out = add("context", {"ctx_out", h, ds, lin, false, 1.0});
    }

    ids_.act = add("action_embed", {"act", kActions, ds, lr, false, 1.0});
    ids_.pol_h = add("policy", {"pol_h", 3 * ds, h, lr, false, 1.0});
    ids_.pol_pen = add("policy", {"pol_pen", h, ds, lr, false, 1.0});
    ids_.pol_logits = add("policy", {"pol_logits", ds, kActions, lin, false, 0.01});
    ids_.val_h = add("value", {"val_h", ds, cfg_.value_hidden, lr, false, 1.0});
    ids_.val_out = add("value", {"val_out", cfg_.value_hidden, 1, lin, false, 1.0});
  }

  const ModelConfig& config() const { return cfg_; }
  const Ids& ids() const { return ids_; }
  const std::vector<nnet::Dense>& layers() const { return layers_; }
  const nnet::Dense& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }

  std::vector<nnet::Dense> spectral_layers() const {
    std::vector<nnet::Dense> out;
    for (const auto& d : layers_)
      if (d.spec.spectral) out.push_back(d);
    return out;
  }

  // Trainable array indices per named group.
  const std::map<std::string, std::vector<int>>& groups() const { return groups_; }

  template <class S>
  ParamStore<S> layout() const {
    ParamStore<S> p;
    for (const auto& d : layers_) {
      auto made = nnet::Dense::create(p, d.spec);
      require(made.w == d.w && made.b == d.b && made.u == d.u && made.v == d.v, "layout mismatch");
    }
    return p;
  }

  template <class S>
  ParamStore<S> init_params(std::uint64_t seed) const {
    ParamStore<S> p = layout<S>();
    std::mt19937_64 rng(seed);
    for (const auto& d : layers_) nnet::init_dense(p, d, rng);
    return p;
  }

  Eigen::Index trainable_count() const { return layout<double>().trainable_count(); }

 private:
  int add(const std::string& group, nnet::DenseSpec spec) {
    nnet::Dense d;
    d.spec = spec;
    d.w = next_++;
    d.b = next_++;
    groups_[group].push_back(d.w);
    groups_[group].push_back(d.b);
    if (spec.spectral) {
      d.u = next_++;
      d.v = next_++;
    }
    layers_.push_back(d);
    return static_cast<int>(layers_.size()) - 1;
  }

  ModelConfig cfg_;
  Ids ids_;
  std::vector<nnet::Dense> layers_;
  std::map<std::string, std::vector<int>> groups_;
  int next_ = 0;
};

// A model bound to one parameter snapshot (effective spectral-normalised
// weights precomputed). Evaluation is pure.
template <class S>
class BoundModel {
 public:
  BoundModel(const NavModel& model, const ParamStore<S>& params) : m_(&model), params_(&params) {
    require(params.size() == model.layout<S>().size(), "parameter layout does not match model");
    prep_.reserve(model.layers().size());
    for (const auto& d : model.layers()) prep_.emplace_back(params, d);
  }

  const NavModel& model() const { return *m_; }
  const ModelConfig& config() const { return m_->config(); }

  Vec<S> encode(const Vec<S>& view) const { return encode_t(view, nullptr); }

  // f(g) in view mode, embedding of the class one-hot in class mode.
  Vec<S> target_state(const Vec<S>& target) const { return target_t(target, nullptr); }

  std::array<Vec<S>, kViews> encode_views(const std::array<Vec<S>, kViews>& views) const {
    std::array<Vec<S>, kViews> s;
    for (int i = 0; i < kViews; ++i) s[i] = encode(views[i]);
    return s;
  }

  GaussianParams<S> posterior(const std::array<Vec<S>, kViews>& states, const Vec<S>& goal_state) const {
    std::array<Vec<S>, kViews> fused;
    for (int i = 0; i < n_post(); ++i) fused[i] = run(ids().fuse, concat<S>({&states[i], &goal_state}));
    return gauss_t(ids().post_h, ids().post_mu, ids().post_lv, pooled(fused, n_post()), nullptr);
  }

  GaussianParams<S> prior(const Vec<S>& front_state, int action) const {
    require(action >= 0 && action < kActions, "prior: action out of range");
    if (!has_prior_net(config().variant)) return GaussianParams<S>::standard(config().latent_dim);
    const Vec<S> a = action_onehot<S>(action);
    return gauss_t(ids().prior_h, ids().prior_mu, ids().prior_lv, concat<S>({&front_state, &a}), nullptr);
  }

  Vec<S> decode(const Vec<S>& z) const {
    require(z.size() == config().latent_dim, "decode: latent dimension mismatch");
    return mlp2(ids().dec_h, ids().dec_out, z, nullptr);
  }

  Vec<S> context(const std::array<Vec<S>, kViews>& states, const Vec<S>& goal_state) const {
    std::array<Vec<S>, kViews> fused;
    for (int i = 0; i < kViews; ++i) fused[i] = run(ids().fuse, concat<S>({&states[i], &goal_state}));
    return mlp2(ids().ctx_h, ids().ctx_out, pooled(fused, kViews), nullptr);
  }

  PolicyOutput<S> policy(const Vec<S>& front_state, const Vec<S>& next_state, const Vec<S>& prev_action) const {
    return policy_t(front_state, next_state, prev_action, nullptr);
  }

  S value(const Vec<S>& penultimate) const { return mlp2(ids().val_h, ids().val_out, penultimate, nullptr)[0]; }

  // Test-time path: views, target and previous action only.
  Forward<S> forward(const StepInput<S>& in, const Vec<S>& noise, bool latent_mean = false) const {
    const auto states = encode_views(in.views);
    const Vec<S> g = target_state(in.target);
    Forward<S> out;
    if (is_generative(config().variant)) {
      const auto q = posterior(states, g);
      out.next_state = decode(latent_mean ? q.mean : nnet::gaussian_sample(q, noise));
    } else {
      out.next_state = context(states, g);
    }
    auto pol = policy(states[0], out.next_state, in.prev_action);
    out.logits = std::move(pol.logits);
    out.value = value(pol.penultimate);
    return out;
  }

  StepTargets<S> prepare(const TrainSample<S>& s) const {
    StepTargets<S> t;
    if (uses_reconstruction(config().variant)) {
      require(s.next_front.size() == config().view_dim, "training sample lacks the expert next view");
      t.next_state = encode(s.next_front);
    }
    if (config().variant == Variant::kPlainRl) t.baseline = forward(s.input, s.noise).value;
    return t;
  }

  // Loss for one step. When `grads` is given, accumulates grad_scale * dL/dθ
  // (w.r.t. effective weights; call finalize() once per batch).
  BasicLossBreakdown<LossScalar<S>> loss(const TrainSample<S>& s, const StepTargets<S>& tg, GradientSet<S>* grads = nullptr,
                     S grad_scale = S(1), std::uint64_t* regime = nullptr) const {
    const auto& c = config();
    const Variant v = c.variant;
    require(v != Variant::kRandom, "random variant has no loss");
    if (uses_expert(v)) require(s.expert_action >= 0 && s.expert_action < kActions, "training sample lacks expert action");
    if (v == Variant::kPlainRl) require(s.taken_action >= 0 && s.taken_action < kActions, "training sample lacks action");
    if (is_generative(v)) require(s.noise.size() == c.latent_dim, "training sample lacks latent noise");

    using T = LossScalar<S>;
    BasicLossBreakdown<T> lb;
    lb.alpha = c.alpha;
    lb.beta = c.beta;
    lb.gamma = c.gamma;
    lb.omega = c.effective_omega();
    lb.entropy_coef = v == Variant::kPlainRl ? c.entropy_coef : 0.0;
    if (v == Variant::kPlainRl) lb.alpha = lb.beta = lb.gamma = 0.0;
    if (!uses_reconstruction(v)) lb.beta = 0.0;
    if (!is_generative(v)) lb.gamma = 0.0;

    const bool bw = grads != nullptr;
    const bool rec = bw || regime != nullptr;

    // forward
    std::array<EncTape, kViews> te;
    std::array<Vec<S>, kViews> f;
    for (int i = 0; i < kViews; ++i) f[i] = encode_t(s.input.views[i], rec ? &te[i] : nullptr);
    TargetTape tt;
    const Vec<S> fg = target_t(s.input.target, rec ? &tt : nullptr);

    const int nf = is_generative(v) ? n_post() : kViews;
    std::array<DenseCache<S>, kViews> tf;
    std::array<Vec<S>, kViews> fused;
    for (int i = 0; i < nf; ++i) fused[i] = run(ids().fuse, concat<S>({&f[i], &fg}), rec ? &tf[i] : nullptr);
    const Vec<S> pool = pooled(fused, nf);

    GaussTape tq, tp;
    Mlp2Tape tdec_rec, tdec_pol, tctx;
    GaussianParams<S> q, p;
    Vec<S> z_rec, z_pol, s_rec, s_pol;
    bool prior_net = has_prior_net(v);
    bool separate_pol_decode = false;
    if (is_generative(v)) {
      q = gauss_t(ids().post_h, ids().post_mu, ids().post_lv, pool, rec ? &tq : nullptr);
      const Vec<S> a_gt = action_onehot<S>(s.expert_action);
      p = prior_net ? gauss_t(ids().prior_h, ids().prior_mu, ids().prior_lv, concat<S>({&f[0], &a_gt}), rec ? &tp : nullptr)
                    : GaussianParams<S>::standard(c.latent_dim);
      // Reconstruction follows the prior path when a prior network exists.
      z_rec = nnet::gaussian_sample(prior_net ? p : q, s.noise);
      s_rec = mlp2(ids().dec_h, ids().dec_out, z_rec, rec ? &tdec_rec : nullptr);
      const bool pol_from_prior = prior_net && c.policy_z_source == ZSource::kPrior;
      if (pol_from_prior || !prior_net) {
        z_pol = z_rec;
        s_pol = s_rec;
      } else {
        separate_pol_decode = true;
        z_pol = nnet::gaussian_sample(q, s.noise);
        s_pol = mlp2(ids().dec_h, ids().dec_out, z_pol, rec ? &tdec_pol : nullptr);
      }
    } else {
      s_pol = mlp2(ids().ctx_h, ids().ctx_out, pool, rec ? &tctx : nullptr);
      s_rec = s_pol;
    }

    PolicyTape tpol;
    const auto pol = policy_t(f[0], s_pol, s.input.prev_action, rec ? &tpol : nullptr);
    Mlp2Tape tval;
    const S val = mlp2(ids().val_h, ids().val_out, pol.penultimate, rec ? &tval : nullptr)[0];

    // loss terms
    Vec<S> d_logits = Vec<S>::Zero(kActions);
    Vec<S> d_srec;
    GaussianParams<S> dq{Vec<S>::Zero(c.latent_dim), Vec<S>::Zero(c.latent_dim)};
    GaussianParams<S> dp = dq;
    const S k = grad_scale;

    if (uses_expert(v)) {
      const auto ce = nnet::softmax_cross_entropy(pol.logits, s.expert_action);
      lb.e1 = static_cast<T>(ce.value);
      d_logits += k * S(lb.alpha) * ce.grad;
    }
    if (uses_reconstruction(v)) {
      require(tg.next_state.size() == c.state_dim, "missing reconstruction target");
      const auto l2 = nnet::l2_distance(s_rec, tg.next_state, c.e2_squared);
      lb.e2 = static_cast<T>(l2.value);
      d_srec = k * S(lb.beta) * l2.grad;
    }
    if (is_generative(v)) {
      lb.e3 = static_cast<T>(nnet::gaussian_kl(q, p));
      const auto kg = nnet::gaussian_kl_backward(q, p, k * S(lb.gamma));
      dq.mean += kg.q.d_mean;
      dq.logvar += kg.q.d_logvar;
      dp.mean += kg.p.d_mean;
      dp.logvar += kg.p.d_logvar;
    }
    if (v == Variant::kPlainRl) {
      const S adv = s.ret - tg.baseline;
      const auto ce = nnet::softmax_cross_entropy(pol.logits, s.taken_action);
      lb.pg = static_cast<T>(adv * ce.value);
      d_logits += k * adv * ce.grad;
      const auto ent = nnet::softmax_entropy(pol.logits);
      lb.entropy = static_cast<T>(ent.value);
      d_logits -= k * S(lb.entropy_coef) * ent.grad;
    }
    const S verr = s.ret - val;
    lb.lv = static_cast<T>(verr * verr);
    const S d_val = k * S(lb.omega) * S(-2) * verr;
    lb.total = lb.weighted_total();

    if (regime) {
      Fingerprint fp;
      for (int i = 0; i < kViews; ++i) fp.enc(*this, te[i]);
      if (c.target_mode == TargetMode::kClass)
        fp.add(*this, ids().goal, tt.emb);
      else
        fp.enc(*this, tt.enc);
      for (int i = 0; i < nf; ++i) fp.add(*this, ids().fuse, tf[i]);
      if (is_generative(v)) {
        fp.gauss(*this, ids().post_h, tq);
        if (prior_net) fp.gauss(*this, ids().prior_h, tp);
        fp.add(*this, ids().dec_h, tdec_rec.a);
        if (separate_pol_decode) fp.add(*this, ids().dec_h, tdec_pol.a);
      } else {
        fp.add(*this, ids().ctx_h, tctx.a);
      }
      fp.add(*this, ids().act, tpol.act);
      fp.add(*this, ids().pol_h, tpol.h);
      fp.add(*this, ids().pol_pen, tpol.pen);
      fp.add(*this, ids().val_h, tval.a);
      *regime = fp.h;
    }
    if (!bw) return lb;

    // backward
    GradientSet<S>& g = *grads;
    Vec<S> d_pen = back(ids().pol_logits, tpol.logits, d_logits, g);
    d_pen += mlp2_back(ids().val_h, ids().val_out, tval, Vec<S>::Constant(1, d_val), g);
    const Vec<S> d_x = back(ids().pol_h, tpol.h, back(ids().pol_pen, tpol.pen, d_pen, g), g);
    const int ds = c.state_dim;
    std::array<Vec<S>, kViews> d_f;
    for (auto& d : d_f) d = Vec<S>::Zero(ds);
    d_f[0] += d_x.head(ds);
    Vec<S> d_spol = d_x.segment(ds, ds);
    back(ids().act, tpol.act, d_x.tail(ds), g);

    Vec<S> d_pool;
    if (is_generative(v)) {
      Vec<S> d_zrec;
      if (separate_pol_decode) {
        const Vec<S> d_zpol = mlp2_back(ids().dec_h, ids().dec_out, tdec_pol, d_spol, g);
        const auto sg = nnet::gaussian_sample_backward(q, s.noise, d_zpol);
        dq.mean += sg.d_mean;
        dq.logvar += sg.d_logvar;
        d_zrec = mlp2_back(ids().dec_h, ids().dec_out, tdec_rec, d_srec, g);
      } else {
        Vec<S> d_s = d_spol;
        if (d_srec.size()) d_s += d_srec;
        d_zrec = mlp2_back(ids().dec_h, ids().dec_out, tdec_rec, d_s, g);
      }
      const auto sg = nnet::gaussian_sample_backward(prior_net ? p : q, s.noise, d_zrec);
      auto& dst = prior_net ? dp : dq;
      dst.mean += sg.d_mean;
      dst.logvar += sg.d_logvar;

      if (prior_net) {
        const Vec<S> d_in = gauss_back(ids().prior_h, ids().prior_mu, ids().prior_lv, tp, dp, g);
        d_f[0] += d_in.head(ds);
      }
      d_pool = gauss_back(ids().post_h, ids().post_mu, ids().post_lv, tq, dq, g);
    } else {
      Vec<S> d_s = d_spol;
      if (d_srec.size()) d_s += d_srec;
      d_pool = mlp2_back(ids().ctx_h, ids().ctx_out, tctx, d_s, g);
    }

    Vec<S> d_fg = Vec<S>::Zero(ds);
    for (int i = 0; i < nf; ++i) {
      const Vec<S> d_in = back(ids().fuse, tf[i], d_pool.segment(i * ds, ds), g);
      d_f[i] += d_in.head(ds);
      d_fg += d_in.tail(ds);
    }
    for (int i = 0; i < kViews; ++i) encode_back(te[i], d_f[i], g);
    target_back(tt, d_fg, g);
    return lb;
  }

  // Maps effective-weight gradients of spectral layers onto raw weights.
  void finalize(GradientSet<S>& grads) const {
    for (const auto& p : prep_) nnet::finalize_spectral_grad(*params_, p, grads);
  }

 private:
  struct EncTape {
    DenseCache<S> c1, c2;
  };
  struct TargetTape {
    EncTape enc;
    DenseCache<S> emb;
  };
  struct Mlp2Tape {
    DenseCache<S> a, b;
  };
  struct GaussTape {
    DenseCache<S> h, mu, lv;
    Vec<S> raw_lv;
    GaussianParams<S> out;
  };
  struct PolicyTape {
    DenseCache<S> act, h, pen, logits;
  };
  // FNV-1a over activation signs and logvar clamp flags.
  struct Fingerprint {
    std::uint64_t h = 1469598103934665603ull;
    void bit(bool b) { h = (h ^ static_cast<std::uint64_t>(b)) * 1099511628211ull; }
    void add(const BoundModel& m, int layer, const DenseCache<S>& c) {
      if (m.m_->layer(layer).spec.act != nnet::Activation::kLeakyRelu) return;
      for (Eigen::Index i = 0; i < c.pre.size(); ++i) bit(c.pre[i] > S(0));
    }
    void enc(const BoundModel& m, const EncTape& t) {
      add(m, m.ids().enc1, t.c1);
      add(m, m.ids().enc2, t.c2);
    }
    void gauss(const BoundModel& m, int hidden, const GaussTape& t) {
      add(m, hidden, t.h);
      for (Eigen::Index i = 0; i < t.raw_lv.size(); ++i)
        bit(t.raw_lv[i] < S(nnet::kLogVarMin) || t.raw_lv[i] > S(nnet::kLogVarMax));
    }
  };

  const NavModel::Ids& ids() const { return m_->ids(); }
  int n_post() const { return config().posterior_views(); }
  const PreparedDense<S>& L(int i) const { return prep_[static_cast<std::size_t>(i)]; }

  Vec<S> run(int i, const Vec<S>& x, DenseCache<S>* c = nullptr) const { return nnet::dense_forward(L(i), x, c); }
  Vec<S> back(int i, const DenseCache<S>& c, const Vec<S>& d, GradientSet<S>& g) const {
    return nnet::dense_backward(L(i), c, d, g);
  }

  Vec<S> pooled(const std::array<Vec<S>, kViews>& parts, int n) const {
    const int ds = config().state_dim;
    Vec<S> out(n * ds);
    for (int i = 0; i < n; ++i) out.segment(i * ds, ds) = parts[i];
    return out;
  }

  Vec<S> encode_t(const Vec<S>& view, EncTape* t) const {
    require(view.size() == config().view_dim, "encode: view dimension mismatch");
    return run(ids().enc2, run(ids().enc1, view, t ? &t->c1 : nullptr), t ? &t->c2 : nullptr);
  }
  void encode_back(const EncTape& t, const Vec<S>& d, GradientSet<S>& g) const {
    back(ids().enc1, t.c1, back(ids().enc2, t.c2, d, g), g);
  }

  Vec<S> target_t(const Vec<S>& target, TargetTape* t) const {
    if (config().target_mode == TargetMode::kClass) {
      require(target.size() == config().classes, "class target dimension mismatch");
      return run(ids().goal, target, t ? &t->emb : nullptr);
    }
    return encode_t(target, t ? &t->enc : nullptr);
  }
  void target_back(const TargetTape& t, const Vec<S>& d, GradientSet<S>& g) const {
    if (config().target_mode == TargetMode::kClass)
      back(ids().goal, t.emb, d, g);
    else
      encode_back(t.enc, d, g);
  }

  Vec<S> mlp2(int a, int b, const Vec<S>& x, Mlp2Tape* t) const {
    return run(b, run(a, x, t ? &t->a : nullptr), t ? &t->b : nullptr);
  }
  Vec<S> mlp2_back(int a, int b, const Mlp2Tape& t, const Vec<S>& d, GradientSet<S>& g) const {
    return back(a, t.a, back(b, t.b, d, g), g);
  }

  GaussianParams<S> gauss_t(int h, int mu, int lv, const Vec<S>& x, GaussTape* t) const {
    DenseCache<S>* ch = t ? &t->h : nullptr;
    const Vec<S> hid = run(h, x, ch);
    GaussianParams<S> out;
    out.mean = run(mu, hid, t ? &t->mu : nullptr);
    const Vec<S> raw = run(lv, hid, t ? &t->lv : nullptr);
    out.logvar = nnet::clamp_logvar(raw);
    if (t) t->raw_lv = raw;
    return out;
  }
  Vec<S> gauss_back(int h, int mu, int lv, const GaussTape& t, const GaussianParams<S>& d, GradientSet<S>& g) const {
    Vec<S> d_h = back(mu, t.mu, d.mean, g);
    d_h += back(lv, t.lv, nnet::clamp_logvar_backward(t.raw_lv, d.logvar), g);
    return back(h, t.h, d_h, g);
  }

  PolicyOutput<S> policy_t(const Vec<S>& front, const Vec<S>& next, const Vec<S>& prev, PolicyTape* t) const {
    require(prev.size() == kActions, "previous action must be a 7-vector");
    const Vec<S> e = run(ids().act, prev, t ? &t->act : nullptr);
    const Vec<S> x = concat<S>({&front, &next, &e});
    PolicyOutput<S> out;
    out.penultimate = run(ids().pol_pen, run(ids().pol_h, x, t ? &t->h : nullptr), t ? &t->pen : nullptr);
    out.logits = run(ids().pol_logits, out.penultimate, t ? &t->logits : nullptr);
    return out;
  }

  const NavModel* m_;
  const ParamStore<S>* params_;
  std::vector<PreparedDense<S>> prep_;
};

// ---- world glue -----------------------------------------------------------

template <class S>
StepInput<S> make_input(const world::Observation& obs, const world::Target& target, int prev_action,
                        const ModelConfig& cfg) {
  StepInput<S> in;
  for (int i = 0; i < kViews; ++i) in.views[i] = to_vec<S>(obs.views[static_cast<std::size_t>(i)].data);
  in.target = to_vec<S>(cfg.target_mode == TargetMode::kClass ? target.class_onehot : target.view.data);
  in.prev_action = action_onehot<S>(prev_action);
  return in;
}

enum class ActMode { kGreedy, kSample };

struct ControllerState {
  int prev_action = -1;  // -1 encodes the zero vector at t = 0
  std::mt19937_64 rng;
  bool latent_mean = false;  // use the posterior mean instead of a sample

  explicit ControllerState(std::uint64_t seed = 0) : rng(seed) {}
  void reset() { prev_action = -1; }
};

template <class S>
Vec<S> draw_noise(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec<S> z(dim);
  for (int i = 0; i < dim; ++i) z[i] = static_cast<S>(n01(rng));
  return z;
}

template <class S>
int sample_categorical(const Vec<S>& logits, std::mt19937_64& rng) {
  const Vec<S> p = nnet::softmax(logits);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng), acc = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += static_cast<double>(p[i]);
    if (r < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

template <class S>
int argmax(const Vec<S>& v) {
  Eigen::Index i;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

// Controller step. Reads only the observation, the target and the controller
// state.
template <class S>
world::Action act(const BoundModel<S>& m, const world::Observation& obs, const world::Target& target,
                  ControllerState& ctrl, ActMode mode) {
  const auto& cfg = m.config();
  int a;
  if (cfg.variant == Variant::kRandom) {
    a = std::uniform_int_distribution<int>(0, kActions - 1)(ctrl.rng);
  } else {
    const auto in = make_input<S>(obs, target, ctrl.prev_action, cfg);
    const Vec<S> noise = is_generative(cfg.variant) ? draw_noise<S>(ctrl.rng, cfg.latent_dim) : Vec<S>();
    const auto fw = m.forward(in, noise, ctrl.latent_mean);
    a = mode == ActMode::kGreedy ? argmax(fw.logits) : sample_categorical(fw.logits, ctrl.rng);
  }
  ctrl.prev_action = a;
  return world::action_from_index(a);
}

}  // namespace mirnav::nav
