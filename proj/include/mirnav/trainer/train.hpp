#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mirnav/evalkit/metrics.hpp"
#include "mirnav/navmodel/io.hpp"
#include "mirnav/nnet/rmsprop.hpp"
#include "mirnav/trainer/curriculum.hpp"
#include "mirnav/trainer/rollout.hpp"

namespace mirnav::train {

namespace fs = std::filesystem;

// ---- gradient step -----------------------------------------------------------

inline nav::TrainSample<double> make_sample(const RolloutStep& s, double ret) {
  nav::TrainSample<double> t;
  t.input = s.input;
  t.taken_action = s.action;
  t.expert_action = s.expert_action;
  t.next_front = s.next_front;
  t.ret = ret;
  t.noise = s.noise;
  return t;
}

// Adds the summed per-step loss gradients of one rollout to `grads`
// (finalized for this snapshot) and returns the per-step losses.
inline std::vector<nav::LossBreakdown> accumulate_rollout(const nav::BoundModel<double>& m, const Rollout& r,
                                                          const std::vector<double>& returns,
                                                          nnet::GradientSet<double>& grads) {
  require(returns.size() == r.steps.size(), "accumulate_rollout: one return per step");
  std::vector<nav::LossBreakdown> out;
  out.reserve(r.steps.size());
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto sample = make_sample(r.steps[i], returns[i]);
    const auto targets = m.prepare(sample);
    out.push_back(m.loss(sample, targets, &grads));
  }
  m.finalize(grads);
  return out;
}

struct AppliedUpdate {
  bool applied = false;
  double grad_norm = 0;  // before clipping
};

// Mean over `steps`, global-norm clip, then one shared RMSprop step.
inline AppliedUpdate apply_batch(nnet::SharedParameters<double>& shared, nnet::GradientSet<double>& sum, int steps,
                                 double clip_norm) {
  require(steps >= 1, "apply_batch: empty batch");
  sum.scale(1.0 / steps);
  AppliedUpdate u;
  u.grad_norm = sum.clip_global_norm(clip_norm);
  u.applied = shared.apply(sum);
  return u;
}

// Counts consecutive rejected updates; trips once the count exceeds `limit`.
class NonFiniteGuard {
 public:
  explicit NonFiniteGuard(int limit) : limit_(limit) {}
  // Returns true when training must abort.
  bool record(bool finite) {
    consecutive_ = finite ? 0 : consecutive_ + 1;
    return consecutive_ > limit_;
  }
  int consecutive() const { return consecutive_; }

 private:
  int limit_;
  int consecutive_ = 0;
};

// ---- training loop -----------------------------------------------------------

struct TrainResult {
  long episodes = 0;
  long updates = 0;
  long skipped = 0;
  double best_sr = -1;
  double best_spl = -1;
  long best_episodes = 0;
  fs::path best_checkpoint;
  std::optional<eval::EvalReport> last_val;
};

inline constexpr std::uint64_t kValSeedSalt = 0x5eed0a11ull;

class Trainer {
 public:
  Trainer(TrainConfig cfg, eval::ScenePool train_scenes, eval::ScenePool val_scenes, fs::path run_dir,
          std::ostream* progress = nullptr)
      : cfg_(std::move(cfg)), train_(std::move(train_scenes)), val_(std::move(val_scenes)), dir_(std::move(run_dir)),
        progress_(progress), model_(cfg_.model) {
    cfg_.validate();
    if (train_.empty()) throw InfeasibleError("no training scenes");
    if (val_.empty()) throw InfeasibleError("no validation scenes");
    eval::require_disjoint_scenes(train_, val_, "train/val");
    ecfg_.max_steps = cfg_.max_steps;
    ecfg_.render.classes = cfg_.model.classes;
    if (ecfg_.render.view_dim() != cfg_.model.view_dim)
      throw ConfigError("model view_dim does not match the renderer (" + std::to_string(ecfg_.render.view_dim()) + ")");

    const auto classes = eval::ClassPartition::first_k(cfg_.model.classes, cfg_.known_classes).known;
    const eval::TaskConstraints cons{cfg_.min_geo, classes};
    const auto pool = cfg_.augment_symmetries ? with_symmetries(train_) : train_;
    for (int s = 1; s <= stage_count(cfg_.curriculum); ++s) {
      // Stages are cut on the base scenes so all symmetries of a scene share a group.
      const auto base = active_pool(train_, cfg_.curriculum, s);
      eval::ScenePool active;
      for (const auto& w : pool)
        if (std::any_of(base.begin(), base.end(), [&](const auto& b) { return b->scene.id() == w->scene.id(); }))
          active.push_back(w);
      samplers_.emplace_back(std::move(active), cons, ecfg_);
    }
    val_suite_ = eval::sample_tasks(val_, eval::Split::kVal, cfg_.val_tasks, cfg_.seed ^ kValSeedSalt, cons, ecfg_);
  }

  TrainResult run() {
    fs::create_directories(dir_ / "checkpoints");
    train_log_.open(dir_ / "train_log.jsonl", std::ios::app);
    val_log_.open(dir_ / "val_log.jsonl", std::ios::app);
    if (!train_log_ || !val_log_) throw ConfigError("cannot open logs in " + dir_.string());

    if (cfg_.model.variant == nav::Variant::kRandom) {
      params_ = model_.layout<double>();
      validate(params_, 0);
      return result_;
    }

    shared_.emplace(model_.init_params<double>(cfg_.seed), model_.spectral_layers(),
                    nnet::RmspropConfig{cfg_.lr, cfg_.smoothing, cfg_.rms_eps});
    sum_.emplace(shared_->unsafe_params());
    start_ = std::chrono::steady_clock::now();

    if (cfg_.workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < cfg_.workers; ++w) pool.emplace_back([this, w] { work(w); });
    }
    if (error_) std::rethrow_exception(error_);
    if (aborted_)
      throw NumericalAbort("training aborted: more than " + std::to_string(cfg_.nonfinite_limit) +
                           " consecutive non-finite losses (last at update " + std::to_string(result_.updates) + ")");

    nnet::ParamStore<double> final_params;
    shared_->snapshot(final_params);
    const long episodes = episodes_.load();
    if (episodes != last_val_episodes_) validate(final_params, episodes);
    nav::save_model((dir_ / "checkpoints" / "final.ck").string(), model_, final_params, meta(episodes),
                    &shared_->unsafe_state());
    result_.episodes = episodes;
    return result_;
  }

  const nav::NavModel& model() const { return model_; }
  const eval::TaskSuite& val_suite() const { return val_suite_; }

 private:
  world::NavTask next_task(std::mt19937_64& rng) const {
    const int stage = curriculum_stage(cfg_.curriculum, episodes_.load());
    return samplers_[static_cast<std::size_t>(stage - 1)].sample(rng);
  }

  bool should_stop() const {
    if (stop_.load() || episodes_.load() >= cfg_.max_episodes) return true;
    if (cfg_.max_updates > 0 && updates_.load() >= cfg_.max_updates) return true;
    if (cfg_.max_seconds > 0) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
      if (dt.count() >= cfg_.max_seconds) return true;
    }
    return false;
  }

  void work(int w) {
    try {
      EnvSlot slot(ecfg_, eval::task_seed(cfg_.seed, static_cast<std::size_t>(w)));
      const TaskSource source = [this](std::mt19937_64& rng) { return next_task(rng); };
      nnet::ParamStore<double> snap;
      nnet::GradientSet<double> local(shared_->unsafe_params());
      while (!should_stop()) {
        std::unique_lock<std::mutex> serial(serial_mu_, std::defer_lock);
        if (cfg_.serialize_workers) serial.lock();
        shared_->snapshot(snap);
        const nav::BoundModel<double> bound(model_, snap);
        const auto rollout = collect_rollout(bound, slot, source, cfg_.unroll);
        const auto returns = compute_returns(rollout, cfg_.tau);
        local.zero();
        const auto losses = accumulate_rollout(bound, rollout, returns, local);
        const long episodes = episodes_ += static_cast<long>(rollout.finished.size());
        submit(rollout, returns, losses, local, episodes);
        maybe_validate(episodes);
      }
    } catch (...) {
      std::lock_guard<std::mutex> g(acc_mu_);
      if (!error_) error_ = std::current_exception();
      stop_ = true;
    }
  }

  void submit(const Rollout& rollout, const std::vector<double>& returns, const std::vector<nav::LossBreakdown>& losses,
              const nnet::GradientSet<double>& local, long episodes) {
    std::lock_guard<std::mutex> g(acc_mu_);
    for (const auto& f : rollout.finished) {
      ++pending_episodes_;
      pending_success_ += f.success;
      pending_episode_reward_ += f.reward_sum;
    }
    bool finite = local.all_finite();
    for (const auto& l : losses) finite = finite && l.finite();
    if (!finite) {
      ++result_.skipped;
      write_line(train_log_, {{"update", result_.updates}, {"episodes", episodes}, {"skipped", true},
                              {"reason", "non-finite loss"}});
      if (guard_.record(false)) {
        aborted_ = true;
        stop_ = true;
      }
      return;
    }
    sum_->add(local);
    pending_steps_ += static_cast<int>(rollout.steps.size());
    pending_losses_.insert(pending_losses_.end(), losses.begin(), losses.end());
    pending_returns_.insert(pending_returns_.end(), returns.begin(), returns.end());
    if (!cfg_.per_worker_updates && pending_steps_ < cfg_.batch) return;

    const auto u = apply_batch(*shared_, *sum_, pending_steps_, cfg_.clip_norm);
    if (!u.applied) {
      ++result_.skipped;
      write_line(train_log_, {{"update", result_.updates}, {"episodes", episodes}, {"skipped", true},
                              {"reason", "non-finite gradient"}});
      if (guard_.record(false)) {
        aborted_ = true;
        stop_ = true;
      }
    } else {
      guard_.record(true);
      ++result_.updates;
      ++updates_;
      log_update(episodes, u);
    }
    sum_->zero();
    pending_steps_ = 0;
    pending_losses_.clear();
    pending_returns_.clear();
    pending_episodes_ = 0;
    pending_success_ = 0;
    pending_episode_reward_ = 0;
  }

  void log_update(long episodes, const AppliedUpdate& u) {
    const auto m = nav::mean_of(pending_losses_);
    const auto v = cfg_.model.variant;
    nlohmann::json rec = {{"update", result_.updates},
                          {"episodes", episodes},
                          {"stage", curriculum_stage(cfg_.curriculum, episodes)},
                          {"steps", pending_steps_}};
    if (nav::uses_expert(v)) rec["e1"] = m.e1;
    if (nav::uses_reconstruction(v)) rec["e2"] = m.e2;
    if (nav::is_generative(v)) rec["e3"] = m.e3;
    rec["lv"] = m.lv;
    if (v == nav::Variant::kPlainRl) {
      rec["pg"] = m.pg;
      rec["entropy"] = m.entropy;
    }
    rec["total"] = m.total;
    double ret = 0;
    for (double r : pending_returns_) ret += r;
    rec["mean_return"] = ret / static_cast<double>(pending_returns_.size());
    if (pending_episodes_) {
      rec["episode_reward"] = pending_episode_reward_ / pending_episodes_;
      rec["train_sr"] = 100.0 * pending_success_ / pending_episodes_;
    }
    rec["grad_norm"] = u.grad_norm;
    write_line(train_log_, rec);
  }

  void maybe_validate(long episodes) {
    const long due = episodes / cfg_.val_every;
    long seen = val_rounds_.load();
    if (due <= seen || !val_rounds_.compare_exchange_strong(seen, due)) return;
    std::lock_guard<std::mutex> g(val_mu_);
    nnet::ParamStore<double> snap;
    shared_->snapshot(snap);
    validate(snap, episodes);
  }

  nlohmann::json meta(long episodes) const {
    return {{"episodes", episodes}, {"updates", updates_.load()}, {"seed", cfg_.seed}, {"train_config", to_json(cfg_)}};
  }

  // Caller holds val_mu_ (or runs single-threaded).
  void validate(const nnet::ParamStore<double>& params, long episodes) {
    auto model = std::make_shared<const nav::NavModel>(model_);
    auto p = std::make_shared<const nnet::ParamStore<double>>(params);
    const auto trajs = eval::run_suite([&] { return std::make_unique<eval::ModelPolicy<double>>(model, p); },
                                       val_suite_.tasks, ecfg_, cfg_.seed ^ kValSeedSalt);
    const auto report = eval::compute_metrics(trajs);
    const bool best = report.sr > result_.best_sr || (report.sr == result_.best_sr && report.spl >= result_.best_spl);
    const long updates = updates_.load();
    if (best) {
      result_.best_sr = report.sr;
      result_.best_spl = report.spl;
      result_.best_episodes = episodes;
      result_.best_checkpoint = dir_ / "checkpoints" / "best.ck";
      nav::save_model(result_.best_checkpoint.string(), model_, params, meta(episodes));
    }
    ++validations_;
    if (cfg_.checkpoint_every > 0 && validations_ % cfg_.checkpoint_every == 0)
      nav::save_model((dir_ / "checkpoints" / ("ckpt_" + std::to_string(episodes) + ".ck")).string(), model_, params,
                      meta(episodes));
    write_line(val_log_, {{"episodes", episodes},
                          {"updates", updates},
                          {"n", report.n},
                          {"sr", report.sr},
                          {"spl", report.spl},
                          {"cr", report.cr},
                          {"best", best}});
    result_.last_val = report;
    last_val_episodes_ = episodes;
    if (progress_)
      *progress_ << "[train] episodes " << episodes << " updates " << updates << " val SR " << report.sr << " SPL "
                 << report.spl << (best ? " (best)" : "") << std::endl;
  }

  void write_line(std::ofstream& out, const nlohmann::json& j) {
    std::lock_guard<std::mutex> g(log_mu_);
    out << j.dump() << '\n';
    out.flush();
  }

  TrainConfig cfg_;
  eval::ScenePool train_;
  eval::ScenePool val_;
  fs::path dir_;
  std::ostream* progress_;
  nav::NavModel model_;
  world::EpisodeConfig ecfg_;
  std::vector<eval::TaskSampler> samplers_;
  eval::TaskSuite val_suite_;

  std::optional<nnet::SharedParameters<double>> shared_;
  nnet::ParamStore<double> params_;  // random variant only
  std::chrono::steady_clock::time_point start_;

  std::mutex acc_mu_, val_mu_, log_mu_, serial_mu_;
  std::optional<nnet::GradientSet<double>> sum_;
  int pending_steps_ = 0;
  std::vector<nav::LossBreakdown> pending_losses_;
  std::vector<double> pending_returns_;
  int pending_episodes_ = 0;
  int pending_success_ = 0;
  double pending_episode_reward_ = 0;
  NonFiniteGuard guard_{cfg_.nonfinite_limit};
  bool aborted_ = false;
  std::exception_ptr error_;

  std::atomic<long> episodes_{0};
  std::atomic<long> updates_{0};
  std::atomic<long> val_rounds_{0};
  std::atomic<bool> stop_{false};
  long validations_ = 0;
  long last_val_episodes_ = -1;
  std::ofstream train_log_, val_log_;
  TrainResult result_;
};

inline TrainResult train(const TrainConfig& cfg, const eval::ScenePool& train_scenes, const eval::ScenePool& val_scenes,
                         const fs::path& run_dir, std::ostream* progress = nullptr) {
  return Trainer(cfg, train_scenes, val_scenes, run_dir, progress).run();
}

}  // namespace mirnav::train
