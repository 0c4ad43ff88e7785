#pragma once

#include <random>
#include <string>
#include <vector>

#include "mirnav/evalkit/tasks.hpp"
#include "mirnav/navmodel/model.hpp"
#include "mirnav/nnet/grad_check.hpp"

namespace mirnav::cli {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  int probes = 200;
  int samples = 2;
  nav::ModelConfig model;
  bool inject_fault = false;  // perturb the analytic gradient; every group should then fail
  double tolerance = 1e-4;
};

struct GroupCheck {
  std::string group;
  int arrays = 0;
  Eigen::Index coords = 0;
  int probes = 0;
  int skipped = 0;
  double max_rel_error = 0;
  bool pass = false;
};

using Wide = long double;

// Samples built from real rendered observations along a random walk in a
// generated scene.
inline std::vector<nav::TrainSample<Wide>> gradcheck_samples(const nav::ModelConfig& cfg, int count,
                                                             std::uint64_t seed) {
  auto bundle = std::make_shared<const world::SceneBundle>(
      world::generate_scene(seed, {11, 11, 0.1, cfg.classes, std::min(4, cfg.classes)}, 0));
  world::EpisodeConfig ecfg;
  ecfg.render.classes = cfg.classes;
  require(ecfg.render.view_dim() == cfg.view_dim, "gradcheck: model view_dim does not match the renderer");
  eval::TaskSampler sampler({bundle}, {1, {}}, ecfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> ret(1.0, 2.0);
  std::vector<nav::TrainSample<Wide>> out;
  while (static_cast<int>(out.size()) < count) {
    const auto task = sampler.sample(rng);
    world::Episode ep(task, ecfg);
    int prev = -1;
    while (!ep.done() && static_cast<int>(out.size()) < count) {
      nav::TrainSample<Wide> s;
      s.input = nav::make_input<Wide>(ep.observation(), task.target, prev, cfg);
      const auto tuple = ep.expert_tuple();
      s.expert_action = world::index_of(tuple.action);
      s.next_front = nav::to_vec<Wide>(tuple.next_observation.front().data);
      s.ret = static_cast<Wide>(ret(rng));
      s.noise = nav::draw_noise<Wide>(rng, cfg.latent_dim);
      const int a = static_cast<int>(rng() % (world::kNumActions - 1));  // never stop
      s.taken_action = a;
      out.push_back(std::move(s));
      ep.step(world::action_from_index(a));
      prev = a;
    }
  }
  return out;
}

// Full navigation loss over a few samples, every parameter group probed.
inline std::vector<GroupCheck> run_gradcheck(const GradcheckOptions& o) {
  require(o.model.variant != nav::Variant::kRandom, "gradcheck: the random variant has no parameters");
  const nav::NavModel model(o.model);
  auto params = model.init_params<Wide>(o.seed);
  // Non-zero biases so bias gradients are not trivially tied to the init.
  std::mt19937_64 rng(o.seed + 1);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (int i = 0; i < params.size(); ++i)
    if (params[i].name.ends_with(".b"))
      for (Eigen::Index k = 0; k < params[i].value.size(); ++k) params[i].value(k, 0) = static_cast<Wide>(nd(rng));

  const auto samples = gradcheck_samples(o.model, o.samples, o.seed);
  const Wide w = Wide(1) / static_cast<Wide>(samples.size());
  std::vector<nav::StepTargets<Wide>> targets;
  nnet::GradientSet<Wide> grads(params);
  {
    nav::BoundModel<Wide> b(model, params);
    for (const auto& s : samples) targets.push_back(b.prepare(s));
    for (std::size_t i = 0; i < samples.size(); ++i) b.loss(samples[i], targets[i], &grads, w);
    b.finalize(grads);
  }
  if (o.inject_fault) grads.scale(Wide(1.001));

  auto eval = [&](const nnet::ParamStore<Wide>& p) {
    nav::BoundModel<Wide> b(model, p);
    nnet::Evaluation<Wide> out{0, 0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::uint64_t r = 0;
      out.value += w * b.loss(samples[i], targets[i], nullptr, Wide(1), &r).total;
      out.regime = out.regime * 31 + r;
    }
    return out;
  };

  std::vector<GroupCheck> rows;
  for (const auto& [name, arrays] : model.groups()) {
    GroupCheck g;
    g.group = name;
    g.arrays = static_cast<int>(arrays.size());
    for (int a : arrays) g.coords += params[a].size();
    const auto r = nnet::grad_check_regions<Wide>(eval, params, grads, arrays, o.probes, o.seed + 11);
    g.probes = r.probes;
    g.skipped = r.skipped;
    g.max_rel_error = r.max_rel_error;
    g.pass = r.probes >= std::min<Eigen::Index>(o.probes, g.coords) && r.max_rel_error < o.tolerance;
    rows.push_back(g);
  }
  return rows;
}

}  // namespace mirnav::cli
