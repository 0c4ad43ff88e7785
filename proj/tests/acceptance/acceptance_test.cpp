// Acceptance run: one PASS/FAIL line per criterion (1-8).
//
//   acceptance [work_dir] [criteria...]
//
// Criteria default to all. work_dir is wiped first; artifacts (scenes, runs,
// reports) stay there afterwards.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mirnav/cli/commands.hpp"
#include "test_scenes.hpp"

using namespace mirnav;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nnet::Vec;

namespace {

// ---- pinned tolerances and budgets --------------------------------------------
constexpr double kGradTol = 1e-4;
constexpr int kGradProbes = 200;
constexpr double kGradSeconds = 300;
constexpr double kMiTol = 1e-9;
constexpr int kMiInstances = 20;
constexpr double kMiSeconds = 60;
constexpr double kTelescopeTol = 1e-9;
constexpr int kTelescopeTrajectories = 1000;
constexpr int kExpertTasks = 200;
constexpr double kCompositionTol = 1e-12;
constexpr double kUniformE1Tol = 1e-9;
constexpr double kRandomSrMax = 5.0;
constexpr double kTrainSrMin = 50.0;
constexpr double kRandomMultiple = 10.0;
constexpr double kTrainMinutes = 60;
constexpr int kSuiteTasks = 100;
constexpr std::uint64_t kSuiteSeed = 7;

// Desk-scale training profile for the full variant.
constexpr long kMainEpisodes = 80000;
constexpr int kMainWorkers = 6;
constexpr double kLr = 5e-4;
// Shorter runs for the soft ordering and the stop ablation.
constexpr long kOrderingEpisodes = 20000;
constexpr long kAblationEpisodes = 5000;
constexpr long kReproEpisodes = 1500;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Acceptance {
 public:
  // Starts from an empty work directory; runs are shared between criteria
  // within one invocation only.
  explicit Acceptance(fs::path dir) : dir_(std::move(dir)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  Verdict gradients() {
    const auto t0 = Clock::now();
    cli::GradcheckOptions o;
    o.probes = kGradProbes;
    o.tolerance = kGradTol;
    const auto rows = cli::run_gradcheck(o);
    const double secs = seconds_since(t0);
    bool ok = !rows.empty() && secs < kGradSeconds;
    double worst = 0;
    int min_probes = 1 << 30;
    std::set<std::string> names;
    for (const auto& r : rows) {
      ok = ok && r.pass && r.probes >= kGradProbes && r.max_rel_error < kGradTol;
      worst = std::max(worst, r.max_rel_error);
      min_probes = std::min(min_probes, r.probes);
      names.insert(r.group);
    }
    ok = ok && names.size() == rows.size();
    return {ok, std::to_string(rows.size()) + " groups, >= " + std::to_string(min_probes) + " probes each, max rel err " +
                    sci(worst) + " (< " + sci(kGradTol) + "), " + fmt(secs, 1) + " s"};
  }

  Verdict mutual_information() {
    const auto t0 = Clock::now();
    const world::SceneBundle scene(world::generate_scene(3, {9, 9, 0.1, 6, 4}, 0));
    const auto rows = eval::mi_sweep(kMiInstances, 11, &scene.graph);
    const double secs = seconds_since(t0);
    int random_rows = 0, violations = 0;
    double inj_exact = -1, inj_gap = 1, con_exact = -1;
    for (const auto& r : rows) {
      if (r.instance.starts_with("random_")) ++random_rows;
      if (r.bound > r.exact + kMiTol) ++violations;
      if (r.instance == "injective") inj_exact = r.exact, inj_gap = r.gap();
      if (r.instance == "constant") con_exact = r.exact;
    }
    const bool ok = random_rows >= kMiInstances && violations == 0 && std::abs(inj_gap) < kMiTol &&
                    std::abs(inj_exact - std::log2(7.0)) < kMiTol && con_exact == 0.0 && secs < kMiSeconds;
    return {ok, std::to_string(rows.size()) + " rows (" + std::to_string(random_rows) + " random), " +
                    std::to_string(violations) + " bound violations, injective I " + fmt(inj_exact, 6) + " gap " +
                    sci(inj_gap) + ", constant I " + sci(con_exact) + ", " + fmt(secs, 2) + " s"};
  }

  Verdict reward_and_expert() {
    // Telescoping over collision-free random walks without stop.
    std::mt19937_64 rng(21);
    world::EpisodeConfig cfg;
    cfg.max_steps = 1000;
    int walks = 0;
    double worst = 0;
    while (walks < kTelescopeTrajectories) {
      auto s = world::generate_scene(900 + walks % 40, {9 + walks % 5, 9 + walks % 5, 0.05 + 0.01 * (walks % 16), 6, 4},
                                     walks % 40);
      auto bundle = std::make_shared<const world::SceneBundle>(s);
      const int cls = s.objects()[static_cast<std::size_t>(rng() % s.objects().size())].class_id;
      const auto goals = world::goal_poses_for(s, cls, cfg.visibility_threshold, cfg.render);
      if (goals.empty()) continue;
      const auto cells = s.free_cells();
      const auto c = cells[rng() % cells.size()];
      const auto task = world::make_task(bundle, cls, {c.x, c.y, static_cast<int>(rng() % 4)}, goals[0], cfg);
      world::Episode ep(task, cfg);
      const int steps = 1 + static_cast<int>(rng() % 80);
      double sum = 0;
      int geo_first = 0;
      for (int t = 0; t < steps; ++t) {
        std::vector<world::Action> ok;
        for (int ai = 0; ai < world::kNumActions - 1; ++ai) {
          const auto a = world::action_from_index(ai);
          if (s.free(world::apply_kinematics(ep.pose(), a).cell())) ok.push_back(a);
        }
        const auto r = ep.step(ok[rng() % ok.size()]);
        if (r.collided) return {false, "collision on a collision-free walk"};
        sum += r.reward;
        if (t == 0) geo_first = r.geodesic_after;
      }
      worst = std::max(worst, std::abs(sum - (geo_first - ep.geodesic() - 0.01 * steps)));
      ++walks;
    }

    // Expert episodes against an independent pose BFS.
    const auto pool = scenes("test");
    world::EpisodeConfig ecfg;
    ecfg.max_steps = 1000;
    eval::TaskSampler sampler(pool, {1, {}}, ecfg);
    std::mt19937_64 trng(5);
    int mismatches = 0;
    for (int i = 0; i < kExpertTasks; ++i) {
      const auto task = sampler.sample(trng);
      eval::ExpertPolicy expert;
      const auto tr = eval::run_episode(expert, task, ecfg, 0);
      const int oracle = testing::oracle_pose_steps(task.world->scene, task.start, task.goal->goal_poses);
      if (!tr.success || tr.steps != oracle + 1 || task.optimal_length != oracle + 1) ++mismatches;
    }
    const bool ok = worst <= kTelescopeTol && mismatches == 0;
    return {ok, std::to_string(walks) + " walks, max telescoping error " + sci(worst) + "; expert vs BFS on " +
                    std::to_string(kExpertTasks) + " tasks: " + std::to_string(mismatches) + " mismatches"};
  }

  Verdict loss_composition() {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0, min_kl = 1e300;
    int checked = 0;
    for (auto v : nav::kAllVariants) {
      if (v == nav::Variant::kRandom) continue;
      nav::ModelConfig mc;
      mc.variant = v;
      for (int trial = 0; trial < 5; ++trial) {
        mc.alpha = std::exp(nd(rng));
        mc.beta = std::exp(nd(rng) - 3);
        mc.gamma = std::exp(nd(rng) - 6);
        mc.omega = std::exp(nd(rng) - 1);
        const nav::NavModel m(mc);
        const auto p = m.init_params<double>(rng());
        const nav::BoundModel<double> b(m, p);
        for (int i = 0; i < 10; ++i) {
          const auto s = random_sample(mc, rng);
          const auto lb = b.loss(s, b.prepare(s));
          const double expect = v == nav::Variant::kPlainRl
                                    ? lb.pg - mc.entropy_coef * lb.entropy + mc.omega * lb.lv
                                    : mc.alpha * lb.e1 + mc.beta * lb.e2 + mc.gamma * lb.e3 + mc.effective_omega() * lb.lv;
          worst = std::max(worst, std::abs(lb.total - expect));
          if (nav::is_generative(v)) min_kl = std::min(min_kl, lb.e3);
          if (!lb.finite()) return {false, "non-finite loss"};
          ++checked;
        }
      }
    }
    for (int i = 0; i < 2000; ++i) {
      const int d = 1 + static_cast<int>(rng() % 16);
      nnet::GaussianParams<double> q{Vec<double>(d), Vec<double>(d)}, pp{Vec<double>(d), Vec<double>(d)};
      for (int k = 0; k < d; ++k) {
        q.mean[k] = nd(rng);
        q.logvar[k] = 3 * nd(rng);
        pp.mean[k] = i % 3 ? nd(rng) : q.mean[k];
        pp.logvar[k] = i % 3 ? 3 * nd(rng) : q.logvar[k];
      }
      min_kl = std::min(min_kl, nnet::gaussian_kl(q, pp));
    }
    const double e1_uniform = nnet::softmax_cross_entropy<double>(Vec<double>::Zero(7), 3).value;
    const double e1_err = std::abs(e1_uniform - std::log(7.0));
    const bool ok = worst <= kCompositionTol && min_kl >= 0.0 && e1_err <= kUniformE1Tol;
    return {ok, std::to_string(checked) + " losses, max |total - weighted sum| " + sci(worst) + ", min KL " +
                    sci(min_kl) + ", uniform-logit E1 error " + sci(e1_err)};
  }

  Verdict metrics() {
    const auto ex = baseline("expert");
    const auto rnd = random_report();
    const bool ok = ex.sr == 100.0 && ex.spl == 100.0 && rnd.sr <= kRandomSrMax;
    return {ok, "expert SR " + fmt(ex.sr) + " SPL " + fmt(ex.spl) + "; random SR " + fmt(rnd.sr) + " (<= " +
                    fmt(kRandomSrMax, 1) + ")"};
  }

  // Checked last: covers every report produced in this run.
  Verdict spl_bound() const {
    int bad = 0;
    for (const auto& [name, r] : reports_)
      if (r.spl > r.sr + 1e-12) ++bad;
    return {bad == 0, "SPL <= SR on " + std::to_string(reports_.size() - bad) + "/" + std::to_string(reports_.size()) +
                          " suites"};
  }

  Verdict training(std::string& soft) {
    const auto t0 = Clock::now();
    const auto run = train_run(nav::Variant::kFull, 1, kMainEpisodes, kMainWorkers);
    const double minutes = seconds_since(t0) / 60;
    const auto full = evaluate(run, "", false);
    const auto rnd = random_report();
    const bool beats = rnd.sr == 0 ? full.sr > 0 : full.sr >= kRandomMultiple * rnd.sr;
    const bool ok = full.sr >= kTrainSrMin && beats && minutes <= kTrainMinutes;

    std::map<std::string, double> mean;
    std::string per_seed;
    for (auto v : {nav::Variant::kFull, nav::Variant::kNoGen, nav::Variant::kBc}) {
      const std::string name(nav::variant_name(v));
      for (auto seed : kSeeds) {
        const auto r = evaluate(train_run(v, seed, kOrderingEpisodes, kMainWorkers), "", false);
        mean[name] += r.sr / static_cast<double>(kSeeds.size());
        per_seed += " " + name + "/s" + std::to_string(seed) + " " + fmt(r.sr, 0);
      }
    }
    const bool ordered = mean["full"] >= mean["nogen"] && mean["nogen"] >= mean["bc"];
    soft = std::string(ordered ? "OK  " : "WARN") + " soft ordering full >= nogen >= bc (mean SR over 3 seeds, " +
           std::to_string(kOrderingEpisodes) + " episodes): full " + fmt(mean["full"]) + " nogen " +
           fmt(mean["nogen"]) + " bc " + fmt(mean["bc"]) + " |" + per_seed;
    return {ok, "full variant SR " + fmt(full.sr) + " SPL " + fmt(full.spl) + " on unseen scenes / known targets (" +
                    std::to_string(kSuiteTasks) + " tasks, greedy); random SR " + fmt(rnd.sr) + "; " +
                    std::to_string(kMainEpisodes) + " episodes, " + std::to_string(kMainWorkers) + " workers, " +
                    fmt(minutes, 1) + " min on " + std::to_string(std::thread::hardware_concurrency()) + " core(s)"};
  }

  Verdict stop_ablation() {
    int pairs = 0, violations = 0;
    std::string detail;
    for (auto v : nav::kAllVariants) {
      const std::string name(nav::variant_name(v));
      const bool long_run = v == nav::Variant::kFull || v == nav::Variant::kNoGen || v == nav::Variant::kBc;
      double agent = 0, env = 0;
      for (auto seed : kSeeds) {
        const auto run = train_run(v, seed, long_run ? kOrderingEpisodes : kAblationEpisodes, kMainWorkers);
        const auto a = evaluate(run, "", false);
        const auto e = evaluate(run, "", true);
        ++pairs;
        if (e.sr < a.sr) ++violations;
        agent += a.sr / static_cast<double>(kSeeds.size());
        env += e.sr / static_cast<double>(kSeeds.size());
      }
      detail += " " + name + " " + fmt(agent, 1) + "->" + fmt(env, 1);
    }
    return {violations == 0, std::to_string(pairs) + " paired evaluations, " + std::to_string(violations) +
                                 " with lower SR under auto-stop | mean SR agent->env:" + detail};
  }

  Verdict reproducibility() {
    const auto a = train_run(nav::Variant::kFull, 5, kReproEpisodes, 1, "repro_a");
    const auto b = train_run(nav::Variant::kFull, 5, kReproEpisodes, 1, "repro_b");
    const std::string va = slurp(a / "val_log.jsonl");
    const bool logs_equal = !va.empty() && va == slurp(b / "val_log.jsonl");
    int eval_pairs = 0, eval_diffs = 0;
    for (const char* mode : {"greedy", "sample"}) {
      for (int threads : {1, 3}) {
        cli::RunConfig cfg = base_config();
        cfg.eval.mode = mode;
        cfg.eval.threads = threads;
        cfg.eval.n = 50;
        const fs::path o1 = dir_ / "repro_eval" / (std::string(mode) + std::to_string(threads) + "_1");
        const fs::path o2 = dir_ / "repro_eval" / (std::string(mode) + std::to_string(threads) + "_2");
        cli::run_eval(cfg, {"model", (a / "checkpoints" / "best.ck").string(), o1.string()});
        cli::run_eval(cfg, {"model", (b / "checkpoints" / "best.ck").string(), o2.string()});
        ++eval_pairs;
        eval_diffs += strip_checkpoint(slurp(o1 / "report.json")) != strip_checkpoint(slurp(o2 / "report.json"));
      }
    }
    for (const char* policy : {"random", "expert"}) {
      cli::RunConfig cfg = base_config();
      const fs::path o1 = dir_ / "repro_eval" / (std::string(policy) + "_1");
      const fs::path o2 = dir_ / "repro_eval" / (std::string(policy) + "_2");
      cli::run_eval(cfg, {policy, "", o1.string()});
      cfg.eval.threads = 4;
      cli::run_eval(cfg, {policy, "", o2.string()});
      ++eval_pairs;
      eval_diffs += slurp(o1 / "report.json") != slurp(o2 / "report.json");
    }
    const bool ok = logs_equal && eval_diffs == 0;
    return {ok, std::string("single-worker val_log ") + (logs_equal ? "byte-identical" : "DIFFERS") + " (" +
                    std::to_string(va.size()) + " bytes); " + std::to_string(eval_pairs - eval_diffs) + "/" +
                    std::to_string(eval_pairs) + " repeated evaluations byte-identical"};
  }

 private:
  cli::RunConfig base_config() const {
    cli::RunConfig c;
    c.scenes_dir = (dir_ / "scenes").string();
    c.eval.n = kSuiteTasks;
    c.eval.seed = kSuiteSeed;
    c.eval.split = "unseen_known_targets";
    return c;
  }

  void ensure_scenes() {
    if (!fs::exists(dir_ / "scenes" / "manifest.json")) {
      std::ostringstream log;
      cli::cmd_gen_scenes(base_config(), log);
    }
  }

  eval::ScenePool scenes(const std::string& split) {
    ensure_scenes();
    return cli::load_scene_split(dir_ / "scenes", split);
  }

  // Trains once per (variant, seed, episodes, workers) in this invocation.
  fs::path train_run(nav::Variant v, std::uint64_t seed, long episodes, int workers, std::string name = {}) {
    ensure_scenes();
    if (name.empty())
      name = std::string(nav::variant_name(v)) + "_s" + std::to_string(seed) + "_e" + std::to_string(episodes) + "_w" +
             std::to_string(workers);
    const fs::path run = dir_ / "runs" / name;
    if (fs::exists(run / "checkpoints" / "final.ck") || (v == nav::Variant::kRandom && fs::exists(run / "checkpoints" / "best.ck")))
      return run;
    fs::remove_all(run);
    cli::RunConfig c = base_config();
    c.run_dir = run.string();
    auto& t = c.train;
    t.model.variant = v;
    t.model.policy_z_source = nav::ZSource::kPosterior;
    t.lr = kLr;
    t.workers = workers;
    t.seed = seed;
    t.max_episodes = episodes;
    t.val_every = static_cast<int>(std::max<long>(episodes / 40, 100));
    t.val_tasks = 100;
    t.augment_symmetries = true;
    t.curriculum.stage_starts = {0, episodes / 8, episodes / 4, 3 * episodes / 8};
    const auto t0 = Clock::now();
    std::ostringstream log;
    cli::cmd_train(c, log, true);
    std::cerr << "  [train] " << name << " " << fmt(seconds_since(t0), 1) << " s: " << log.str().substr(0, log.str().find('\n'))
              << "\n";
    return run;
  }

  eval::EvalReport evaluate(const fs::path& run, const std::string& checkpoint, bool auto_stop,
                            const std::string& policy = "model") {
    cli::RunConfig c = base_config();
    c.eval.auto_stop = auto_stop;
    const std::string ck = policy != "model" ? "" : checkpoint.empty() ? (run / "checkpoints" / "best.ck").string()
                                                                         : checkpoint;
    const std::string tag = (policy == "model" ? run.filename().string() : policy) + (auto_stop ? "_autostop" : "");
    const fs::path out = dir_ / "eval" / tag;
    const auto o = cli::run_eval(c, {policy, ck, out.string()});
    reports_[tag] = o.report;
    std::cerr << "  [eval] " << tag << " SR " << fmt(o.report.sr) << " SPL " << fmt(o.report.spl) << "\n";
    return o.report;
  }

  eval::EvalReport baseline(const std::string& policy) { return evaluate(fs::path(policy), "", false, policy); }

  eval::EvalReport random_report() { return baseline("random"); }

  static std::string strip_checkpoint(std::string s) {
    const auto k = s.find("\"checkpoint\"");
    if (k == std::string::npos) return s;
    const auto e = s.find('\n', k);
    return s.erase(k, e - k);
  }

  static nav::TrainSample<double> random_sample(const nav::ModelConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto vec = [&](int n) {
      Vec<double> v(n);
      for (int i = 0; i < n; ++i) v[i] = u(rng);
      return v;
    };
    nav::TrainSample<double> s;
    for (auto& v : s.input.views) v = vec(cfg.view_dim);
    s.input.target = vec(cfg.view_dim);
    s.input.prev_action = nav::action_onehot<double>(static_cast<int>(rng() % 8) - 1);
    s.expert_action = static_cast<int>(rng() % nav::kActions);
    s.taken_action = static_cast<int>(rng() % nav::kActions);
    s.next_front = vec(cfg.view_dim);
    s.ret = std::normal_distribution<double>(1.0, 3.0)(rng);
    s.noise = nav::draw_noise<double>(rng, cfg.latent_dim);
    return s;
  }

  fs::path dir_;
  std::map<std::string, eval::EvalReport> reports_;
};

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mirnav_acceptance";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoi(argv[i]));
  auto wanted = [&](int c) { return only.empty() || only.count(c); };

  Acceptance acc(dir);
  std::map<int, Verdict> verdicts;
  std::string soft;
  const std::map<int, std::string> titles{{1, "gradient correctness"},  {2, "information bound"},
                                          {3, "reward/expert oracles"}, {4, "loss composition"},
                                          {5, "metric sanity"},         {6, "desk-scale training"},
                                          {7, "auto-stop ablation"},    {8, "reproducibility"}};
  auto run = [&](int c, auto&& fn) {
    if (!wanted(c)) return;
    std::cerr << "criterion " << c << " (" << titles.at(c) << ") ...\n";
    const auto t0 = Clock::now();
    try {
      verdicts[c] = fn();
    } catch (const std::exception& e) {
      verdicts[c] = {false, std::string("exception: ") + e.what()};
    }
    verdicts[c].detail += " [" + fmt(seconds_since(t0), 1) + " s]";
    std::cerr << "  " << (verdicts[c].pass ? "PASS" : "FAIL") << " " << verdicts[c].detail << "\n";
  };
  run(1, [&] { return acc.gradients(); });
  run(2, [&] { return acc.mutual_information(); });
  run(3, [&] { return acc.reward_and_expert(); });
  run(4, [&] { return acc.loss_composition(); });
  Verdict c5;
  run(5, [&] { return c5 = acc.metrics(); });
  run(6, [&] { return acc.training(soft); });
  run(7, [&] { return acc.stop_ablation(); });
  run(8, [&] { return acc.reproducibility(); });
  if (wanted(5)) {
    const auto spl = acc.spl_bound();
    verdicts[5].pass = verdicts[5].pass && spl.pass;
    verdicts[5].detail += "; " + spl.detail;
  }

  bool all = true;
  std::cout << "\n";
  for (const auto& [c, v] : verdicts) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c << " (" << titles.at(c) << "): " << v.detail << "\n";
    all = all && v.pass;
  }
  if (!soft.empty()) std::cout << soft << "\n";
  return all ? 0 : 1;
}
