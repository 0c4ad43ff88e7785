#pragma once

#include <chrono>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mirnav/cli/gradcheck.hpp"
#include "mirnav/cli/run_config.hpp"
#include "mirnav/cli/scenes.hpp"
#include "mirnav/evalkit/episode.hpp"
#include "mirnav/evalkit/metrics.hpp"
#include "mirnav/evalkit/mi.hpp"
#include "mirnav/evalkit/report.hpp"
#include "mirnav/navmodel/io.hpp"
#include "mirnav/trainer/train.hpp"

namespace mirnav::cli {

enum ExitStatus : int { kOk = 0, kInternal = 1, kConfig = 2, kInfeasible = 3, kNumerical = 4 };

// ---- gen-scenes ---------------------------------------------------------------

inline int cmd_gen_scenes(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = resolve_path(cfg.scenes_dir);
  const auto m = write_scene_sets(cfg.world, dir, train::stage_count(cfg.train.curriculum));
  out << "scenes: " << m.at("counts").at("train") << " train / " << m.at("counts").at("val") << " val / "
      << m.at("counts").at("test") << " test in " << dir.string() << "\n"
      << "manifest hash " << m.at("hash").get<std::string>() << "\n";
  return kOk;
}

// ---- train --------------------------------------------------------------------

inline int cmd_train(const RunConfig& cfg, std::ostream& out, bool quiet = false) {
  const fs::path scenes = resolve_path(cfg.scenes_dir);
  const fs::path run = resolve_path(cfg.run_dir);
  const auto train_pool = load_scene_split(scenes, "train");
  const auto val_pool = load_scene_split(scenes, "val");
  if (fs::exists(run / "val_log.jsonl") || fs::exists(run / "train_log.jsonl"))
    throw ConfigError("run directory " + run.string() + " already holds a run");
  std::error_code ec;
  fs::create_directories(run, ec);
  if (ec) throw ConfigError("cannot create run directory " + run.string() + ": " + ec.message());
  auto resolved = to_json(cfg);
  resolved["scenes_manifest_hash"] = read_manifest(scenes).at("hash");
  eval::write_text(run / "config.json", resolved.dump(2) + "\n");

  const auto t0 = std::chrono::steady_clock::now();
  const auto r = train::train(cfg.train, train_pool, val_pool, run, quiet ? nullptr : &out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "trained " << nav::variant_name(cfg.train.model.variant) << ": " << r.episodes << " episodes, " << r.updates
      << " updates, " << r.skipped << " skipped, " << std::fixed << std::setprecision(1) << secs << " s\n"
      << "best val SR " << r.best_sr << " SPL " << r.best_spl << " at " << r.best_episodes << " episodes -> "
      << r.best_checkpoint.string() << "\n";
  out.unsetf(std::ios::floatfield);
  if (!fs::exists(run / "checkpoints" / "best.ck")) throw InfeasibleError("training produced no best checkpoint");
  return kOk;
}

// ---- eval ---------------------------------------------------------------------

struct EvalRequest {
  std::string policy = "model";  // model | random | expert
  std::string checkpoint;        // required for the model policy
  std::string out_dir;           // empty: derived from the run directory
};

struct EvalOutcome {
  eval::EvalReport report;
  eval::TaskSuite suite;
  fs::path out_dir;
};

inline EvalOutcome run_eval(const RunConfig& cfg, const EvalRequest& req) {
  const auto split = eval::parse_split(cfg.eval.split);
  int classes = cfg.world.classes;
  int known = cfg.train.known_classes;
  int max_steps = cfg.train.max_steps;
  std::optional<nav::LoadedModel> loaded;
  if (req.policy == "model") {
    if (req.checkpoint.empty()) throw ConfigError("eval --policy model needs a checkpoint");
    loaded = nav::load_model(resolve_path(req.checkpoint).string());
    classes = loaded->model->config().classes;
    if (loaded->meta.contains("train_config")) {
      const auto tc = train::train_config_from_json(loaded->meta.at("train_config"));
      known = tc.known_classes;
      max_steps = tc.max_steps;
    }
  } else if (req.policy != "random" && req.policy != "expert") {
    throw ConfigError("unknown policy \"" + req.policy + "\" (model, random, expert)");
  }

  const auto pool = load_scene_split(resolve_path(cfg.scenes_dir), scene_split_for(split));
  world::EpisodeConfig ecfg;
  ecfg.max_steps = max_steps;
  ecfg.render.classes = classes;
  ecfg.auto_stop = cfg.eval.auto_stop;
  const auto part = eval::ClassPartition::first_k(classes, known);
  if (part.for_split(split).empty()) throw InfeasibleError("split " + cfg.eval.split + " has no target classes");
  EvalOutcome o;
  o.suite = eval::sample_tasks(pool, split, cfg.eval.n, cfg.eval.seed, {cfg.eval.min_geo, part.for_split(split)}, ecfg);

  eval::PolicyFactory factory;
  if (req.policy == "expert") {
    factory = [] { return std::make_unique<eval::ExpertPolicy>(); };
  } else if (req.policy == "random") {
    factory = [] { return std::make_unique<eval::RandomPolicy>(); };
  } else {
    const auto mode = cfg.eval.mode == "sample" ? nav::ActMode::kSample : nav::ActMode::kGreedy;
    factory = [&, mode] { return std::make_unique<eval::ModelPolicy<double>>(loaded->model, loaded->params, mode); };
  }
  const auto trajs = eval::run_suite(factory, o.suite.tasks, ecfg, cfg.eval.seed, cfg.eval.threads);
  o.report = eval::compute_metrics(trajs);

  if (!req.out_dir.empty()) {
    o.out_dir = resolve_path(req.out_dir);
  } else {
    std::ostringstream name;
    name << cfg.eval.split << "_" << req.policy << "_" << cfg.eval.mode << (cfg.eval.auto_stop ? "_autostop" : "")
         << "_s" << cfg.eval.seed;
    o.out_dir = resolve_path(cfg.run_dir) / "eval" / name.str();
  }
  nlohmann::json extra{{"split", cfg.eval.split},  {"policy", req.policy},       {"mode", cfg.eval.mode},
                       {"seed", cfg.eval.seed},    {"auto_stop", cfg.eval.auto_stop}, {"p", o.suite.p},
                       {"checkpoint", req.checkpoint}};
  eval::emit_report(o.report, o.out_dir, {eval::ReportFormat::kJson, eval::ReportFormat::kCsv, eval::ReportFormat::kSvg},
                    extra);
  return o;
}

inline int cmd_eval(const RunConfig& cfg, const EvalRequest& req, std::ostream& out) {
  const auto o = run_eval(cfg, req);
  out << std::fixed << std::setprecision(2) << cfg.eval.split << " " << req.policy << " n " << o.report.n << " SR "
      << o.report.sr << " SPL " << o.report.spl << " CR " << o.report.cr << " P " << o.suite.p << "\n"
      << "report: " << o.out_dir.string() << "\n";
  out.unsetf(std::ios::floatfield);
  return kOk;
}

// ---- mi-check -----------------------------------------------------------------

// Exit 4 if any row's bound exceeds the exact value.
inline int cmd_mi_check(int n, std::uint64_t seed, const fs::path& out_csv, std::ostream& out) {
  if (n < 0) throw ConfigError("mi-check: instance count must be >= 0");
  const world::SceneBundle scene(world::generate_scene(seed, {9, 9, 0.1, 6, 4}, 0));
  const auto rows = eval::mi_sweep(n, seed, &scene.graph);
  eval::write_text(out_csv, eval::mi_csv(rows));
  int violations = 0;
  double worst = -1e300;
  for (const auto& r : rows) {
    if (r.bound > r.exact + 1e-9) ++violations;
    worst = std::max(worst, r.bound - r.exact);
  }
  out << std::setprecision(12) << "instances " << rows.size() << ", injective exact " << rows[0].exact << " bits gap "
      << rows[0].gap() << ", constant exact " << rows[1].exact << ", max(bound - exact) " << worst << ", violations "
      << violations << "\n"
      << "report: " << out_csv.string() << "\n";
  out.unsetf(std::ios::floatfield);
  return violations ? kNumerical : kOk;
}

// ---- gradcheck ----------------------------------------------------------------

inline int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out, const fs::path& out_csv = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_gradcheck(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  std::ostringstream csv;
  csv << "group,arrays,coords,probes,skipped,max_rel_error,pass\n";
  out << std::left << std::setw(12) << "group" << std::right << std::setw(8) << "coords" << std::setw(8) << "probes"
      << std::setw(9) << "skipped" << std::setw(15) << "max rel err" << "  status\n";
  for (const auto& r : rows) {
    ok = ok && r.pass;
    out << std::left << std::setw(12) << r.group << std::right << std::setw(8) << r.coords << std::setw(8) << r.probes
        << std::setw(9) << r.skipped << std::setw(15) << std::scientific << std::setprecision(3) << r.max_rel_error
        << "  " << (r.pass ? "PASS" : "FAIL") << "\n";
    out.unsetf(std::ios::floatfield);
    csv << r.group << "," << r.arrays << "," << r.coords << "," << r.probes << "," << r.skipped << ","
        << std::setprecision(17) << r.max_rel_error << "," << (r.pass ? 1 : 0) << "\n";
  }
  out << (ok ? "all groups pass" : "gradient check FAILED") << " (tolerance " << o.tolerance << ", "
      << std::setprecision(3) << secs << " s)\n";
  if (!out_csv.empty()) eval::write_text(out_csv, csv.str());
  return ok ? kOk : kNumerical;
}

// ---- dispatcher ---------------------------------------------------------------

// Parses argv and runs one subcommand. Errors map onto the exit-code table.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mirnav: target-driven navigation with generated next-state supervision"};
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("-c,--config", config_path, "Run config JSON"); };

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "Generate train/val/test scene sets and a manifest");
  add_config(gen);
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("-o,--out", gen_out, "Output directory (default: scenes_dir from the config)");
  gen->add_option("--seed", gen_seed, "World seed");

  // train
  auto* tr = app.add_subcommand("train", "Train one variant; writes a run directory");
  add_config(tr);
  std::string tr_scenes, tr_run, tr_variant, tr_zsrc;
  std::optional<int> tr_workers;
  std::optional<std::uint64_t> tr_seed;
  std::optional<long> tr_episodes, tr_updates;
  std::optional<double> tr_lr;
  bool tr_quiet = false;
  tr->add_option("--scenes", tr_scenes, "Scene directory");
  tr->add_option("--run-dir", tr_run, "Run directory");
  tr->add_option("--variant", tr_variant, "full|noval|nogen|vanillagen|froview|bc|plain_rl|random");
  tr->add_option("--z-source", tr_zsrc, "Latent fed to the policy in training: prior|posterior");
  tr->add_option("--workers", tr_workers, "Worker threads");
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--episodes", tr_episodes, "Episode budget");
  tr->add_option("--updates", tr_updates, "Update budget (0 = none)");
  tr->add_option("--lr", tr_lr, "RMSprop learning rate");
  tr->add_flag("-q,--quiet", tr_quiet, "No per-validation progress lines");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint or baseline policy on a task suite");
  add_config(ev);
  EvalRequest req;
  std::string ev_scenes, ev_run, ev_split, ev_mode;
  std::optional<int> ev_n, ev_threads;
  std::optional<std::uint64_t> ev_seed;
  bool ev_auto_stop = false;
  ev->add_option("--policy", req.policy, "model|random|expert")->capture_default_str();
  ev->add_option("--checkpoint", req.checkpoint, "Checkpoint (default: <run-dir>/checkpoints/best.ck)");
  ev->add_option("--run-dir", ev_run, "Run directory; its config.json is the base config");
  ev->add_option("--scenes", ev_scenes, "Scene directory");
  ev->add_option("--split", ev_split, "train|val|unseen_known_targets|unseen_novel_targets");
  ev->add_option("--n", ev_n, "Number of tasks");
  ev->add_option("--seed", ev_seed, "Suite seed");
  ev->add_option("--mode", ev_mode, "greedy|sample");
  ev->add_option("--threads", ev_threads, "Evaluation threads (results do not depend on it)");
  ev->add_flag("--auto-stop", ev_auto_stop, "Environment issues the stop");
  ev->add_option("-o,--out", req.out_dir, "Report directory");

  // mi-check
  auto* mi = app.add_subcommand("mi-check", "Check the action/next-state information bound on tabular dynamics");
  int mi_n = 20;
  std::uint64_t mi_seed = 1;
  std::string mi_out = "mi_report.csv";
  mi->add_option("--n", mi_n, "Random instances")->capture_default_str();
  mi->add_option("--seed", mi_seed, "Seed")->capture_default_str();
  mi->add_option("-o,--out", mi_out, "CSV output")->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full loss, per parameter group");
  GradcheckOptions gco;
  std::string gc_variant = "full", gc_out;
  gc->add_option("--seed", gco.seed, "Seed")->capture_default_str();
  gc->add_option("--probes", gco.probes, "Probed coordinates per group")->capture_default_str();
  gc->add_option("--variant", gc_variant, "Model variant")->capture_default_str();
  gc->add_flag("--inject-fault", gco.inject_fault, "Corrupt the analytic gradient (harness self-test)");
  gc->add_option("-o,--out", gc_out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(resolve_path(config_path));

    if (gen->parsed()) {
      if (!gen_out.empty()) cfg.scenes_dir = gen_out;
      if (gen_seed) cfg.world.seed = *gen_seed;
      cfg.validate();
      return cmd_gen_scenes(cfg, out);
    }
    if (tr->parsed()) {
      if (!tr_scenes.empty()) cfg.scenes_dir = tr_scenes;
      if (!tr_run.empty()) cfg.run_dir = tr_run;
      if (!tr_variant.empty()) cfg.train.model.variant = nav::parse_variant(tr_variant);
      if (!tr_zsrc.empty()) {
        if (tr_zsrc != "prior" && tr_zsrc != "posterior") throw ConfigError("--z-source must be prior or posterior");
        cfg.train.model.policy_z_source = tr_zsrc == "prior" ? nav::ZSource::kPrior : nav::ZSource::kPosterior;
      }
      if (tr_workers) cfg.train.workers = *tr_workers;
      if (tr_seed) cfg.train.seed = *tr_seed;
      if (tr_episodes) cfg.train.max_episodes = *tr_episodes;
      if (tr_updates) cfg.train.max_updates = *tr_updates;
      if (tr_lr) cfg.train.lr = *tr_lr;
      cfg.validate();
      return cmd_train(cfg, out, tr_quiet);
    }
    if (ev->parsed()) {
      if (!ev_run.empty()) {
        const fs::path run = resolve_path(ev_run);
        if (config_path.empty() && fs::exists(run / "config.json")) {
          auto j = read_json_file(run / "config.json");
          j.erase("scenes_manifest_hash");
          cfg = run_config_from_json(j);
        }
        cfg.run_dir = ev_run;
        if (req.checkpoint.empty() && req.policy == "model") req.checkpoint = (run / "checkpoints" / "best.ck").string();
      }
      if (!ev_scenes.empty()) cfg.scenes_dir = ev_scenes;
      if (!ev_split.empty()) cfg.eval.split = ev_split;
      if (ev_n) cfg.eval.n = *ev_n;
      if (ev_seed) cfg.eval.seed = *ev_seed;
      if (!ev_mode.empty()) cfg.eval.mode = ev_mode;
      if (ev_threads) cfg.eval.threads = *ev_threads;
      if (ev_auto_stop) cfg.eval.auto_stop = true;
      cfg.validate();
      return cmd_eval(cfg, req, out);
    }
    if (mi->parsed()) return cmd_mi_check(mi_n, mi_seed, resolve_path(mi_out), out);
    if (gc->parsed()) {
      gco.model.variant = nav::parse_variant(gc_variant);
      return cmd_gradcheck(gco, out, gc_out.empty() ? fs::path{} : resolve_path(gc_out));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const NumericalAbort& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

}  // namespace mirnav::cli
