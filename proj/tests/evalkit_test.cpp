#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>

#include "mirnav/evalkit/report.hpp"
#include "test_scenes.hpp"

using namespace mirnav;
using namespace mirnav::eval;
using world::EpisodeConfig;
using world::SceneBundle;

namespace {

ScenePool make_pool(int first_id, int count, int size = 11) {
  ScenePool pool;
  for (int i = 0; i < count; ++i) {
    const int id = first_id + i;
    auto s = world::generate_scene(1000 + static_cast<std::uint64_t>(id), {size, size, 0.15, 6, 4}, id);
    pool.push_back(std::make_shared<const SceneBundle>(std::move(s)));
  }
  return pool;
}

// Plain BFS on the free grid, 4-connected.
int bfs_cells(const world::Scene& s, world::CellPos a, world::CellPos b) {
  std::vector<int> d(static_cast<std::size_t>(s.width() * s.height()), -1);
  std::queue<world::CellPos> q;
  d[s.index(a)] = 0;
  q.push(a);
  while (!q.empty()) {
    auto c = q.front();
    q.pop();
    if (c == b) return d[s.index(c)];
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      world::CellPos n{c.x + dx[k], c.y + dy[k]};
      if (!s.free(n) || d[s.index(n)] >= 0) continue;
      d[s.index(n)] = d[s.index(c)] + 1;
      q.push(n);
    }
  }
  return -1;
}

Trajectory traj(bool success, int steps, int optimal, int start_geo = 4, int collisions = 0) {
  Trajectory t;
  t.success = success;
  t.steps = steps;
  t.optimal_length = optimal;
  t.start_geodesic = start_geo;
  t.collisions = collisions;
  return t;
}

std::vector<Trajectory> random_trajs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Trajectory> out;
  for (int i = 0; i < n; ++i) {
    const int opt = 2 + static_cast<int>(rng() % 25);
    const int steps = 1 + static_cast<int>(rng() % 60);
    out.push_back(traj(rng() % 3 == 0, steps, opt, static_cast<int>(rng() % 30), static_cast<int>(rng() % 3)));
  }
  return out;
}

}  // namespace

// ---- task sampling ---------------------------------------------------------

TEST(Tasks, SamplingIsSeedDeterministic) {
  auto pool = make_pool(0, 3);
  EpisodeConfig cfg;
  auto a = sample_tasks(pool, Split::kTrain, 30, 9, {}, cfg);
  auto b = sample_tasks(pool, Split::kTrain, 30, 9, {}, cfg);
  auto c = sample_tasks(pool, Split::kTrain, 30, 10, {}, cfg);
  ASSERT_EQ(a.tasks.size(), 30u);
  bool differs = false;
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    EXPECT_EQ(a.tasks[i].scene_id(), b.tasks[i].scene_id());
    EXPECT_EQ(a.tasks[i].start, b.tasks[i].start);
    EXPECT_EQ(a.tasks[i].target.view_pose, b.tasks[i].target.view_pose);
    EXPECT_EQ(a.tasks[i].goal_class(), b.tasks[i].goal_class());
    differs |= !(a.tasks[i].start == c.tasks[i].start);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.p, b.p);
}

TEST(Tasks, SampledTasksRespectConstraintsAndAreSolvable) {
  auto pool = make_pool(0, 3);
  EpisodeConfig cfg;
  TaskConstraints cons{3, {1, 2}};
  auto suite = sample_tasks(pool, Split::kTrain, 40, 2, cons, cfg);
  for (const auto& t : suite.tasks) {
    EXPECT_GE(t.start_geodesic, 3);
    EXPECT_TRUE(t.goal_class() == 1 || t.goal_class() == 2);
    EXPECT_GE(t.optimal_length, 2);
  }
  EXPECT_LE(suite.target_classes().size(), 2u);
}

TEST(Tasks, DifficultyPercentageMatchesIndependentRecount) {
  auto pool = make_pool(20, 4);
  EpisodeConfig cfg;
  auto suite = sample_tasks(pool, Split::kVal, 60, 4, {}, cfg);
  int straight = 0;
  for (const auto& t : suite.tasks) {
    const auto& s = t.world->scene;
    const int geo = bfs_cells(s, t.start.cell(), t.target.view_pose.cell());
    ASSERT_EQ(geo, t.target_geodesic);
    const double r = geo / std::hypot(double(t.start.x - t.target.view_pose.x), double(t.start.y - t.target.view_pose.y));
    EXPECT_GE(r, 1.0 - 1e-12);  // 4-connected path never beats the straight line
    straight += (r <= 1.1 + 1e-12);
  }
  EXPECT_DOUBLE_EQ(suite.p, 100.0 * straight / 60.0);
}

TEST(Tasks, StraightCorridorHasRatioOne) {
  auto s = mirnav::testing::scene_from_rows({"#########", "#.......1", "#########"});
  auto w = std::make_shared<const SceneBundle>(std::move(s));
  EpisodeConfig cfg;
  auto t = world::make_task(w, 1, {1, 1, 0}, {7, 1, 0}, cfg);
  EXPECT_DOUBLE_EQ(path_ratio(t), 1.0);
  EXPECT_TRUE(near_straight(t));
  EXPECT_DOUBLE_EQ(difficulty_p({t}), 100.0);
}

TEST(Tasks, InfeasibleConstraintsThrowWithCounts) {
  auto pool = make_pool(0, 2);
  EpisodeConfig cfg;
  EXPECT_THROW(sample_tasks(pool, Split::kTrain, 5, 1, {2, {9}}, cfg), InfeasibleError);
  try {
    sample_tasks(pool, Split::kTrain, 5, 1, {500, {}}, cfg);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("2 scenes"), std::string::npos);
  }
  EXPECT_THROW(sample_tasks({}, Split::kTrain, 5, 1, {}, cfg), InfeasibleError);
  EXPECT_THROW(sample_tasks(pool, Split::kTrain, 0, 1, {}, cfg), ConfigError);
}

TEST(Tasks, SplitsAndClassPartition) {
  auto p = ClassPartition::first_k(6, 4);
  EXPECT_EQ(p.known, (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(p.novel, (std::vector<int>{5, 6}));
  EXPECT_EQ(p.for_split(Split::kUnseenNovel), p.novel);
  EXPECT_EQ(p.for_split(Split::kVal), p.known);
  EXPECT_THROW(ClassPartition::first_k(6, 0), ConfigError);
  for (auto s : {Split::kTrain, Split::kVal, Split::kUnseenKnown, Split::kUnseenNovel})
    EXPECT_EQ(parse_split(split_name(s)), s);
  EXPECT_THROW(parse_split("test"), ConfigError);

  auto a = make_pool(0, 3), b = make_pool(3, 2), c = make_pool(2, 2);
  EXPECT_NO_THROW(require_disjoint_scenes(a, b, "train/test"));
  EXPECT_THROW(require_disjoint_scenes(a, c, "train/test"), ConfigError);
}

// ---- episodes --------------------------------------------------------------

TEST(Episodes, ExpertScoresFullMarks) {
  auto pool = make_pool(40, 3);
  EpisodeConfig cfg;
  auto suite = sample_tasks(pool, Split::kTrain, 40, 5, {}, cfg);
  auto trajs = run_suite([] { return std::make_unique<ExpertPolicy>(); }, suite.tasks, cfg, 1);
  for (const auto& t : trajs) EXPECT_EQ(t.steps, t.optimal_length);
  auto r = compute_metrics(trajs);
  EXPECT_DOUBLE_EQ(r.sr, 100.0);
  EXPECT_DOUBLE_EQ(r.spl, 100.0);
  EXPECT_DOUBLE_EQ(r.cr, 0.0);
}

class StopPolicy final : public Policy {
 public:
  void reset(const world::NavTask&, std::uint64_t) override {}
  world::Action act(const world::Episode&) override { return world::Action::kStop; }
};

TEST(Episodes, ImmediateStopFailsInOneStep) {
  auto pool = make_pool(40, 2);
  EpisodeConfig cfg;
  auto suite = sample_tasks(pool, Split::kTrain, 10, 6, {}, cfg);
  StopPolicy stop;
  for (const auto& task : suite.tasks) {
    auto t = run_episode(stop, task, cfg, 0);
    EXPECT_FALSE(t.success);
    EXPECT_EQ(t.steps, 1);
    EXPECT_EQ(spl_term(t), 0.0);
  }
}

TEST(Episodes, TrajectoryRecordsAreConsistent) {
  auto pool = make_pool(40, 3);
  EpisodeConfig cfg;
  cfg.max_steps = 40;
  auto suite = sample_tasks(pool, Split::kTrain, 20, 7, {}, cfg);
  auto trajs = run_suite([] { return std::make_unique<RandomPolicy>(); }, suite.tasks, cfg, 3);
  for (const auto& t : trajs) {
    ASSERT_EQ(t.actions.size(), static_cast<std::size_t>(t.steps));
    ASSERT_EQ(t.poses.size(), t.actions.size() + 1);
    ASSERT_EQ(t.geodesics.size(), t.actions.size() + 1);
    EXPECT_LE(t.steps, cfg.max_steps);
    int collisions = 0;
    for (std::size_t i = 0; i < t.actions.size(); ++i) {
      const bool moved_expected = t.actions[i] != world::Action::kStop;
      const bool blocked = moved_expected && t.poses[i + 1] == t.poses[i] &&
                           world::apply_kinematics(t.poses[i], t.actions[i]) != t.poses[i];
      collisions += blocked;
      const bool last_success = t.success && i + 1 == t.actions.size();
      double expect;
      if (i == 0) expect = -0.01;
      else if (last_success) expect = 10.0;
      else if (blocked) expect = -0.2;
      else expect = t.geodesics[i] - t.geodesics[i + 1] - 0.01;
      EXPECT_NEAR(t.rewards[i], expect, 1e-12);
    }
    EXPECT_EQ(collisions, t.collisions);
  }
}

TEST(Episodes, SuiteResultsIndependentOfThreadCount) {
  auto pool = make_pool(40, 2);
  EpisodeConfig cfg;
  cfg.max_steps = 30;
  auto suite = sample_tasks(pool, Split::kTrain, 12, 8, {}, cfg);
  auto make = [] { return std::make_unique<RandomPolicy>(); };
  auto a = run_suite(make, suite.tasks, cfg, 77, 1);
  auto b = run_suite(make, suite.tasks, cfg, 77, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].actions, b[i].actions);
}

TEST(Episodes, PolicyExceptionsPropagateFromWorkers) {
  class Boom final : public Policy {
   public:
    void reset(const world::NavTask&, std::uint64_t) override {}
    world::Action act(const world::Episode&) override { throw NumericalAbort("boom"); }
  };
  auto pool = make_pool(40, 1);
  EpisodeConfig cfg;
  auto suite = sample_tasks(pool, Split::kTrain, 4, 8, {}, cfg);
  EXPECT_THROW(run_suite([] { return std::make_unique<Boom>(); }, suite.tasks, cfg, 1, 2), NumericalAbort);
}

// ---- metrics ---------------------------------------------------------------

TEST(Metrics, SplExamples) {
  EXPECT_DOUBLE_EQ(spl_term(traj(true, 20, 10)), 0.5);
  EXPECT_DOUBLE_EQ(spl_term(traj(true, 10, 10)), 1.0);
  EXPECT_DOUBLE_EQ(spl_term(traj(true, 7, 10)), 1.0);
  EXPECT_DOUBLE_EQ(spl_term(traj(false, 10, 10)), 0.0);
  auto r = compute_metrics({traj(true, 20, 10), traj(true, 10, 10), traj(false, 3, 10), traj(false, 100, 10, 4, 2)});
  EXPECT_DOUBLE_EQ(r.sr, 50.0);
  EXPECT_DOUBLE_EQ(r.spl, 37.5);
  EXPECT_DOUBLE_EQ(r.cr, 25.0);
}

TEST(Metrics, AllFailuresGiveZero) {
  auto r = compute_metrics({traj(false, 5, 3), traj(false, 100, 9)});
  EXPECT_EQ(r.sr, 0.0);
  EXPECT_EQ(r.spl, 0.0);
  EXPECT_THROW(compute_metrics({}), ContractViolation);
}

TEST(Metrics, PermutationInvariantAndSplBoundedBySr) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto t = random_trajs(57, seed);
    auto r = compute_metrics(t);
    std::mt19937_64 rng(seed);
    std::shuffle(t.begin(), t.end(), rng);
    auto s = compute_metrics(t);
    EXPECT_EQ(dump_canonical(to_json(r)), dump_canonical(to_json(s)));
    EXPECT_LE(r.spl, r.sr + 1e-12);
    EXPECT_GE(r.spl, 0.0);
    for (const auto& b : r.bins) EXPECT_LE(b.spl, b.sr + 1e-12);
  }
}

TEST(Metrics, BinsPartitionTasks) {
  auto t = random_trajs(200, 3);
  auto r = compute_metrics(t);
  ASSERT_EQ(r.bins.size(), 11u);
  int total = 0;
  for (std::size_t i = 0; i < r.bins.size(); ++i) {
    total += r.bins[i].n;
    EXPECT_EQ(r.bins[i].lo, 2 * static_cast<int>(i));
    if (i + 1 < r.bins.size()) {
      EXPECT_EQ(r.bins[i].hi, r.bins[i].lo + 2);
    }
  }
  EXPECT_EQ(r.bins.back().hi, -1);
  EXPECT_EQ(total, r.n);
  EXPECT_EQ(bin_index(0), 0);
  EXPECT_EQ(bin_index(1), 0);
  EXPECT_EQ(bin_index(2), 1);
  EXPECT_EQ(bin_index(19), 9);
  EXPECT_EQ(bin_index(20), 10);
  EXPECT_EQ(bin_index(95), 10);

  int long_n = 0;
  for (const auto& x : t) long_n += x.optimal_length - 1 >= 5;
  EXPECT_EQ(r.long_paths.n, long_n);
}

// ---- mutual information ----------------------------------------------------

TEST(MutualInformation, InjectiveDynamicsCarryLog2SevenBits) {
  auto d = injective_dynamics(4);
  EXPECT_NEAR(mi_exact(d), std::log2(7.0), 1e-12);
  EXPECT_NEAR(mi_bound(d, bayes_classifier(d)), std::log2(7.0), 1e-9);
}

TEST(MutualInformation, ConstantDynamicsCarryNothing) {
  auto d = constant_dynamics(3);
  EXPECT_EQ(mi_exact(d), 0.0);
  EXPECT_NEAR(mi_bound(d, bayes_classifier(d)), 0.0, 1e-12);
}

TEST(MutualInformation, UniformClassifierBoundIsZero) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto d = random_dynamics(4, 6, 3, s);
    EXPECT_NEAR(mi_bound(d, uniform_classifier(d)), 0.0, 1e-12);
  }
}

TEST(MutualInformation, BoundNeverExceedsExactOnRandomInstances) {
  auto rows = mi_sweep(20, 123);
  ASSERT_EQ(rows.size(), 22u);
  for (const auto& r : rows) {
    EXPECT_LE(r.bound, r.exact + 1e-9) << r.instance;
    EXPECT_GE(r.exact, -1e-12);
    EXPECT_LE(r.exact, std::log2(7.0) + 1e-9);
  }
}

TEST(MutualInformation, BayesClassifierIsTight) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto d = random_dynamics(3, 8, 1 + static_cast<int>(s % 8), s);
    EXPECT_NEAR(mi_bound(d, bayes_classifier(d)), mi_exact(d), 1e-9);
  }
}

TEST(MutualInformation, MergingOutcomesNeverIncreasesInformation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto d = random_dynamics(3, 9, 4, rng());
    double prev = mi_exact(d);
    while (d.next_states > 1) {
      const int i = static_cast<int>(rng() % static_cast<unsigned>(d.next_states));
      int j = static_cast<int>(rng() % static_cast<unsigned>(d.next_states - 1));
      if (j >= i) ++j;
      d = merge_outcomes(d, i, j);
      const double now = mi_exact(d);
      EXPECT_LE(now, prev + 1e-12);
      prev = now;
    }
    EXPECT_NEAR(prev, 0.0, 1e-12);
  }
}

TEST(MutualInformation, SceneGraphDynamics) {
  auto s = world::generate_scene(3, {9, 9, 0.15, 6, 4}, 0);
  SceneBundle w(std::move(s));
  auto d = graph_dynamics(w.graph);
  const double i = mi_exact(d);
  EXPECT_GT(i, 0.0);
  EXPECT_LT(i, std::log2(7.0));  // stop and turn-in-place collisions alias
  EXPECT_NEAR(mi_bound(d, bayes_classifier(d)), i, 1e-9);
  auto rows = mi_sweep(2, 1, &w.graph);
  EXPECT_EQ(rows[2].instance, "scene_graph");
}

TEST(MutualInformation, ZeroClassifierProbabilitiesAreFloored) {
  auto d = injective_dynamics(2);
  auto c = bayes_classifier(d);
  // Put all mass on the wrong action for x = 0, x' = 0.
  for (int a = 0; a < 7; ++a) c.at(0, 0, a) = a == 1 ? 1.0 : 0.0;
  auto r = mi_bound_detailed(d, c);
  EXPECT_EQ(r.floored, 1);
  EXPECT_TRUE(std::isfinite(r.bits));
  EXPECT_LT(r.bits, mi_exact(d));
}

TEST(MutualInformation, MalformedInputsAreRejected) {
  auto d = injective_dynamics(2);
  d.at(0, 0, 0) = 0.5;
  EXPECT_THROW(mi_exact(d), ContractViolation);
  auto ok = injective_dynamics(2);
  auto c = uniform_classifier(ok);
  c.at(0, 0, 0) = 0.9;
  EXPECT_THROW(mi_bound(ok, c), ContractViolation);
}

// ---- reports ---------------------------------------------------------------

TEST(Reports, JsonRoundTripIsByteIdentical) {
  auto r = compute_metrics(random_trajs(73, 11));
  const auto text = dump_canonical(to_json(r));
  const auto back = report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(dump_canonical(to_json(back)), text);
  EXPECT_THROW(report_from_json(nlohmann::json::parse("{\"n\": 3}")), ConfigError);
}

TEST(Reports, CsvHasOneRowPerBin) {
  auto r = compute_metrics(random_trajs(40, 2));
  const auto csv = bins_csv(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "lo,hi,n,sr,spl");
  int rows = 0, n = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    std::istringstream f(line);
    std::string lo, hi, cnt;
    std::getline(f, lo, ',');
    std::getline(f, hi, ',');
    std::getline(f, cnt, ',');
    n += std::stoi(cnt);
  }
  EXPECT_EQ(rows, 11);
  EXPECT_EQ(n, 40);
  EXPECT_NE(csv.find(",inf,"), std::string::npos);
}

TEST(Reports, SvgIsStructurallyValid) {
  auto r = compute_metrics(random_trajs(40, 2));
  auto c = check_svg(bins_svg(r));
  ASSERT_TRUE(c.ok) << c.error;
  EXPECT_EQ(c.names, (std::vector<std::string>{"SR", "SPL"}));
  EXPECT_EQ(c.points, (std::vector<int>{11, 11}));

  auto flat = check_svg(svg_plot("t", "x", "y", {{"a", {1, 2, 3}, {5, 5, 5}}}));
  ASSERT_TRUE(flat.ok) << flat.error;
  EXPECT_EQ(flat.points, std::vector<int>{3});

  EXPECT_FALSE(check_svg("<html></html>").ok);
  auto broken = bins_svg(r);
  broken.replace(broken.find("<line class=\"axis\""), 5, "<path");
  EXPECT_FALSE(check_svg(broken).ok);
}

TEST(Reports, EmitWritesAllFormats) {
  const auto dir = std::filesystem::temp_directory_path() / "mirnav_report_test";
  std::filesystem::remove_all(dir);
  auto r = compute_metrics(random_trajs(10, 1));
  emit_report(r, dir, {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kSvg}, {{"policy", "random"}});
  for (const char* f : {"report.json", "bins.csv", "curves.svg"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream in(dir / "report.json");
  auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("policy"), "random");
  EXPECT_EQ(j.at("n"), 10);
  EXPECT_THROW(emit_report(r, dir / "report.json" / "sub"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Reports, MiCsvColumns) {
  auto rows = mi_sweep(3, 4);
  const auto csv = mi_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,instance,exact_bits,bound_bits,gap_bits");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}
