#include <cmath>
#include <filesystem>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "doctest.h"
#include "gift/harness.hpp"
#include "gift/io.hpp"
#include "gift/svg.hpp"

using namespace gift;

namespace {

EpisodeConfig cheap_config() {
  EpisodeConfig cfg;
  cfg.scene.max_steps = 12;
  cfg.mppi.horizon = 4;
  cfg.mppi.n_rollouts = 4;
  return cfg;
}

const ToolSet& small_set() {
  static const ToolSet ts = [] {
    ToolSet s;
    s.tools = generate_tools(3, {ToolConfig::T, ToolConfig::L, ToolConfig::X}, 5, 100);
    for (const auto& t : s.tools) {
      KeypointSet K;
      K.tool_id = t.tool_id;
      for (int i : farthest_point_indices(t, 8, 0)) K.points.push_back(t.boundary[i].point);
      s.keypoints.push_back(K);
    }
    return s;
  }();
  return ts;
}

EpisodeRecord rec(bool grasp, bool success, double reward) {
  EpisodeRecord r;
  r.grasp_success = grasp;
  r.task_success = success;
  r.reward = reward;
  return r;
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "gift_test_harness";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("generate_tools: ids, configs and determinism") {
  const auto a = generate_tools(5, {ToolConfig::T, ToolConfig::X}, 3, 10);
  const auto b = generate_tools(5, {ToolConfig::T, ToolConfig::X}, 3, 10);
  REQUIRE(a.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(a[i].tool_id == 10 + i);
    CHECK(a[i].config == (i % 2 ? ToolConfig::X : ToolConfig::T));
    CHECK(tool_to_json(a[i]) == tool_to_json(b[i]));
  }
}

TEST_CASE("manifest: train and eval tools must be disjoint") {
  DatasetManifest m;
  m.train_tools = {0, 1, 2};
  m.eval_tools = {3, 4};
  CHECK_NOTHROW(m.validate());
  m.eval_tools = {2, 5};
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("collect: 2 tools x 3 episodes, byte-identical re-run") {
  ToolSet two = small_set();
  two.tools.resize(2);
  two.keypoints.resize(2);
  const auto a = collect(Task::Hammer, two, 3, 42, cheap_config());
  const auto b = collect(Task::Hammer, two, 3, 42, cheap_config());
  CHECK(a.tuples.size() == 6);
  CHECK(a.stats.episodes == 6);
  const std::string text = experience_jsonl(a.tuples);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  CHECK(text == experience_jsonl(b.tuples));
  for (std::size_t k = 0; k < a.tuples.size(); ++k) {
    const auto& t = a.tuples[k];
    CHECK(t.mode == Mode::Train);
    CHECK(t.keypoints.size() == 8);
    CHECK(t.normals.size() == 8);
    const auto [g, i] = collect_indices(42, t.tool_id, static_cast<int>(k % 3), 8);
    CHECK(t.grasp_idx == g);
    if (!t.grasp_success) CHECK(t.inter_idx == i);
  }
  CHECK(parse_experience(text).size() == 6);
  CHECK(experience_jsonl(parse_experience(text)) == text);
}

TEST_CASE("collect: grasp index is uniform over M") {
  const int n = 10000, M = 8;
  std::vector<double> count(M, 0.0);
  for (int e = 0; e < n; ++e) count[collect_indices(7, e % 40, e / 40, M).first] += 1.0;
  const double p = 1.0 / M;
  for (double c : count) CHECK(std::abs(c - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("compute_metrics matches a direct re-aggregation") {
  std::vector<EpisodeRecord> log{rec(true, true, 10.0), rec(true, false, 2.0), rec(false, false, 0.0),
                                 rec(true, true, 6.0), rec(false, false, -1.0)};
  const Metrics m = compute_metrics(log);
  CHECK(m.n_episodes == 5);
  CHECK(m.n_grasp_success == 3);
  CHECK(m.task_success_rate == doctest::Approx(2.0 / 5.0));
  CHECK(m.mean_reward == doctest::Approx(17.0 / 5.0));
  CHECK(m.grasp_success_rate == doctest::Approx(3.0 / 5.0));
  CHECK(m.gc_task_success == doctest::Approx(2.0 / 3.0));
  CHECK(m.gc_mean_reward == doctest::Approx(18.0 / 3.0));
  CHECK(!m.normalized_reward);

  const Metrics none = compute_metrics({rec(true, false, 1.0), rec(false, false, 0.0)});
  CHECK(none.task_success_rate == 0.0);
  CHECK(none.gc_task_success == 0.0);

  Metrics self = m;
  normalize(self, m);
  CHECK(*self.normalized_reward == doctest::Approx(1.0));
  CHECK(*self.gc_normalized_reward == doctest::Approx(1.0));

  Metrics neg;
  neg.mean_reward = -3.0;
  Metrics x = m;
  normalize(x, neg);
  CHECK(!x.normalized_reward);
}

TEST_CASE("report: header-only, round trip, column set") {
  const std::string empty = report_csv({});
  CHECK(empty ==
        "method,task,task_success,mean_reward,norm_reward,grasp_success,gc_task_success,gc_mean_reward,"
        "gc_norm_reward,n_episodes\n");
  CHECK(parse_report(empty).empty());

  ResultRow r;
  r.method = "gift";
  r.task = Task::Hammer;
  r.metrics = compute_metrics({rec(true, true, 1234.56789), rec(true, false, 3.0), rec(false, false, 0.0)});
  normalize(r.metrics, r.metrics);
  ResultRow s = r;
  s.method = "simple";
  s.task = Task::Hook;
  s.metrics.normalized_reward.reset();
  const std::string csv = report_csv({r, s});
  CHECK(csv.find("1234.56789") == std::string::npos);  // 6 significant digits
  const auto rows = parse_report(csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].task == Task::Hammer);  // sorted by task name
  CHECK(rows[1].method == "simple");
  CHECK(!rows[1].metrics.normalized_reward);
  CHECK(rows[0].metrics.mean_reward == doctest::Approx(r.metrics.mean_reward).epsilon(1e-5));
  CHECK(rows[0].metrics.n_episodes == 3);
  CHECK(report_csv(rows) == csv);
}

TEST_CASE("flip_materials: involution, geometry untouched, head mass scales") {
  const ToolShape t = small_set().tools[0];
  const ToolShape f = flip_materials(t);
  CHECK(tool_to_json(flip_materials(f)) == tool_to_json(t));
  CHECK(f.outline == t.outline);
  for (int k = 0; k < 2; ++k) {
    CHECK(f.parts[k].vertices == t.parts[k].vertices);
    CHECK(tool_to_json(f)["parts"][k]["vertices"].dump() == tool_to_json(t)["parts"][k]["vertices"].dump());
  }
  CHECK(f.head().material == t.handle().material);
  const double area = polygon_area(t.head().vertices);
  const double before = polygon_mass(t.head().vertices, t.head().material.density).mass;
  const double after = polygon_mass(f.head().vertices, f.head().material.density).mass;
  CHECK(before == doctest::Approx(area * t.head().material.density));
  CHECK(after / before == doctest::Approx(t.handle().material.density / t.head().material.density));
}

TEST_CASE("compare_inter_parts: report schema") {
  const GraphModel a = init_model(5, 16, 3, 1), b = init_model(5, 16, 3, 2);
  const FlipReport r = compare_inter_parts(a, b, small_set());
  REQUIRE(r.records.size() == 3);
  int flips = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    const auto& rec = r.records[t];
    CHECK(rec.tool_id == small_set().tools[t].tool_id);
    CHECK(rec.flipped == (rec.inter_part_before != rec.inter_part_after));
    flips += rec.flipped;
  }
  CHECK(r.flip_fraction == doctest::Approx(flips / 3.0));
  CHECK(compare_inter_parts(a, a, small_set()).flip_fraction == 0.0);
}

TEST_CASE("evaluate: gating zeroes completion on every mis-grounded episode") {
  EpisodeConfig cfg = cheap_config();
  cfg.scene.max_steps = 40;
  for (Selector sel : {Selector::Simple, Selector::Leverage}) {
    const EvalResult r = evaluate(Task::Hammer, sel, nullptr, small_set(), 6, 3, cfg);
    REQUIRE(r.log.size() == 6);
    for (const auto& e : r.log) {
      if (!e.touched) continue;
      CHECK(e.contact_keypoint >= 0);
      CHECK(e.gated == (e.contact_keypoint != e.inter_idx));
      if (e.gated) CHECK(e.completion_sum == 0.0);
    }
    const Metrics m = compute_metrics(r.log);
    CHECK(m.mean_reward == r.metrics.mean_reward);
  }
  CHECK_THROWS_AS(evaluate(Task::Hammer, Selector::Gift, nullptr, small_set(), 1, 0, cfg), ValidationError);
}

TEST_CASE("evaluate: reference = self gives normalized reward 1") {
  const EvalResult a = evaluate(Task::Hammer, Selector::GraspOpt, nullptr, small_set(), 3, 9, cheap_config());
  const EvalResult b =
      evaluate(Task::Hammer, Selector::GraspOpt, nullptr, small_set(), 3, 9, cheap_config(), &a.metrics);
  if (a.metrics.mean_reward > 0.0) CHECK(*b.metrics.normalized_reward == doctest::Approx(1.0));
  if (a.metrics.gc_mean_reward > 0.0) CHECK(*b.metrics.gc_normalized_reward == doctest::Approx(1.0));
}

TEST_CASE("io: tools round-trip at 9 significant digits") {
  const auto dir = temp_dir();
  const auto path = (dir / "tools.json").string();
  write_tools(path, small_set().tools);
  const auto back = read_tools(path);
  REQUIRE(back.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(back[t].tool_id == small_set().tools[t].tool_id);
    CHECK(back[t].config == small_set().tools[t].config);
    for (int k = 0; k < 2; ++k)
      for (std::size_t v = 0; v < back[t].parts[k].vertices.size(); ++v)
        CHECK((back[t].parts[k].vertices[v] - small_set().tools[t].parts[k].vertices[v]).norm() < 1e-9);
    CHECK(tool_to_json(back[t]) == tool_to_json(small_set().tools[t]));
  }
  CHECK_THROWS_AS(read_tools((dir / "missing.json").string()), ValidationError);
}

TEST_CASE("io: keypoints, model and manifest round-trip") {
  const auto& ts = small_set();
  const Json kj = keypoints_to_json(ts.keypoints[1]);
  CHECK(keypoints_from_json(kj).points == ts.keypoints[1].points);
  CHECK(kj["M"] == 8);

  const GraphModel m = init_model(5, 8, 3, 4);
  TrainConfig tc;
  const Json mj = model_to_json(m, 8, tc, {1.0, 0.5});
  CHECK(mj["arch"]["L"] == 3);
  CHECK(mj["arch"]["h"] == 8);
  const GraphModel back = model_from_json(Json::parse(mj.dump()));
  CHECK(back.theta == m.theta);
  Json bad = mj;
  bad["arch"]["hash"] = "0";
  CHECK_THROWS_AS(model_from_json(bad), ValidationError);

  DatasetManifest man;
  man.task = Task::Reach;
  man.train_tools = {1, 2};
  man.eval_tools = {7};
  man.seed = 99;
  const DatasetManifest mb = manifest_from_json(manifest_to_json(man, {}));
  CHECK(mb.train_tools == man.train_tools);
  CHECK(mb.eval_tools == man.eval_tools);
  CHECK(mb.task == Task::Reach);
}

TEST_CASE("io: trajectory lines carry the step fields") {
  EpisodeConfig cfg = cheap_config();
  const auto& ts = small_set();
  const Selection s = baseline_grasp_opt(ts.tools[0], ts.keypoints[0].points, 0);
  const Episode ep = rollout_with_grasp(ts.tools[0], ts.keypoints[0], s.grasp, s.grasp_idx, s.inter_idx, Task::Hammer,
                                        cfg, Mode::Eval, 1);
  const std::string text = trajectory_jsonl(ep.trajectory);
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const Json j = Json::parse(line);
    for (const char* key : {"t", "tool_pose", "body_poses", "contacts", "reward_terms"}) CHECK(j.contains(key));
    ++n;
  }
  CHECK(n == cfg.scene.max_steps);
  CHECK(scene_to_json(Task::Hammer, cfg.scene)["task"] == "hammer");
}

TEST_CASE("svg: well-formed, circles map to keypoints, grasp red and interaction green") {
  const auto& ts = small_set();
  const auto& K = ts.keypoints[0].points;
  SvgOptions opt;
  opt.pair = std::make_pair(2, 6);
  const std::string svg = render_svg(ts.tools[0], K, opt);

  namespace pt = boost::property_tree;
  pt::ptree doc;
  std::istringstream in(svg);
  REQUIRE_NOTHROW(pt::read_xml(in, doc));
  const pt::ptree& root = doc.get_child("svg");
  int seen = 0;
  for (const auto& [tag, g] : root) {
    if (tag != "g") continue;
    double a, b, c, d, e, f;
    std::istringstream tr(g.get<std::string>("<xmlattr>.transform"));
    char ch;
    tr.ignore(7);  // "matrix("
    tr >> a >> b >> c >> d >> e >> f >> ch;
    for (const auto& [ctag, circle] : g) {
      if (ctag != "circle" || circle.get<std::string>("<xmlattr>.class") != "keypoint") continue;
      const int i = circle.get<int>("<xmlattr>.data-index");
      const double cx = circle.get<double>("<xmlattr>.cx"), cy = circle.get<double>("<xmlattr>.cy");
      // The document transform applied to the circle center lands where
      // the same transform sends K[i].
      const Vec2 doc_pt(a * cx + c * cy + e, b * cx + d * cy + f);
      const Vec2 want(a * K[i].x() + c * K[i].y() + e, b * K[i].x() + d * K[i].y() + f);
      CHECK((doc_pt - want).norm() < 1e-3);
      CHECK(std::abs(cx - K[i].x()) < 1e-6);
      CHECK(std::abs(cy - K[i].y()) < 1e-6);
      const std::string fill = circle.get<std::string>("<xmlattr>.fill");
      if (i == 2) CHECK(fill == "red");
      else if (i == 6) CHECK(fill == "green");
      else CHECK(fill == "white");
      ++seen;
    }
  }
  CHECK(seen == 8);
}

TEST_CASE("svg: top-4 panels and unwritable paths") {
  const auto& ts = small_set();
  const auto& K = ts.keypoints[0].points;
  SvgOptions opt;
  opt.D = forward(init_model(5, 8, 3, 1), build_graph(K, keypoint_normals(ts.tools[0], K)));
  opt.top4 = true;
  const std::string svg = render_svg(ts.tools[0], K, opt);
  namespace pt = boost::property_tree;
  pt::ptree doc;
  std::istringstream in(svg);
  REQUIRE_NOTHROW(pt::read_xml(in, doc));
  int panels = 0;
  for (const auto& [tag, g] : doc.get_child("svg")) panels += tag == "g";
  CHECK(panels == 4);
  const auto top = top_pairs(*opt.D, 4);
  for (int k = 1; k < 4; ++k) CHECK((*opt.D)(top[k - 1].first, top[k - 1].second) >= (*opt.D)(top[k].first, top[k].second));
  CHECK_THROWS_AS(write_svg("/nonexistent-dir/x.svg", ts.tools[0], K, opt), ValidationError);
}
