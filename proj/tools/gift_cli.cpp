#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gift/afford.hpp"
#include "gift/harness.hpp"
#include "gift/io.hpp"
#include "gift/svg.hpp"

using namespace gift;

namespace {

std::vector<ToolConfig> parse_configs(const std::string& s) {
  std::vector<ToolConfig> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, ',')) out.push_back(parse_tool_config(cell));
  if (out.empty()) throw ValidationError("--configs is empty");
  return out;
}

std::string checkpoint_path(const std::string& out, int epoch) {
  std::filesystem::path p(out);
  char tag[32];
  std::snprintf(tag, sizeof tag, ".epoch%04d", epoch);
  return (p.parent_path() / (p.stem().string() + tag + p.extension().string())).string();
}

std::optional<Metrics> reference_for(const std::string& path, Task task) {
  std::optional<Metrics> ref;
  for (const auto& row : read_report(path)) {
    if (row.task != task) continue;
    if (!ref || row.method == "leverage") ref = row.metrics;
    if (row.method == "leverage") break;
  }
  return ref;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gift: tool affordance pipeline"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-tools", "generate procedural tools");
  int n_tools = 40, first_id = 0;
  std::string configs = "T,L,X", out;
  std::uint64_t seed = 0;
  gen->add_option("--n", n_tools)->check(CLI::NonNegativeNumber);
  gen->add_option("--configs", configs);
  gen->add_option("--seed", seed);
  gen->add_option("--first-id", first_id);
  gen->add_option("--out", out)->required();

  auto* kp = app.add_subcommand("keypoints", "optimize keypoints per tool");
  std::string tools_path, keypoints_path;
  int M = 8;
  std::string spread = "coverage";
  kp->add_option("--tools", tools_path)->required();
  kp->add_option("--m", M)->check(CLI::PositiveNumber);
  kp->add_option("--seed", seed);
  kp->add_option("--spread", spread)->check(CLI::IsMember({"coverage", "separation"}));
  kp->add_option("--out", out)->required();

  auto* col = app.add_subcommand("collect", "collect train-mode experience");
  std::string task_name = "hammer";
  int episodes = 50;
  col->add_option("--task", task_name)->check(CLI::IsMember({"hook", "reach", "hammer"}));
  col->add_option("--tools", tools_path)->required();
  col->add_option("--keypoints", keypoints_path)->required();
  col->add_option("--episodes", episodes, "episodes per tool")->check(CLI::NonNegativeNumber);
  col->add_option("--seed", seed);
  col->add_option("--out", out)->required();

  auto* tr = app.add_subcommand("train", "train the affordance model");
  std::string data_path, loss = "paper";
  TrainConfig tc;
  bool raw_rewards = false;
  int hidden = 32;
  tr->add_option("--data", data_path)->required();
  tr->add_option("--lr", tc.lr);
  tr->add_option("--epochs", tc.epochs);
  tr->add_option("--batch", tc.batch_size);
  tr->add_option("--hidden", hidden)->check(CLI::PositiveNumber);
  tr->add_option("--seed", tc.seed);
  tr->add_option("--loss", loss)->check(CLI::IsMember({"paper", "log"}));
  tr->add_flag("--raw-rewards", raw_rewards, "disable running-max reward normalization");
  tr->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("eval", "evaluate a selector with test-time gating");
  std::string selector = "gift", model_path, reference_path, manifest_path, log_path, traj_dir;
  ev->add_option("--task", task_name)->check(CLI::IsMember({"hook", "reach", "hammer"}));
  ev->add_option("--selector", selector)->check(CLI::IsMember({"gift", "simple", "grasp_opt", "leverage"}));
  ev->add_option("--model", model_path);
  ev->add_option("--tools", tools_path)->required();
  ev->add_option("--keypoints", keypoints_path)->required();
  ev->add_option("--episodes", episodes)->check(CLI::NonNegativeNumber);
  ev->add_option("--seed", seed);
  ev->add_option("--reference", reference_path);
  ev->add_option("--manifest", manifest_path, "collection manifest; eval tools must not overlap its train tools");
  ev->add_option("--log", log_path, "per-episode records as JSON lines");
  ev->add_option("--out", out)->required();

  auto* flip = app.add_subcommand("flip-materials", "swap head and handle materials");
  flip->add_option("--tools", tools_path)->required();
  flip->add_option("--out", out)->required();

  auto* render = app.add_subcommand("render", "render a tool, its keypoints and the selected pair as SVG");
  int tool_id = 0;
  std::vector<int> pair;
  bool top4 = false;
  render->add_option("--tool-id", tool_id)->required();
  render->add_option("--tools", tools_path)->required();
  render->add_option("--keypoints", keypoints_path)->required();
  render->add_option("--model", model_path);
  render->add_option("--pair", pair, "grasp and interaction index")->expected(2)->delimiter(',');
  render->add_flag("--top4", top4, "four most likely pairs");
  render->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      write_tools(out, generate_tools(n_tools, parse_configs(configs), seed, first_id));
    } else if (*kp) {
      const auto tools = read_tools(tools_path);
      KeypointObjectiveConfig kc;
      kc.seed = seed;
      kc.spread = spread == "coverage" ? SpreadTerm::Coverage : SpreadTerm::Separation;
      write_keypoints(out, compute_keypoints(tools, M, kc));
    } else if (*col) {
      const Task task = parse_task(task_name);
      const ToolSet ts = match_keypoints(read_tools(tools_path), read_keypoints(keypoints_path));
      const EpisodeConfig cfg;
      const CollectResult r = collect(task, ts, episodes, seed, cfg);
      write_text(out, experience_jsonl(r.tuples));
      DatasetManifest m;
      m.task = task;
      m.train_tools = ts.ids();
      m.episodes_per_tool = episodes;
      m.seed = seed;
      m.config_hash = config_hash(episode_config_to_json(cfg));
      write_text(out + ".manifest.json", manifest_to_json(m, r.stats).dump(1) + "\n");
      std::cerr << "collected " << r.tuples.size() << " tuples, " << r.stats.grasp_failures << " grasp failures, "
                << r.stats.blowups << " blow-ups\n";
    } else if (*tr) {
      tc.loss = parse_loss_variant(loss);
      tc.normalize_rewards = !raw_rewards;
      const TrainingSet set = make_training_set(parse_experience(read_text(data_path)));
      if (set.examples.empty()) throw ValidationError("train: no usable tuples in " + data_path);
      const int m = set.graphs.front().size();
      const GraphModel init = init_model(set.graphs.front().feature_dim(), hidden, 3, tc.seed);
      TrainResult r;
      try {
        r = train(init, set, tc, [&](int epoch, const GraphModel& model) {
          if (epoch % tc.checkpoint_every == 0)
            write_text(checkpoint_path(out, epoch), model_to_json(model, m, tc, {}).dump() + "\n");
        });
      } catch (const TrainingDiverged& e) {
        write_text(out, model_to_json(e.last_good.model, m, tc, {}).dump() + "\n");
        throw;
      }
      write_text(out, model_to_json(r.model, m, tc, r.loss_history).dump() + "\n");
      std::cerr << "trained on " << set.examples.size() << " tuples (" << set.skipped_diagonal << " diagonal, "
                << set.skipped_failed << " failed grasps dropped)\n";
    } else if (*ev) {
      const Task task = parse_task(task_name);
      const Selector sel = parse_selector(selector);
      const ToolSet ts = match_keypoints(read_tools(tools_path), read_keypoints(keypoints_path));
      if (!manifest_path.empty()) {
        DatasetManifest m = manifest_from_json(Json::parse(read_text(manifest_path)));
        m.eval_tools = ts.ids();
        m.validate();
      }
      std::optional<GraphModel> model;
      if (!model_path.empty()) model = model_from_json(Json::parse(read_text(model_path)));
      if (sel == Selector::Gift && !model) throw ValidationError("eval: --model is required for the gift selector");
      std::optional<Metrics> ref;
      if (!reference_path.empty()) ref = reference_for(reference_path, task);
      const EvalResult r = evaluate(task, sel, model ? &*model : nullptr, ts, episodes, seed, EpisodeConfig{},
                                    ref ? &*ref : nullptr);
      std::vector<ResultRow> rows;
      if (std::filesystem::exists(out))
        for (auto& row : read_report(out))
          if (!(row.method == selector && row.task == task)) rows.push_back(row);
      rows.push_back({selector, task, r.metrics});
      write_report(out, rows);
      if (!log_path.empty()) {
        std::string text;
        for (const auto& rec : r.log) text += record_to_json(rec).dump() + "\n";
        write_text(log_path, text);
      }
    } else if (*flip) {
      write_tools(out, flip_materials(read_tools(tools_path)));
    } else if (*render) {
      const ToolSet ts = match_keypoints(read_tools(tools_path), read_keypoints(keypoints_path));
      std::size_t t = 0;
      while (t < ts.tools.size() && ts.tools[t].tool_id != tool_id) ++t;
      if (t == ts.tools.size()) throw ValidationError("render: no tool with id " + std::to_string(tool_id));
      const auto& K = ts.keypoints[t].points;
      SvgOptions opt;
      opt.top4 = top4;
      if (!model_path.empty()) {
        const GraphModel model = model_from_json(Json::parse(read_text(model_path)));
        opt.D = forward(model, build_graph(K, keypoint_normals(ts.tools[t], K)));
      }
      if (!pair.empty()) opt.pair = std::make_pair(pair[0], pair[1]);
      write_svg(out, ts.tools[t], K, opt);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return 3;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
