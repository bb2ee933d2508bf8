#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "gift/afford.hpp"
#include "gift/geom.hpp"
#include "gift/harness.hpp"
#include "gift/keypoints.hpp"
#include "gift/plan.hpp"
#include "gift/sim.hpp"

namespace gift {

using Json = nlohmann::json;

/// x rounded to `digits` significant digits.
double round_sig(double x, int digits);

std::string read_text(const std::string& path);
/// Throws ValidationError when the file cannot be written.
void write_text(const std::string& path, const std::string& text);

Json tool_to_json(const ToolShape& shape);
/// Rebuilds all derived data from parts, config and seed.
ToolShape tool_from_json(const Json& j, int n_samples = 64);
void write_tools(const std::string& path, const std::vector<ToolShape>& tools);
std::vector<ToolShape> read_tools(const std::string& path);

Json keypoints_to_json(const KeypointSet& K);
KeypointSet keypoints_from_json(const Json& j);
void write_keypoints(const std::string& path, const std::vector<KeypointSet>& sets);
std::vector<KeypointSet> read_keypoints(const std::string& path);

/// Pairs tools with their keypoint sets by tool id.
ToolSet match_keypoints(std::vector<ToolShape> tools, const std::vector<KeypointSet>& sets);

Json tuple_to_json(const ExperienceTuple& t);
ExperienceTuple tuple_from_json(const Json& j);
std::string experience_jsonl(const std::vector<ExperienceTuple>& tuples);
std::vector<ExperienceTuple> parse_experience(const std::string& text);

Json train_config_to_json(const TrainConfig& cfg);
Json model_to_json(const GraphModel& model, int M, const TrainConfig& cfg, const std::vector<double>& loss_history);
/// Throws ValidationError on a missing block or an architecture hash mismatch.
GraphModel model_from_json(const Json& j);

Json scene_to_json(Task task, const SceneConfig& cfg);
Json episode_config_to_json(const EpisodeConfig& cfg);
std::string config_hash(const Json& j);
std::string trajectory_jsonl(const Trajectory& traj);

Json manifest_to_json(const DatasetManifest& m, const CollectStats& stats);
DatasetManifest manifest_from_json(const Json& j);

Json record_to_json(const EpisodeRecord& r);

}  // namespace gift
