#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gift/afford.hpp"
#include "gift/geom.hpp"

namespace gift {

struct SvgOptions {
  std::optional<PairDistribution> D;        // shades keypoints by their marginals
  std::optional<std::pair<int, int>> pair;  // (grasp, interaction); greedy from D when unset
  bool top4 = false;                        // four panels, the most likely pairs of D
  double pixels_per_meter = 1500.0;
};

/// Tool outline and keypoints in tool coordinates under one affine
/// transform per panel. Grasp keypoint filled red, interaction green.
std::string render_svg(const ToolShape& shape, const std::vector<Vec2>& K, const SvgOptions& options = {});

/// Throws ValidationError when the file cannot be written.
void write_svg(const std::string& path, const ToolShape& shape, const std::vector<Vec2>& K,
               const SvgOptions& options = {});

/// The k most likely cells of D, descending, lowest row-major index on ties.
std::vector<std::pair<int, int>> top_pairs(const PairDistribution& D, int k);

}  // namespace gift
