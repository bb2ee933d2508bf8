#include "gift/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "gift/io.hpp"

namespace gift {

namespace {

std::string f(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct Frame {
  double s, tx, ty;
  Vec2 map(const Vec2& p) const { return {s * p.x() + tx, -s * p.y() + ty}; }
};

void panel(std::ostringstream& o, const ToolShape& shape, const std::vector<Vec2>& K, const Frame& fr,
           const std::optional<PairDistribution>& D, const std::optional<std::pair<int, int>>& pair,
           const std::string& caption) {
  const int M = static_cast<int>(K.size());
  o << "<g class=\"panel\" transform=\"matrix(" << f(fr.s) << " 0 0 " << f(-fr.s) << " " << f(fr.tx) << " "
    << f(fr.ty) << ")\">\n";
  o << "<polygon class=\"outline\" fill=\"#d9d9d9\" stroke=\"black\" stroke-width=\"" << f(1.0 / fr.s)
    << "\" points=\"";
  for (std::size_t i = 0; i < shape.outline.size(); ++i)
    o << (i ? " " : "") << f(shape.outline[i].x()) << "," << f(shape.outline[i].y());
  o << "\"/>\n";
  const double r = 6.0 / fr.s;
  if (D) {
    const Eigen::VectorXd marginal = D->rowwise().sum() + D->colwise().sum().transpose();
    const double top = std::max(marginal.maxCoeff(), 1e-300);
    for (int i = 0; i < M; ++i)
      o << "<circle class=\"heat\" cx=\"" << f(K[i].x()) << "\" cy=\"" << f(K[i].y()) << "\" r=\"" << f(2.2 * r)
        << "\" fill=\"orange\" fill-opacity=\"" << f(marginal(i) / top) << "\"/>\n";
  }
  for (int i = 0; i < M; ++i) {
    std::string fill = "white";
    if (pair && i == pair->second) fill = "green";
    if (pair && i == pair->first) fill = "red";
    o << "<circle class=\"keypoint\" data-index=\"" << i << "\" cx=\"" << f(K[i].x()) << "\" cy=\"" << f(K[i].y())
      << "\" r=\"" << f(r) << "\" fill=\"" << fill << "\" stroke=\"black\" stroke-width=\"" << f(1.0 / fr.s)
      << "\"/>\n";
  }
  o << "</g>\n";
  for (int i = 0; i < M; ++i) {
    const Vec2 p = fr.map(K[i]);
    o << "<text x=\"" << f(p.x() + 8) << "\" y=\"" << f(p.y() - 8) << "\" font-size=\"11\">" << i << "</text>\n";
  }
  if (!caption.empty()) {
    const Vec2 p = fr.map(Vec2::Zero());
    o << "<text class=\"caption\" x=\"" << f(fr.tx) << "\" y=\"" << f(p.y() + 24) << "\" font-size=\"12\">" << caption
      << "</text>\n";
  }
}

}  // namespace

std::vector<std::pair<int, int>> top_pairs(const PairDistribution& D, int k) {
  const int M = static_cast<int>(D.rows());
  std::vector<int> cells(M * M);
  for (int c = 0; c < M * M; ++c) cells[c] = c;
  std::stable_sort(cells.begin(), cells.end(), [&](int a, int b) { return D(a / M, a % M) > D(b / M, b % M); });
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < std::min(k, M * M); ++c) out.emplace_back(cells[c] / M, cells[c] % M);
  return out;
}

std::string render_svg(const ToolShape& shape, const std::vector<Vec2>& K, const SvgOptions& options) {
  if (shape.outline.empty()) throw ValidationError("render_svg: empty outline");
  if (!(options.pixels_per_meter > 0.0)) throw ValidationError("render_svg: scale must be > 0");
  if (options.D && (options.D->rows() != static_cast<Eigen::Index>(K.size()) || options.D->cols() != options.D->rows()))
    throw ValidationError("render_svg: D does not match the keypoints");
  if (options.top4 && !options.D) throw ValidationError("render_svg: top-4 mode needs D");
  std::optional<std::pair<int, int>> pair = options.pair;
  if (!pair && options.D) pair = select_pair(*options.D, SelectMode::Greedy);
  if (pair && (pair->first < 0 || pair->second < 0 || pair->first >= static_cast<int>(K.size()) ||
               pair->second >= static_cast<int>(K.size())))
    throw ValidationError("render_svg: pair index out of range");

  Vec2 lo = shape.outline[0], hi = shape.outline[0];
  for (const Vec2& p : shape.outline) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
  for (const Vec2& p : K) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
  const double s = options.pixels_per_meter, pad = 30.0;
  const double pw = (hi.x() - lo.x()) * s + 2 * pad;
  const double ph = (hi.y() - lo.y()) * s + 2 * pad + 24;
  const int panels = options.top4 ? 4 : 1;

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(pw * panels) << "\" height=\"" << f(ph)
    << "\" viewBox=\"0 0 " << f(pw * panels) << " " << f(ph) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (options.top4) {
    const auto top = top_pairs(*options.D, 4);
    for (int k = 0; k < static_cast<int>(top.size()); ++k) {
      const Frame fr{s, k * pw + pad - lo.x() * s, pad + hi.y() * s};
      const auto [g, i] = top[k];
      panel(o, shape, K, fr, std::nullopt, top[k],
            "(" + std::to_string(g) + ", " + std::to_string(i) + ") p=" + f((*options.D)(g, i)));
    }
  } else {
    const Frame fr{s, pad - lo.x() * s, pad + hi.y() * s};
    panel(o, shape, K, fr, options.D, pair, "tool " + std::to_string(shape.tool_id));
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::string& path, const ToolShape& shape, const std::vector<Vec2>& K,
               const SvgOptions& options) {
  write_text(path, render_svg(shape, K, options));
}

}  // namespace gift
