#include "mtpano/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mtpano/error.hpp"

namespace mtpano {

std::optional<SemsegMetrics> semseg_miou(const Eigen::ArrayXi& pred, const Eigen::ArrayXi& gt, int n_classes,
                                         int ignore_index) {
  if (pred.size() != gt.size()) throw ContractError("semseg_miou: pred and gt sizes differ");
  if (n_classes <= 0) throw ContractError("semseg_miou: n_classes must be positive");
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> confusion =
      Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_classes, n_classes);
  std::size_t used = 0;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_index) continue;
    if (gt[i] < 0 || gt[i] >= n_classes || pred[i] < 0 || pred[i] >= n_classes) {
      throw DataError("semseg_miou: class index out of range at pixel " + std::to_string(i));
    }
    ++confusion(gt[i], pred[i]);
    ++used;
  }
  if (used == 0) return std::nullopt;
  SemsegMetrics m;
  m.valid_pixels = used;
  m.class_iou.resize(n_classes);
  double sum = 0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    const long long gt_count = confusion.row(c).sum();
    if (gt_count == 0) continue;
    const long long inter = confusion(c, c);
    const long long uni = gt_count + confusion.col(c).sum() - inter;
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    m.class_iou[c] = iou;
    sum += iou;
    ++present;
  }
  m.miou = sum / present;
  return m;
}

std::optional<DepthMetrics> depth_metrics(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& gt, const FlatMask& mask) {
  if (pred.size() != gt.size() || mask.size() != gt.size()) throw ContractError("depth_metrics: sizes differ");
  DepthMetrics m;
  double abs_rel = 0, sq = 0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    if (!(gt[i] > 0)) throw DataError("depth_metrics: ground truth must be positive on the mask");
    const double e = pred[i] - gt[i];
    abs_rel += std::abs(e) / gt[i];
    sq += e * e;
    const double ratio =
        pred[i] > 0 ? std::max(pred[i] / gt[i], gt[i] / pred[i]) : std::numeric_limits<double>::infinity();
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
    ++n;
  }
  if (n == 0) return std::nullopt;
  const double dn = static_cast<double>(n);
  m.absrel = abs_rel / dn;
  m.rmse = std::sqrt(sq / dn);
  m.delta1 = 100.0 * d1 / dn;
  m.delta2 = 100.0 * d2 / dn;
  m.delta3 = 100.0 * d3 / dn;
  m.valid_pixels = n;
  return m;
}

std::optional<NormalMetrics> normal_metrics(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt,
                                            const FlatMask& mask) {
  if (pred.cols() != gt.cols() || mask.size() != gt.cols()) throw ContractError("normal_metrics: sizes differ");
  std::vector<double> angles;
  angles.reserve(gt.cols());
  for (Eigen::Index i = 0; i < gt.cols(); ++i) {
    if (!mask[i]) continue;
    const double np = pred.col(i).norm(), ng = gt.col(i).norm();
    if (!(np > 0) || !(ng > 0)) throw DataError("normal_metrics: zero-length normal on the mask");
    const double cosine = std::clamp(pred.col(i).dot(gt.col(i)) / (np * ng), -1.0, 1.0);
    angles.push_back(std::acos(cosine) * 180.0 / std::numbers::pi);
  }
  if (angles.empty()) return std::nullopt;
  NormalMetrics m;
  m.valid_pixels = angles.size();
  const double n = static_cast<double>(angles.size());
  double sum = 0;
  std::size_t a = 0, b = 0, c = 0;
  for (double raw : angles) {
    sum += raw;
    // Threshold decisions on a 1e-9 degree grid, so an exact 30 degree rotation that lands
    // one ulp below 30 after acos is not counted as inside the 30 degree bin.
    const double v = std::round(raw * 1e9) / 1e9;
    a += v < 11.5;
    b += v < 22.5;
    c += v < 30.0;
  }
  m.mean_deg = sum / n;
  m.pct_11_5 = 100.0 * a / n;
  m.pct_22_5 = 100.0 * b / n;
  m.pct_30 = 100.0 * c / n;
  std::sort(angles.begin(), angles.end());
  const std::size_t mid = angles.size() / 2;
  m.median_deg = angles.size() % 2 ? angles[mid] : 0.5 * (angles[mid - 1] + angles[mid]);
  return m;
}

std::optional<double> delta_mtl(std::span<const double> stl, std::span<const double> mtl,
                                std::span<const Direction> directions) {
  if (stl.size() != mtl.size() || stl.size() != directions.size() || stl.empty()) {
    throw ContractError("delta_mtl: metric sets differ in size");
  }
  double sum = 0;
  for (std::size_t t = 0; t < stl.size(); ++t) {
    if (stl[t] == 0) return std::nullopt;
    const double sign = directions[t] == Direction::HigherIsBetter ? 1.0 : -1.0;
    sum += sign * (mtl[t] - stl[t]) / stl[t];
  }
  return 100.0 * sum / static_cast<double>(stl.size());
}

std::optional<double> delta_mtl(const TaskTriple& stl, const TaskTriple& mtl) {
  const double b[] = {stl.miou, stl.rmse, stl.normal_mean};
  const double m[] = {mtl.miou, mtl.rmse, mtl.normal_mean};
  const Direction d[] = {Direction::HigherIsBetter, Direction::LowerIsBetter, Direction::LowerIsBetter};
  return delta_mtl(b, m, d);
}

std::string to_json(const MetricReport& report, int indent) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (report.semseg) {
    auto& s = j["semseg"];
    s["miou"] = report.semseg->miou;
    s["valid_pixels"] = report.semseg->valid_pixels;
  }
  if (report.depth) {
    const auto& d = *report.depth;
    j["depth"] = {{"absrel", d.absrel}, {"rmse", d.rmse},     {"delta1", d.delta1},
                  {"delta2", d.delta2}, {"delta3", d.delta3}, {"valid_pixels", d.valid_pixels}};
  }
  if (report.normal) {
    const auto& n = *report.normal;
    j["normal"] = {{"mean_deg", n.mean_deg}, {"median_deg", n.median_deg}, {"pct_11_5", n.pct_11_5},
                   {"pct_22_5", n.pct_22_5}, {"pct_30", n.pct_30},         {"valid_pixels", n.valid_pixels}};
  }
  return j.dump(indent);
}

}  // namespace mtpano
