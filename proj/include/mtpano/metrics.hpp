#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mtpano {

using FlatMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct SemsegMetrics {
  double miou = 0;
  std::vector<std::optional<double>> class_iou;  // nullopt for classes absent from gt
  std::size_t valid_pixels = 0;
};

struct DepthMetrics {
  double absrel = 0;
  double rmse = 0;
  double delta1 = 0;  // percent
  double delta2 = 0;
  double delta3 = 0;
  std::size_t valid_pixels = 0;
};

struct NormalMetrics {
  double mean_deg = 0;
  double median_deg = 0;
  double pct_11_5 = 0;  // percent, strict <
  double pct_22_5 = 0;
  double pct_30 = 0;
  std::size_t valid_pixels = 0;
};

/// Confusion-matrix mIoU averaged over classes that occur in gt. Pixels whose gt equals
/// ignore_index are skipped. Throws DataError for indices >= n_classes. nullopt when no
/// pixel is evaluated.
std::optional<SemsegMetrics> semseg_miou(const Eigen::ArrayXi& pred, const Eigen::ArrayXi& gt, int n_classes,
                                         int ignore_index = 255);

/// AbsRel, RMSE and delta_n (ratio < 1.25^n, strict) over mask. nullopt for an empty mask.
std::optional<DepthMetrics> depth_metrics(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& gt, const FlatMask& mask);

/// Angular error in degrees between (re-normalized) 3 x N normal sets. nullopt for an empty mask.
std::optional<NormalMetrics> normal_metrics(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt,
                                            const FlatMask& mask);

enum class Direction { HigherIsBetter, LowerIsBetter };

/// (100 / T) * sum_t s_t (m_t - b_t) / b_t with s_t = +1 for higher-is-better metrics.
/// nullopt when any baseline is zero.
std::optional<double> delta_mtl(std::span<const double> stl, std::span<const double> mtl,
                                std::span<const Direction> directions);

/// The three-task aggregate: (mIoU up, depth RMSE down, normal mean error down).
struct TaskTriple {
  double miou = 0;
  double rmse = 0;
  double normal_mean = 0;
};

std::optional<double> delta_mtl(const TaskTriple& stl, const TaskTriple& mtl);

struct MetricReport {
  std::optional<SemsegMetrics> semseg;
  std::optional<DepthMetrics> depth;
  std::optional<NormalMetrics> normal;
};

/// Machine-readable report; undefined metrics are emitted as null.
std::string to_json(const MetricReport& report, int indent = 2);

}  // namespace mtpano
