#pragma once

#include <Eigen/Core>

#include "mtpano/raster.hpp"

namespace mtpano {

/// Sobel gradient of the luma image. direction is atan2(gy, gx) in (-pi, pi]; hsv maps
/// direction to hue (wrapped to [0, 2pi)) and max-normalized magnitude to value.
struct GradientMap {
  Plane<double> gx;
  Plane<double> gy;
  Plane<double> magnitude;
  Plane<double> direction;
  Raster hsv;  // Rgb8

  int width() const { return static_cast<int>(magnitude.cols()); }
  int height() const { return static_cast<int>(magnitude.rows()); }
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Luma in [0, 1] from an RGB8 raster.
Plane<double> luma(const Raster& rgb);

/// 3x3 Sobel with wrap-around columns and replicated rows.
GradientMap gradient_from_gray(const Plane<double>& gray);
GradientMap image_gradient(const Raster& rgb);

/// HSV (s = 1) to 8-bit RGB, hue in radians.
Vec3<double> hsv_to_rgb8(double hue, double value);

struct EdgeDistanceField {
  Plane<double> distance;
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> seed_row;
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> seed_col;
  Mask edges;
  bool no_seeds = false;  // edge set was empty; distances hold the image diagonal
};

inline constexpr double kDefaultEdgeThreshold = 0.99;
inline constexpr int kDefaultBorderPx = 2;

/// {magnitude / max(magnitude) >= tau} with a border_px frame cleared.
Mask edge_mask(const GradientMap& gradient, double tau, int border_px);

inline constexpr int kJumpFloodRounds = 2;

/// Jump flooding nearest-seed transform: kJumpFloodRounds sweeps of passes at steps N/2,
/// N/4, ..., 1 with N the smallest power of two >= max(width, height). A single sweep can
/// settle on a non-nearest seed; the second sweep removes those cases. Each pass reads the
/// previous buffer; ties keep the seed with the smaller (row, col).
EdgeDistanceField jump_flood(const Mask& seeds);

EdgeDistanceField edge_distance_field(const GradientMap& gradient, double tau = kDefaultEdgeThreshold,
                                      int border_px = kDefaultBorderPx);

struct PointMap {
  Raster points;  // PointMap kind, meters
  Mask valid;
};

/// P = D * r with the point-map ray convention. Non-positive depth pixels are invalid
/// and get P = 0.
PointMap metric_point_map(const ErpImage& depth);

}  // namespace mtpano
