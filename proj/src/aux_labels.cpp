#include "mtpano/aux_labels.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mtpano {

Plane<double> luma(const Raster& rgb) {
  if (rgb.kind != ChannelKind::Rgb8) throw ContractError("luma expects an rgb8 raster");
  return (kLumaR * rgb.planes[0] + kLumaG * rgb.planes[1] + kLumaB * rgb.planes[2]) / 255.0;
}

Vec3<double> hsv_to_rgb8(double hue, double value) {
  const double h6 = hue / (2.0 * kPi<double>) * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double v = value, q = value * (1.0 - f), t = value * f;
  Vec3<double> rgb;
  switch (sector) {
    case 0: rgb = {v, t, 0}; break;
    case 1: rgb = {q, v, 0}; break;
    case 2: rgb = {0, v, t}; break;
    case 3: rgb = {0, q, v}; break;
    case 4: rgb = {t, 0, v}; break;
    default: rgb = {v, 0, q}; break;
  }
  return (rgb * 255.0).array().round().matrix();
}

GradientMap gradient_from_gray(const Plane<double>& gray) {
  const int h = static_cast<int>(gray.rows()), w = static_cast<int>(gray.cols());
  GradientMap g;
  g.gx = Plane<double>::Zero(h, w);
  g.gy = Plane<double>::Zero(h, w);
  auto at = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = ((x % w) + w) % w;
    return gray(y, x);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      g.gx(y, x) = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                   (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      g.gy(y, x) = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                   (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
    }
  }
  g.magnitude = (g.gx.square() + g.gy.square()).sqrt();
  g.direction.resize(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double phi = std::atan2(g.gy(y, x), g.gx(y, x)) + 0.0;
      if (phi <= -kPi<double>) phi = kPi<double>;
      g.direction(y, x) = phi;
    }
  }
  const double peak = g.magnitude.maxCoeff();
  g.hsv = Raster(ChannelKind::Rgb8, w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double hue = g.direction(y, x);
      if (hue < 0) hue += 2.0 * kPi<double>;
      if (hue >= 2.0 * kPi<double>) hue = 0;
      const double value = peak > 0 ? g.magnitude(y, x) / peak : 0.0;
      g.hsv.set_vec3(y, x, hsv_to_rgb8(hue, value));
    }
  }
  return g;
}

GradientMap image_gradient(const Raster& rgb) { return gradient_from_gray(luma(rgb)); }

Mask edge_mask(const GradientMap& gradient, double tau, int border_px) {
  if (!(tau > 0 && tau <= 1)) throw ConfigError("edge threshold tau must lie in (0, 1]");
  if (border_px < 0) throw ConfigError("border width must be >= 0");
  const int h = gradient.height(), w = gradient.width();
  Mask m = Mask::Constant(h, w, false);
  const double peak = gradient.magnitude.maxCoeff();
  if (!(peak > 0)) return m;
  for (int y = border_px; y < h - border_px; ++y)
    for (int x = border_px; x < w - border_px; ++x) m(y, x) = gradient.magnitude(y, x) / peak >= tau;
  return m;
}

EdgeDistanceField jump_flood(const Mask& seeds) {
  const int h = static_cast<int>(seeds.rows()), w = static_cast<int>(seeds.cols());
  EdgeDistanceField edf;
  edf.edges = seeds;
  edf.seed_row.setConstant(h, w, -1);
  edf.seed_col.setConstant(h, w, -1);
  edf.distance.resize(h, w);

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (seeds(y, x)) {
        edf.seed_row(y, x) = y;
        edf.seed_col(y, x) = x;
      }
  if (!seeds.any()) {
    edf.no_seeds = true;
    edf.distance.setConstant(std::hypot(static_cast<double>(w), static_cast<double>(h)));
    return edf;
  }

  int n = 1;
  while (n < std::max(w, h)) n *= 2;

  auto next_row = edf.seed_row;
  auto next_col = edf.seed_col;
  std::vector<int> steps;
  for (int round = 0; round < kJumpFloodRounds; ++round)
    for (int step = n / 2; step >= 1; step /= 2) steps.push_back(step);
  for (const int step : steps) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int best_r = -1, best_c = -1;
        long long best_d = std::numeric_limits<long long>::max();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy * step, nx = x + dx * step;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const int sr = edf.seed_row(ny, nx), sc = edf.seed_col(ny, nx);
            if (sr < 0) continue;
            const long long ddy = sr - y, ddx = sc - x;
            const long long d = ddy * ddy + ddx * ddx;
            if (d < best_d || (d == best_d && (sr < best_r || (sr == best_r && sc < best_c)))) {
              best_d = d;
              best_r = sr;
              best_c = sc;
            }
          }
        }
        next_row(y, x) = best_r;
        next_col(y, x) = best_c;
      }
    }
    std::swap(edf.seed_row, next_row);
    std::swap(edf.seed_col, next_col);
  }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      edf.distance(y, x) = std::hypot(static_cast<double>(edf.seed_row(y, x) - y),
                                      static_cast<double>(edf.seed_col(y, x) - x));
  return edf;
}

EdgeDistanceField edge_distance_field(const GradientMap& gradient, double tau, int border_px) {
  return jump_flood(edge_mask(gradient, tau, border_px));
}

PointMap metric_point_map(const ErpImage& depth) {
  if (depth.kind != ChannelKind::Depth) throw ContractError("metric_point_map expects a depth raster");
  const int h = depth.height(), w = depth.width();
  PointMap pm;
  pm.points = Raster(ChannelKind::PointMap, w, h);
  pm.valid = Mask::Constant(h, w, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = depth.planes[0](y, x);
      if (!valid_depth(d)) continue;
      const auto c = pixel_to_spherical<double>(x, y, w, h);
      pm.points.set_vec3(y, x, d * ray_direction(c, RayConvention::PointMap));
      pm.valid(y, x) = true;
    }
  }
  return pm;
}

}  // namespace mtpano
