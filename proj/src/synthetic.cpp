#include "mtpano/synthetic.hpp"

#include <cmath>

#include "mtpano/rng.hpp"

namespace mtpano::synthetic {
namespace {

template <typename Fn>
ErpImage fill(ChannelKind kind, int width, int height, Fn&& fn) {
  ErpImage img(kind, width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto c = pixel_to_spherical<double>(x, y, width, height);
      fn(img, y, x, ray_direction(c, RayConvention::Camera));
    }
  }
  return img;
}

}  // namespace

double depth_at(const Vec3<double>& r) { return 2.0 + 0.5 * r.x() + 0.3 * r.y() * r.z() + 0.2 * r.z() * r.z(); }

Vec3<double> normal_at(const Vec3<double>& r) {
  const Vec3<double> bend(std::sin(2.0 * r.x()), std::cos(r.y()), r.z() * r.z());
  return (-r + 0.4 * bend).normalized();
}

int octant_at(const Vec3<double>& r) {
  return (r.x() > 0 ? 1 : 0) | (r.y() > 0 ? 2 : 0) | (r.z() > 0 ? 4 : 0);
}

ErpImage depth_pano(int width, int height) {
  return fill(ChannelKind::Depth, width, height,
              [](ErpImage& img, int y, int x, const Vec3<double>& r) { img.planes[0](y, x) = depth_at(r); });
}

ErpImage normal_pano(int width, int height) {
  return fill(ChannelKind::Normal, width, height,
              [](ErpImage& img, int y, int x, const Vec3<double>& r) { img.set_vec3(y, x, normal_at(r)); });
}

ErpImage semantic_pano(int width, int height) {
  return fill(ChannelKind::Semantic, width, height,
              [](ErpImage& img, int y, int x, const Vec3<double>& r) { img.planes[0](y, x) = octant_at(r); });
}

ErpImage rgb_pano(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  Vec3<double> axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  axis.normalize();
  const double phase = rng.uniform(0, 2 * kPi<double>);
  return fill(ChannelKind::Rgb8, width, height, [&](ErpImage& img, int y, int x, const Vec3<double>& r) {
    const double band = r.dot(axis) > 0.3 ? 1.0 : 0.0;
    img.planes[0](y, x) = std::round(255.0 * (0.5 + 0.4 * std::sin(3.0 * r.x() + phase)) * (0.4 + 0.6 * band));
    img.planes[1](y, x) = std::round(255.0 * (0.5 + 0.4 * r.y()));
    img.planes[2](y, x) = std::round(255.0 * (0.5 + 0.4 * std::cos(2.0 * r.z())) * (1.0 - 0.5 * band));
  });
}

}  // namespace mtpano::synthetic
