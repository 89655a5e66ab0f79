#include <doctest.h>

#include "helpers.hpp"
#include "mtpano/reproject.hpp"
#include "mtpano/synthetic.hpp"

using namespace mtpano;

namespace {

ErpImage random_scalar_pano(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ErpImage img(ChannelKind::Depth, w, h);
  for (auto& v : img.planes[0].reshaped()) v = rng.uniform(1, 5);
  return img;
}

// Bilinear lookup on an explicitly wrap-padded copy (one column each side).
double padded_bilinear(const Plane<double>& img, double px, double py) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Plane<double> pad(h, w + 2);
  for (int y = 0; y < h; ++y) {
    for (int x = -1; x <= w; ++x) pad(y, x + 1) = img(y, (x + w) % w);
  }
  const double qx = px + 1;
  const int x0 = static_cast<int>(std::floor(qx)), y0 = static_cast<int>(std::floor(py));
  const double fx = qx - x0, fy = py - y0;
  return (1 - fy) * ((1 - fx) * pad(y0, x0) + fx * pad(y0, x0 + 1)) +
         fy * ((1 - fx) * pad(y0 + 1, x0) + fx * pad(y0 + 1, x0 + 1));
}

CameraPose pose(double yaw_deg, double pitch_deg, double fov_deg, int size) {
  CameraPose p;
  p.yaw = deg_to_rad(yaw_deg);
  p.pitch = deg_to_rad(pitch_deg);
  p.fov = deg_to_rad(fov_deg);
  p.width = p.height = size;
  return p;
}

}  // namespace

TEST_CASE("sampling a constant image") {
  const ErpImage img(ChannelKind::Depth, 16, 8, 3.25);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const SphericalCoord<double> c(rng.uniform(-4, 4), rng.uniform(-1.6, 1.6));
    CHECK(sample_erp(img, c, SampleMode::Bilinear)[0] == 3.25);
    CHECK(sample_erp(img, c, SampleMode::Nearest)[0] == 3.25);
  }
}

TEST_CASE("sampling at a pixel center returns that pixel") {
  const ErpImage img = random_scalar_pano(32, 16, 2);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      const auto c = pixel_to_spherical<double>(x, y, 32, 16);
      CHECK(sample_erp(img, c, SampleMode::Nearest)[0] == img.planes[0](y, x));
      CHECK(std::abs(sample_erp(img, c, SampleMode::Bilinear)[0] - img.planes[0](y, x)) < 1e-12);
    }
}

TEST_CASE("bilinear wraps across the seam like a wrap-padded reference") {
  const ErpImage img = random_scalar_pano(32, 16, 3);
  for (double eps : {1e-9, 0.01, 0.05}) {
    for (double phi : {-0.9, 0.0, 0.4}) {
      const SphericalCoord<double> c(kPi<double> + eps, phi);
      const Eigen::Vector2d p = spherical_to_pixel(SphericalCoord<double>(kPi<double> + eps - 2 * kPi<double>, phi), 32, 16);
      const double ref = padded_bilinear(img.planes[0], p.x(), p.y());
      CHECK(std::abs(sample_erp(img, c, SampleMode::Bilinear)[0] - ref) < 1e-12);
    }
  }
  // Just left of the seam as well.
  const Eigen::Vector2d p = spherical_to_pixel(SphericalCoord<double>(kPi<double> - 1e-3, 0.2), 32, 16);
  CHECK(std::abs(sample_erp(img, SphericalCoord<double>(kPi<double> - 1e-3, 0.2), SampleMode::Bilinear)[0] -
                 padded_bilinear(img.planes[0], p.x(), p.y())) < 1e-12);
}

TEST_CASE("bilinear continues over the pole") {
  const ErpImage img = random_scalar_pano(32, 16, 4);
  // Above the first row center: blends row 0 at theta with row 0 at theta + pi.
  const auto c0 = pixel_to_spherical<double>(5, 0, 32, 16);
  const double top = kPi<double> / 2;
  const double phi = (c0.phi + top) / 2;  // a quarter pixel above the row-0 center
  const double got = sample_erp(img, SphericalCoord<double>(c0.theta, phi), SampleMode::Bilinear)[0];
  const double fy = 0.75;  // distance from the virtual row -1 center, in pixels
  const double expect = (1 - fy) * img.planes[0](0, 5 + 16) + fy * img.planes[0](0, 5);
  CHECK(std::abs(got - expect) < 1e-12);
}

TEST_CASE("semantic rasters refuse bilinear sampling") {
  const ErpImage img(ChannelKind::Semantic, 8, 4);
  CHECK_THROWS_AS(sample_erp(img, SphericalCoord<double>(), SampleMode::Bilinear), ContractError);
}

TEST_CASE("uniform radial depth becomes z-depth") {
  const ErpImage pano(ChannelKind::Depth, 256, 128, 2.0);
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    const CameraPose p = pose(rng.uniform(0, 360), rng.uniform(-90, 90), rng.uniform(80, 120), 65);
    const PatchSample s = extract_patch(pano, p, Task::Depth);
    CHECK(std::abs(s.payload.planes[0](32, 32) - 2.0) < 1e-12);
  }
  const CameraPose p = pose(0, 0, 90, 512);
  const PatchSample s = extract_patch(pano, p, Task::Depth);
  const double t = 1 - 1.0 / 512;
  CHECK(std::abs(s.payload.planes[0](0, 0) - 2.0 / std::sqrt(1 + 2 * t * t)) < 1e-12);
  CHECK(std::abs(s.payload.planes[0](0, 0) - 2.0 / std::sqrt(3.0)) < 2e-3);
  CHECK(s.valid.all());
}

TEST_CASE("normals under the identity pose") {
  ErpImage pano(ChannelKind::Normal, 64, 32);
  pano.planes[1].setConstant(1.0);
  const PatchSample s = extract_patch(pano, pose(0, 0, 90, 16), Task::Normal);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK((s.payload.vec3(y, x) - Vec3<double>(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("normals rotate into the camera frame") {
  // A yawed camera sees a world normal pointing along its own forward axis as +z.
  ErpImage pano(ChannelKind::Normal, 64, 32);
  const CameraPose p = pose(90, 0, 90, 9);
  const Vec3<double> world = rotation_matrix(p) * Vec3<double>(0, 0, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) pano.set_vec3(y, x, world);
  const PatchSample s = extract_patch(pano, p, Task::Normal);
  CHECK((s.payload.vec3(4, 4) - Vec3<double>(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("invalid depth taps invalidate the patch pixel") {
  ErpImage pano(ChannelKind::Depth, 64, 32, 3.0);
  pano.planes[0](16, 32) = 0;
  const PatchSample s = extract_patch(pano, pose(0, 0, 60, 33), Task::Depth);
  CHECK_FALSE(s.valid(16, 16));
  CHECK(s.valid(0, 0));
}

TEST_CASE("task and raster kind must agree") {
  const ErpImage pano(ChannelKind::Depth, 16, 8, 1.0);
  CHECK_THROWS_AS(extract_patch(pano, pose(0, 0, 90, 4), Task::Normal), ContractError);
}

TEST_CASE("depth round trip") {
  const ErpImage depth = synthetic::depth_pano(256, 128);
  Rng rng(6);
  for (int i = 0; i < 6; ++i) {
    const CameraPose p = pose(rng.uniform(0, 360), rng.uniform(-90, 90), rng.uniform(80, 120), 128);
    const ErpPatchLabel l = reproject_labels(extract_patch(depth, p, Task::Depth), 256, 128);
    REQUIRE(l.valid.count() > 0);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 256; ++x)
        if (l.valid(y, x)) CHECK(testing::rel_err(l.payload.planes[0](y, x), depth.planes[0](y, x)) <= 1e-3);
  }
}

TEST_CASE("z-depth file content maps back to radial depth") {
  // 4x4 patch, 90 degree fov: f = 2. Pixel (row 0, col 0) samples the ray through plane
  // point (0.5, 0.5): (-1.5/2, -1.5/2, 1) so d_cam . k = 1 / sqrt(1 + 2 * 0.5625).
  PatchSample s;
  s.pose = pose(0, 0, 90, 4);
  s.task = Task::Depth;
  s.payload = Raster(ChannelKind::Depth, 4, 4, 1.5);
  const double k00 = 1 / std::sqrt(1 + 2 * 0.5625);
  CHECK(std::abs(perspective_grid(s.pose).axis_cos(0, 0) - k00) < 1e-15);

  const int W = 512, H = 256;
  const ErpPatchLabel l = reproject_labels(s, W, H);
  int checked = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!l.valid(y, x)) continue;
      const auto c = pixel_to_spherical<double>(x, y, W, H);
      const Vec3<double> d = ray_direction(c, RayConvention::Camera);
      CHECK(std::abs(l.payload.planes[0](y, x) - 1.5 / d.z()) < 1e-12);
      ++checked;
    }
  CHECK(checked > 0);
}

TEST_CASE("re-projection obeys the half-pixel border and the patch mask") {
  PatchSample s;
  s.pose = pose(0, 0, 90, 8);
  s.task = Task::Depth;
  s.payload = Raster(ChannelKind::Depth, 8, 8, 1.0);
  const int W = 256, H = 128;
  const ErpPatchLabel l = reproject_labels(s, W, H);
  const Mat3<double> rt = rotation_matrix(s.pose).transpose();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Vec3<double> d = rt * ray_direction(pixel_to_spherical<double>(x, y, W, H), RayConvention::Camera);
      Eigen::Vector2d q;
      const bool inside = project_to_patch(s.pose, d, q) && q.x() >= 0.5 && q.x() <= 7.5 && q.y() >= 0.5 && q.y() <= 7.5;
      CHECK(l.valid(y, x) == inside);
    }

  s.valid = Mask::Constant(8, 8, false);
  CHECK(reproject_labels(s, W, H).valid.count() == 0);
}

TEST_CASE("semantic round trip is exact away from class boundaries") {
  const int W = 256, H = 128;
  const ErpImage sem = synthetic::semantic_pano(W, H);
  Rng rng(7);
  for (int i = 0; i < 6; ++i) {
    const CameraPose p = pose(rng.uniform(0, 360), rng.uniform(-90, 90), rng.uniform(80, 120), 128);
    const PatchSample patch = extract_patch(sem, p, Task::Semantic);
    for (auto v : patch.payload.planes[0].reshaped()) CHECK(v == std::floor(v));
    const ErpPatchLabel l = reproject_labels(patch, W, H);
    const double margin = std::sin(3.0 * std::max(2 * kPi<double> / W, 1.0 / p.focal()));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const Vec3<double> r = ray_direction(pixel_to_spherical<double>(x, y, W, H), RayConvention::Camera);
        if (l.valid(y, x) && r.cwiseAbs().minCoeff() > margin) CHECK(l.payload.planes[0](y, x) == sem.planes[0](y, x));
      }
  }
}

TEST_CASE("mask area of a 90 degree square frustum") {
  const int W = 1024, H = 512;
  PatchSample s;
  s.pose = pose(40, 25, 90, 64);
  s.task = Task::Depth;
  s.payload = Raster(ChannelKind::Depth, 64, 64, 1.0);
  const ErpPatchLabel l = reproject_labels(s, W, H);
  double covered = 0, total = 0;
  for (int y = 0; y < H; ++y) {
    const double wgt = std::cos(pixel_to_spherical<double>(0, y, W, H).phi);
    for (int x = 0; x < W; ++x) {
      total += wgt;
      covered += l.valid(y, x) ? wgt : 0;
    }
  }
  // Monte-Carlo oracle: uniform directions falling inside the frustum. The valid region
  // stops half a pixel inside the border, which the oracle mirrors.
  const Mat3<double> rt = rotation_matrix(s.pose).transpose();
  long hits = 0;
  const long n = 400000;
  std::mt19937_64 gen(8);
  std::normal_distribution<double> g;
  for (long i = 0; i < n; ++i) {
    const Vec3<double> d = rt * Vec3<double>(g(gen), g(gen), g(gen)).normalized();
    Eigen::Vector2d q;
    hits += project_to_patch(s.pose, d, q) && q.x() >= 0.5 && q.x() <= 63.5 && q.y() >= 0.5 && q.y() <= 63.5;
  }
  const double fraction = covered / total;
  CHECK(std::abs(fraction - double(hits) / n) / (double(hits) / n) < 0.02);
  // Full frustum is one cube face: 1/6 of the sphere.
  CHECK(std::abs(fraction - 1.0 / 6.0) / (1.0 / 6.0) < 0.05);
}
