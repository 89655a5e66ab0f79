#include "mtpano/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mtpano/aux_labels.hpp"
#include "mtpano/codec.hpp"
#include "mtpano/erp_nn.hpp"
#include "mtpano/gradcheck.hpp"
#include "mtpano/metrics.hpp"
#include "mtpano/pipeline.hpp"
#include "mtpano/prompt.hpp"
#include "mtpano/reproject.hpp"
#include "mtpano/synthetic.hpp"

namespace mtpano {
namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

bool bitwise_equal(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

SuiteResult projection_roundtrip(std::uint64_t seed) {
  const int h = 64, w = 128, patch = 96;
  const ErpImage depth = synthetic::depth_pano(w, h);
  const ErpImage normal = synthetic::normal_pano(w, h);
  const ErpImage semantic = synthetic::semantic_pano(w, h);
  PoseRanges ranges;
  ranges.patch_width = ranges.patch_height = patch;
  const CropManifest m = sample_camera_poses(8, seed, ranges);

  double depth_err = 0, normal_err = 0;
  long semantic_bad = 0, checked = 0;
  for (const CropPose& cp : m.crops) {
    const CameraPose pose = cp.camera();
    const auto d = reproject_labels(extract_patch(depth, pose, Task::Depth), w, h);
    const auto n = reproject_labels(extract_patch(normal, pose, Task::Normal), w, h);
    const auto s = reproject_labels(extract_patch(semantic, pose, Task::Semantic), w, h);
    const double margin = std::sin(3.0 * std::max(2 * kPi<double> / w, 1.0 / pose.focal()));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Vec3<double> r = ray_direction(pixel_to_spherical<double>(x, y, w, h), RayConvention::Camera);
        if (d.valid(y, x)) {
          depth_err = std::max(depth_err, std::abs(d.payload.planes[0](y, x) - depth.planes[0](y, x)) /
                                              depth.planes[0](y, x));
        }
        if (n.valid(y, x)) {
          const double c = std::clamp(n.payload.vec3(y, x).dot(normal.vec3(y, x)), -1.0, 1.0);
          normal_err = std::max(normal_err, rad_to_deg(std::acos(c)));
        }
        const bool interior = r.cwiseAbs().minCoeff() > margin && std::abs(r.y()) < std::cos(deg_to_rad(1.0));
        if (s.valid(y, x) && interior) {
          ++checked;
          if (s.payload.planes[0](y, x) != semantic.planes[0](y, x)) ++semantic_bad;
        }
      }
    }
  }
  SuiteResult r;
  r.name = "projection_roundtrip";
  r.passed = depth_err <= 1e-3 && normal_err <= 0.5 && semantic_bad == 0 && checked > 0;
  r.detail = "depth_rel=" + fmt(depth_err) + " normal_deg=" + fmt(normal_err) +
             " semantic_mismatch=" + std::to_string(semantic_bad) + "/" + std::to_string(checked);
  return r;
}

SuiteResult edf_oracle(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  long inexact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int size = 32;
    const double density = rng.uniform(0.002, 0.05);
    Mask seeds(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) seeds(y, x) = rng.bernoulli(density);
    seeds(rng.index(size), rng.index(size)) = true;
    const EdgeDistanceField edf = jump_flood(seeds);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (int sy = 0; sy < size; ++sy)
          for (int sx = 0; sx < size; ++sx)
            if (seeds(sy, sx)) best = std::min(best, std::hypot(double(sy - y), double(sx - x)));
        const double dev = std::abs(edf.distance(y, x) - best);
        worst = std::max(worst, dev);
        if (dev != 0) ++inexact;
      }
    }
  }
  SuiteResult r;
  r.name = "edf_oracle";
  r.passed = worst <= 0.5;
  r.detail = "max_dev_px=" + fmt(worst) + " inexact_pixels=" + std::to_string(inexact);
  return r;
}

SuiteResult gradchecks(std::uint64_t seed) {
  SuiteResult r;
  r.name = "gradcheck";
  r.passed = true;
  for (const auto& g : nn::run_gradchecks(3, seed)) {
    r.passed = r.passed && g.pass();
    r.detail += (r.detail.empty() ? "" : " ") + g.op + "=" + fmt(g.max_rel_error);
  }
  return r;
}

SuiteResult truncation(std::uint64_t seed) {
  const auto toy = nn::DualStreamToy::make(seed);
  auto max_grad = [](const nn::Gradients& g, const std::vector<nn::NamedParameter>& ps) {
    double m = 0;
    for (const auto& p : ps) m = std::max(m, g.of(p.tensor).abs().maxCoeff());
    return m;
  };
  const auto on = toy.forward(true);
  const auto off = toy.forward(false);
  const double var_inv_on = max_grad(nn::backward(on.variant), toy.invariant_params());
  const double inv_var_on = max_grad(nn::backward(on.invariant), toy.variant_params());
  const double var_inv_off = max_grad(nn::backward(off.variant), toy.invariant_params());
  const double inv_var_off = max_grad(nn::backward(off.invariant), toy.variant_params());
  SuiteResult r;
  r.name = "truncation";
  r.passed = var_inv_on == 0 && inv_var_on == 0 && var_inv_off > 1e-8 && inv_var_off > 1e-8;
  r.detail = "on=(" + fmt(var_inv_on) + "," + fmt(inv_var_on) + ") off=(" + fmt(var_inv_off) + "," +
             fmt(inv_var_off) + ")";
  return r;
}

SuiteResult zero_init(std::uint64_t seed) {
  Rng rng(seed);
  const int c = 3, h = 4, w = 10;
  Eigen::ArrayXd values(c * h * w);
  for (auto& v : values) v = rng.uniform(-2, 2);
  const nn::Tensor f = nn::Tensor::constant({c, h, w}, values);
  const nn::Tensor cond = nn::Tensor::constant(nn::spherical_condition(h, w));
  const auto film = nn::FilmParams::zero_init(c, static_cast<int>(cond.shape().rows()), rng);
  const nn::Tensor other = nn::Tensor::constant({5, h, w}, Eigen::ArrayXd::Random(5 * h * w));
  const bool film_ok = bitwise_equal(nn::film_modulate(f, cond, film).value(), values);
  const bool inject_ok = bitwise_equal(nn::inject(f, other, nn::ZeroInjection::zeros(c, 5)).value(), values);
  SuiteResult r;
  r.name = "zero_init_identity";
  r.passed = film_ok && inject_ok;
  r.detail = std::string("film=") + (film_ok ? "identical" : "differs") + " inject=" + (inject_ok ? "identical" : "differs");
  return r;
}

SuiteResult mixer_blend(std::uint64_t seed) {
  Rng rng(seed);
  const int c = 2, h = 4, w = 12;
  Eigen::ArrayXd values(c * h * w);
  for (auto& v : values) v = rng.uniform(-1, 1);
  const nn::Tensor x = nn::Tensor::constant({c, h, w}, values);
  const auto p = nn::MixerParams::random(c, rng);
  Eigen::ArrayXd lat(h);
  lat << kPi<double> / 2, 0.0, 0.0, -kPi<double> / 2;
  const nn::Tensor mixed_t = nn::erp_token_mixer(x, p, lat);
  const nn::Tensor narrow_t = nn::depthwise_conv2d(x, p.k_std);
  const nn::Tensor wide_t = nn::depthwise_conv2d(x, p.k_wide);
  const auto mixed = mixed_t.matrix();
  const auto narrow = narrow_t.matrix();
  const auto wide = wide_t.matrix();
  double err = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int row = 0; row < h; ++row) {
      const auto& ref = (row == 1 || row == 2) ? narrow : wide;
      err = std::max(err, (mixed.row(ch * h + row) - ref.row(ch * h + row)).cwiseAbs().maxCoeff());
    }
  }
  const bool weights_ok = nn::latitude_weight(0) == 0 && nn::latitude_weight(kPi<double> / 2) == 1 &&
                          nn::latitude_weight(-kPi<double> / 2) == 1 &&
                          std::abs(nn::latitude_weight(kPi<double> / 4) - std::sqrt(0.5)) <= 2.3e-16;
  SuiteResult r;
  r.name = "mixer_blend";
  r.passed = err <= 1e-12 && weights_ok;
  r.detail = "max_row_dev=" + fmt(err) + std::string(" weights=") + (weights_ok ? "ok" : "off");
  return r;
}

SuiteResult point_map(std::uint64_t seed) {
  Rng rng(seed);
  ErpImage depth(ChannelKind::Depth, 64, 32);
  for (auto& v : depth.planes[0].reshaped()) v = rng.uniform(0.1, 50.0);
  const PointMap pm = metric_point_map(depth);
  double err = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x)
      err = std::max(err, std::abs(pm.points.vec3(y, x).norm() - depth.planes[0](y, x)) / depth.planes[0](y, x));
  SphericalCoord<double> center;
  const Vec3<double> dir = ray_direction(center, RayConvention::PointMap);
  SuiteResult r;
  r.name = "point_map_norm";
  r.passed = err <= 1e-6 && dir == Vec3<double>(0, 0, -1);
  r.detail = "max_rel=" + fmt(err);
  return r;
}

SuiteResult determinism(std::uint64_t seed, int jobs) {
  const PoseRanges ranges;
  const bool poses_ok = manifest_to_string(sample_camera_poses(32, seed, ranges)) ==
                        manifest_to_string(sample_camera_poses(32, seed, ranges));
  const AttributePool pool = default_attribute_pool();
  const int n = 2000;
  std::vector<std::string> serial(n), parallel(n);
  run_work_queue(n, 1, [&](int i) { serial[i] = build_prompt(derive_seed(seed, std::uint64_t(i)), pool).text; });
  run_work_queue(n, std::max(jobs, 2), [&](int i) { parallel[i] = build_prompt(derive_seed(seed, std::uint64_t(i)), pool).text; });

  const int draws = 20000;
  int indoor = 0, lighting = 0;
  for (int i = 0; i < draws; ++i) {
    const auto d = build_prompt(derive_seed(seed + 1, std::uint64_t(i)), pool);
    indoor += d.spec.domain == SceneDomain::Indoor;
    lighting += d.spec.lighting.has_value();
  }
  auto within = [&](int count, double p) { return std::abs(count - draws * p) <= 3 * std::sqrt(draws * p * (1 - p)); };
  SuiteResult r;
  r.name = "determinism";
  r.passed = poses_ok && serial == parallel && within(indoor, kIndoorProbability) && within(lighting, kModifierProbability);
  r.detail = "indoor=" + fmt(double(indoor) / draws) + " lighting=" + fmt(double(lighting) / draws);
  return r;
}

SuiteResult metric_oracles() {
  Eigen::ArrayXi gt(4), pred(4);
  gt << 0, 0, 1, 1;
  pred << 0, 1, 1, 1;
  const double miou = semseg_miou(pred, gt, 2)->miou;
  Eigen::ArrayXd g = Eigen::ArrayXd::LinSpaced(16, 0.5, 8.0);
  const auto dm = *depth_metrics(1.3 * g, g, FlatMask::Constant(16, true));
  Eigen::Matrix3Xd a(3, 8), b(3, 8);
  for (int i = 0; i < 8; ++i) {
    const double t = 0.7 * i;
    a.col(i) << std::cos(t), std::sin(t), 0;
    b.col(i) = Eigen::AngleAxisd(deg_to_rad(30), Eigen::Vector3d(-std::sin(t), std::cos(t), 0).cross(a.col(i)).normalized()) * a.col(i);
  }
  const auto nm = *normal_metrics(b, a, FlatMask::Constant(8, true));
  const double full = *delta_mtl(TaskTriple{64.21, 0.1989, 5.9120}, TaskTriple{66.64, 0.1432, 5.4740});
  const double base = *delta_mtl(TaskTriple{64.21, 0.1989, 5.9120}, TaskTriple{65.17, 0.1501, 5.5220});
  SuiteResult r;
  r.name = "metric_oracles";
  r.passed = std::abs(miou - 7.0 / 12.0) <= 1e-9 && std::abs(dm.absrel - 0.3) <= 1e-9 && dm.delta1 == 0 &&
             dm.delta2 == 100 && std::abs(nm.mean_deg - 30) <= 1e-9 && std::abs(nm.median_deg - 30) <= 1e-9 &&
             nm.pct_30 == 0 && std::abs(full - 13.07) <= 0.01 && std::abs(base - 10.88) <= 0.01;
  r.detail = "miou=" + fmt(miou) + " absrel=" + fmt(dm.absrel) + " normal_mean=" + fmt(nm.mean_deg) +
             " delta_full=" + fmt(full) + " delta_base=" + fmt(base);
  return r;
}

SuiteResult codec_roundtrip(std::uint64_t seed) {
  Rng rng(seed);
  Raster depth(ChannelKind::Depth, 16, 8);
  for (auto& v : depth.planes[0].reshaped()) v = std::round(rng.uniform(1, 60000)) / 1000.0;
  Mask valid;
  const Raster back = decode_task(encode_task(depth, Task::Depth), Task::Depth, &valid);
  const double err = (back.planes[0] - depth.planes[0]).abs().maxCoeff();
  SuiteResult r;
  r.name = "codec_roundtrip";
  r.passed = err <= 1e-12 && valid.all();
  r.detail = "depth_mm_err=" + fmt(err * 1000);
  return r;
}

}  // namespace

std::vector<SuiteResult> run_selftest(std::uint64_t seed, int jobs) {
  const std::vector<std::pair<std::string, std::function<SuiteResult()>>> suites{
      {"projection_roundtrip", [&] { return projection_roundtrip(derive_seed(seed, "projection")); }},
      {"edf_oracle", [&] { return edf_oracle(derive_seed(seed, "edf")); }},
      {"gradcheck", [&] { return gradchecks(derive_seed(seed, "gradcheck")); }},
      {"truncation", [&] { return truncation(derive_seed(seed, "truncation")); }},
      {"zero_init_identity", [&] { return zero_init(derive_seed(seed, "zero_init")); }},
      {"mixer_blend", [&] { return mixer_blend(derive_seed(seed, "mixer")); }},
      {"point_map_norm", [&] { return point_map(derive_seed(seed, "point_map")); }},
      {"determinism", [&] { return determinism(seed, jobs); }},
      {"metric_oracles", [] { return metric_oracles(); }},
      {"codec_roundtrip", [&] { return codec_roundtrip(derive_seed(seed, "codec")); }},
  };
  std::vector<SuiteResult> results;
  for (const auto& [name, fn] : suites) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.name = name;
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(r));
  }
  return results;
}

std::string selftest_json(const std::vector<SuiteResult>& results, int indent) {
  nlohmann::ordered_json j;
  bool all = true;
  j["suites"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    j["suites"].push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
  }
  j["passed"] = all;
  return j.dump(indent);
}

}  // namespace mtpano
