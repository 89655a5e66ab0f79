#include <doctest.h>

#include <cstring>
#include <limits>

#include "mtpano/erp_nn.hpp"
#include "mtpano/error.hpp"
#include "mtpano/sphere.hpp"
#include "mtpano/gradcheck.hpp"

using namespace mtpano;
using namespace mtpano::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng, bool param = false) {
  Eigen::ArrayXd v(s.size());
  for (auto& x : v) x = rng.uniform(-1, 1);
  return param ? Tensor::parameter(s, v) : Tensor::constant(s, v);
}

bool same_bits(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

double max_abs(const Gradients& g, const std::vector<NamedParameter>& ps) {
  double m = 0;
  for (const auto& p : ps) m = std::max(m, g.of(p.tensor).abs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("latitude weight") {
  CHECK(latitude_weight(0.0) == 0.0);
  CHECK(latitude_weight(kPi<double> / 2) == 1.0);
  CHECK(latitude_weight(-kPi<double> / 2) == 1.0);
  CHECK(std::abs(latitude_weight(kPi<double> / 4) - std::sqrt(0.5)) <= std::numeric_limits<double>::epsilon());
  CHECK(latitude_weight(-kPi<double> / 4) == latitude_weight(kPi<double> / 4));
}

TEST_CASE("delta kernels make the mixer an identity") {
  Rng rng(1);
  const Tensor x = random_tensor({3, 6, 12}, rng);
  // (1 - w) x + w x rounds, so allow one ulp of the unit-range inputs.
  const Eigen::ArrayXd dev = erp_token_mixer(x, MixerParams::delta(3)).value() - x.value();
  CHECK(dev.abs().maxCoeff() <= std::numeric_limits<double>::epsilon());
}

TEST_CASE("equator and pole rows") {
  Rng rng(2);
  const Tensor x = random_tensor({2, 3, 10}, rng);
  const MixerParams p = MixerParams::random(2, rng);
  Eigen::ArrayXd lat(3);
  lat << 0.0, kPi<double> / 2, -kPi<double> / 2;
  const Tensor out = erp_token_mixer(x, p, lat);
  const Tensor narrow = depthwise_conv2d(x, p.k_std), wide = depthwise_conv2d(x, p.k_wide);
  for (int c = 0; c < 2; ++c) {
    CHECK(out.matrix().row(c * 3) == narrow.matrix().row(c * 3));
    CHECK(out.matrix().row(c * 3 + 1) == wide.matrix().row(c * 3 + 1));
    CHECK(out.matrix().row(c * 3 + 2) == wide.matrix().row(c * 3 + 2));
  }
}

TEST_CASE("mixer blends by |sin phi| at default latitudes") {
  Rng rng(3);
  const Tensor x = random_tensor({1, 4, 9}, rng);
  const MixerParams p = MixerParams::random(1, rng);
  const Eigen::ArrayXd lat = row_latitudes(4, 9);
  const Tensor out = erp_token_mixer(x, p);
  const Tensor a = depthwise_conv2d(x, p.k_std), b = depthwise_conv2d(x, p.k_wide);
  for (int i = 0; i < 4; ++i) {
    const double w = std::abs(std::sin(lat[i]));
    CHECK(((out.matrix().row(i) - ((1 - w) * a.matrix().row(i) + w * b.matrix().row(i))).cwiseAbs().maxCoeff()) < 1e-15);
  }
  CHECK_THROWS_AS(erp_token_mixer(random_tensor({1, 4, 8}, rng), p), ContractError);
}

TEST_CASE("mixer gradient on a 4x8x16 input") {
  Rng rng(4);
  const Tensor x = random_tensor({4, 8, 16}, rng, true);
  const MixerParams p = MixerParams::random(4, rng);
  const Tensor w = random_tensor({4, 8, 16}, rng);
  auto fn = [&] { return masked_mean(mul(erp_token_mixer(x, p), w), Eigen::ArrayXd::Ones(512)); };
  CHECK(gradcheck(fn, {x, p.k_std, p.k_wide}) < 1e-5);
}

TEST_CASE("spherical condition") {
  const RowMatrix c = spherical_condition(3, 5, 8);
  CHECK(c.rows() == 19);
  CHECK(c.cols() == 15);
  // Pixel (1, 2) is the center of a 5x3 raster.
  CHECK((c.block<3, 1>(0, 1 * 5 + 2) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
  for (int p = 0; p < 15; ++p) CHECK(std::abs(c.block<3, 1>(0, p).norm() - 1) < 1e-15);

  // Rows 0 and 2 mirror each other about the equator: sin terms of phi flip sign,
  // cos terms match. Phi rows start after the 8 theta rows.
  const RowMatrix d = spherical_condition(4, 6, 8);
  for (int x = 0; x < 6; ++x) {
    const int top = 0 * 6 + x, bottom = 3 * 6 + x;
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(d(3 + 8 + 2 * k, top) + d(3 + 8 + 2 * k, bottom)) < 1e-15);
      CHECK(std::abs(d(3 + 8 + 2 * k + 1, top) - d(3 + 8 + 2 * k + 1, bottom)) < 1e-15);
    }
  }
}

TEST_CASE("FiLM identity start and fixed modulation") {
  Rng rng(5);
  const Tensor f = random_tensor({2, 3, 4}, rng);
  const Tensor cond = Tensor::constant(spherical_condition(3, 4));
  const int cd = static_cast<int>(cond.shape().rows());
  CHECK(same_bits(film_modulate(f, cond, FilmParams::zero_init(2, cd, rng)).value(), f.value()));

  FilmParams p = FilmParams::zero_init(2, cd, rng);
  Eigen::ArrayXd b2 = Eigen::ArrayXd::Zero(4);
  b2.head(2).setConstant(1.0);
  p.b2 = Tensor::parameter({1, 4, 1}, b2);
  CHECK(same_bits(film_modulate(f, cond, p).value(), (2.0 * f.value()).eval()));

  const FilmParams r = FilmParams::random(2, cd, rng, 8);
  const Tensor fp = random_tensor({2, 3, 4}, rng, true);
  const Tensor w = random_tensor({2, 3, 4}, rng);
  auto fn = [&] { return masked_mean(mul(film_modulate(fp, cond, r), w), Eigen::ArrayXd::Ones(24)); };
  CHECK(gradcheck(fn, {fp, r.w1, r.b1, r.w2, r.b2}) < 1e-5);
}

TEST_CASE("zero injection is an identity") {
  Rng rng(6);
  const Tensor x = random_tensor({3, 2, 5}, rng);
  const Tensor other = random_tensor({4, 2, 5}, rng);
  CHECK(same_bits(inject(x, other, ZeroInjection::zeros(3, 4)).value(), x.value()));
  CHECK_THROWS_AS(inject(x, random_tensor({4, 3, 5}, rng), ZeroInjection::zeros(3, 4)), ContractError);
}

TEST_CASE("attention special cases") {
  Rng rng(7);
  const AttentionParams id = AttentionParams::identity(3);
  const Tensor q = random_tensor({1, 1, 3}, rng);
  const Tensor v = random_tensor({1, 1, 3}, rng);
  const Tensor out = bridge_cross_attention(q, {{v, Stream::Invariant}}, Stream::Invariant, false, id);
  CHECK(((out.value() - v.value()).abs() < 1e-15).all());

  AttentionParams flat = AttentionParams::identity(3);
  flat.wk = Tensor::parameter(RowMatrix::Zero(3, 3));
  const Tensor vals = random_tensor({1, 4, 3}, rng);
  const Tensor qs = random_tensor({1, 2, 3}, rng);
  const Tensor avg = bridge_cross_attention(qs, {{vals, Stream::Variant}}, Stream::Invariant, false, flat);
  const Eigen::RowVectorXd mean = vals.matrix().colwise().mean();
  for (int r = 0; r < 2; ++r) CHECK((avg.matrix().row(r) - mean).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("truncation stops cross-stream value gradients") {
  Rng rng(8);
  const Tensor q = random_tensor({1, 3, 4}, rng, true);
  const Tensor own = random_tensor({1, 2, 4}, rng, true);
  const Tensor other = random_tensor({1, 5, 4}, rng, true);
  const AttentionParams p = AttentionParams::random(4, rng);
  const std::vector<TaskFeature> feats{{own, Stream::Variant}, {other, Stream::Invariant}};
  auto loss = [&](bool truncate) {
    return masked_mean(bridge_cross_attention(q, feats, Stream::Variant, truncate, p), Eigen::ArrayXd::Ones(12));
  };
  const Gradients on = backward(loss(true)), off = backward(loss(false));
  CHECK((on.of(other) == 0).all());
  CHECK(on.of(own).abs().maxCoeff() > 1e-8);
  CHECK(off.of(other).abs().maxCoeff() > 1e-8);
  // Forward values do not depend on truncation.
  CHECK(loss(true).item() == loss(false).item());
}

TEST_CASE("dual-stream toy graph") {
  const DualStreamToy toy = DualStreamToy::make(9);
  const auto on = toy.forward(true), off = toy.forward(false);
  CHECK(max_abs(backward(on.variant), toy.invariant_params()) == 0);
  CHECK(max_abs(backward(on.invariant), toy.variant_params()) == 0);
  CHECK(max_abs(backward(off.variant), toy.invariant_params()) > 1e-8);
  CHECK(max_abs(backward(off.invariant), toy.variant_params()) > 1e-8);
  CHECK(max_abs(backward(on.variant), toy.variant_params()) > 1e-8);
}

TEST_CASE("objective weights") {
  const LossWeights w;
  CHECK(w.main == std::array<double, 3>{1.0, 1.0, 1.0});
  CHECK(w.aux == std::array<double, 3>{0.003, 0.003, 0.003});
  CHECK(kDefaultWarmupSteps == 1000);
  auto s = [](double v) { return Tensor::scalar(v); };
  CHECK(multitask_objective({s(0), s(0), s(0)}, {s(0), s(0), s(0)}, w).item() == 0);
  CHECK(std::abs(multitask_objective({s(1), s(2), s(3)}, {s(10), s(10), s(10)}, w).item() - 6.09) < 1e-12);
  LossWeights bad;
  bad.aux[1] = -1;
  CHECK_THROWS_AS(multitask_objective({s(1), s(2), s(3)}, {s(1), s(1), s(1)}, bad), ConfigError);
}

TEST_CASE("warmup freezes the backbone") {
  DualStreamToy toy = DualStreamToy::make(10);
  std::vector<NamedParameter> all = toy.invariant_params();
  for (auto& p : toy.variant_params()) all.push_back(p);
  std::vector<Eigen::ArrayXd> before;
  for (const auto& p : all) before.push_back(p.tensor.value());

  for (int step = 0; step < 10; ++step) {
    const auto l = toy.forward(true);
    const Gradients g = backward(add(l.invariant, l.variant));
    auto active = warmup_schedule(all, TrainingPhase::Warmup);
    sgd_step(active, g, 0.05);
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].role == ParamRole::Backbone) CHECK_MESSAGE(same_bits(all[i].tensor.value(), before[i]), all[i].name);
    else CHECK_MESSAGE(!same_bits(all[i].tensor.value(), before[i]), all[i].name);
  }

  const auto l = toy.forward(true);
  const Gradients g = backward(add(l.invariant, l.variant));
  auto active = warmup_schedule(all, TrainingPhase::Full);
  CHECK(active.size() == all.size());
  std::vector<Eigen::ArrayXd> mid;
  for (const auto& p : all) mid.push_back(p.tensor.value());
  sgd_step(active, g, 0.05);
  for (std::size_t i = 0; i < all.size(); ++i)
    if (g.of(all[i].tensor).abs().maxCoeff() > 0) CHECK_MESSAGE(!same_bits(all[i].tensor.value(), mid[i]), all[i].name);
}

TEST_CASE("run_gradchecks covers the four mechanisms") {
  const auto reports = run_gradchecks(2, 11);
  REQUIRE(reports.size() == 4);
  for (const auto& r : reports) {
    CHECK(r.instances == 2);
    CHECK_MESSAGE(r.pass(), r.op);
  }
}
