#include "mtpano/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mtpano/erp_nn.hpp"
#include "mtpano/rng.hpp"

namespace mtpano::nn {
namespace {

Eigen::ArrayXd uniform(int n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Eigen::ArrayXd a(n);
  for (int i = 0; i < n; ++i) a[i] = rng.uniform(lo, hi);
  return a;
}

Tensor random_param(Shape s, Rng& rng) { return Tensor::parameter(s, uniform(s.size(), rng)); }

}  // namespace

double gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs, double step) {
  const Gradients grads = backward(loss_fn());
  double worst = 0;
  for (auto& input : inputs) {
    const Eigen::ArrayXd analytic = grads.of(input);
    Eigen::ArrayXd numeric(analytic.size());
    Eigen::ArrayXd& v = input.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = loss_fn().item();
      v[i] = saved - step;
      const double down = loss_fn().item();
      v[i] = saved;
      numeric[i] = (up - down) / (2.0 * step);
    }
    const double scale = std::max({analytic.abs().maxCoeff(), numeric.abs().maxCoeff(), 1e-12});
    worst = std::max(worst, (analytic - numeric).abs().maxCoeff() / scale);
  }
  return worst;
}

std::vector<GradcheckReport> run_gradchecks(int instances, std::uint64_t seed) {
  std::vector<GradcheckReport> reports{{"erp_token_mixer", 0, 0},
                                       {"film_modulate", 0, 0},
                                       {"bridge_cross_attention", 0, 0},
                                       {"multitask_objective", 0, 0}};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(inst)));

    {
      const Tensor x = random_param({4, 8, 16}, rng);
      const MixerParams p{random_param({4, 3, 3}, rng), random_param({4, 3, 9}, rng)};
      Rng proj(rng.next_u64());
      const Tensor w = Tensor::constant({4, 8, 16}, uniform(4 * 8 * 16, proj));
      auto fn = [&] { return masked_mean(mul(erp_token_mixer(x, p), w), Eigen::ArrayXd::Ones(w.shape().size())); };
      reports[0].max_rel_error = std::max(reports[0].max_rel_error, gradcheck(fn, {x, p.k_std, p.k_wide}));
    }
    {
      const int c = 3, h = 4, wd = 6;
      const Tensor f = random_param({c, h, wd}, rng);
      const Tensor cond = Tensor::constant(spherical_condition(h, wd, 4));
      const FilmParams p = FilmParams::random(c, static_cast<int>(cond.shape().rows()), rng, 8, 0.5);
      const Tensor w = Tensor::constant(f.shape(), uniform(f.shape().size(), rng));
      auto fn = [&] { return masked_mean(mul(film_modulate(f, cond, p), w), Eigen::ArrayXd::Ones(w.shape().size())); };
      reports[1].max_rel_error = std::max(reports[1].max_rel_error, gradcheck(fn, {f, p.w1, p.b1, p.w2, p.b2}));
    }
    {
      const int d = 4;
      const Tensor q = random_param({1, 5, d}, rng);
      const Tensor own = random_param({1, 3, d}, rng);
      const Tensor other = random_param({1, 4, d}, rng);
      const AttentionParams p = AttentionParams::random(d, rng);
      const Tensor w = Tensor::constant({1, 5, d}, uniform(5 * d, rng));
      const std::vector<TaskFeature> feats{{own, Stream::Invariant}, {other, Stream::Variant}};
      auto fn = [&] {
        return masked_mean(mul(bridge_cross_attention(q, feats, Stream::Invariant, false, p), w),
                           Eigen::ArrayXd::Ones(5 * d));
      };
      reports[2].max_rel_error =
          std::max(reports[2].max_rel_error, gradcheck(fn, {q, own, other, p.wq, p.wk, p.wv}));
    }
    {
      const int classes = 4, h = 3, wd = 5, pixels = h * wd;
      const Tensor logits = random_param({classes, h, wd}, rng);
      Eigen::ArrayXi labels(pixels);
      for (int i = 0; i < pixels; ++i) labels[i] = static_cast<int>(rng.index(classes));
      Eigen::ArrayXd mask = Eigen::ArrayXd::Ones(pixels);
      mask[rng.index(pixels)] = 0;
      std::vector<Tensor> preds, targets;
      for (int t = 0; t < 5; ++t) {
        preds.push_back(random_param({1, h, wd}, rng));
        targets.push_back(Tensor::constant({1, h, wd}, uniform(pixels, rng)));
      }
      LossWeights weights;
      for (double& m : weights.main) m = rng.uniform(0.1, 2.0);
      for (double& a : weights.aux) a = rng.uniform(0.001, 1.0);
      auto fn = [&] {
        const std::array<Tensor, 3> main{cross_entropy(logits, labels, mask), l1_loss(preds[0], targets[0], mask),
                                         l1_loss(preds[1], targets[1], mask)};
        const std::array<Tensor, 3> aux{l1_loss(preds[2], targets[2], mask), l1_loss(preds[3], targets[3], mask),
                                        l1_loss(preds[4], targets[4], mask)};
        return multitask_objective(main, aux, weights);
      };
      std::vector<Tensor> inputs{logits};
      inputs.insert(inputs.end(), preds.begin(), preds.end());
      reports[3].max_rel_error = std::max(reports[3].max_rel_error, gradcheck(fn, inputs));
    }
  }
  for (auto& r : reports) r.instances = instances;
  return reports;
}

}  // namespace mtpano::nn
