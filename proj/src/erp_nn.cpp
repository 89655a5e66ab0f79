#include "mtpano/erp_nn.hpp"

#include <cmath>

#include "mtpano/error.hpp"
#include "mtpano/sphere.hpp"

namespace mtpano::nn {
namespace {

Eigen::ArrayXd random_array(int n, Rng& rng, double scale) {
  Eigen::ArrayXd a(n);
  for (int i = 0; i < n; ++i) a[i] = scale * (2.0 * rng.uniform01() - 1.0);
  return a;
}

Tensor random_param(Shape s, Rng& rng, double scale) { return Tensor::parameter(s, random_array(s.size(), rng, scale)); }

Eigen::ArrayXd delta_kernel(int channels, int kh, int kw) {
  Eigen::ArrayXd k = Eigen::ArrayXd::Zero(channels * kh * kw);
  for (int c = 0; c < channels; ++c) k[(c * kh + kh / 2) * kw + kw / 2] = 1.0;
  return k;
}

/// (C, H, W) feature map -> (1, H*W, C) tokens.
Tensor to_tokens(const Tensor& f) {
  const Shape s = f.shape();
  return transpose(reshape(f, {1, s.c, s.h * s.w}));
}

}  // namespace

MixerParams MixerParams::delta(int channels) {
  return {Tensor::parameter({channels, 3, 3}, delta_kernel(channels, 3, 3)),
          Tensor::parameter({channels, 3, 9}, delta_kernel(channels, 3, 9))};
}

MixerParams MixerParams::random(int channels, Rng& rng, double scale) {
  return {random_param({channels, 3, 3}, rng, scale), random_param({channels, 3, 9}, rng, scale)};
}

double latitude_weight(double phi) { return std::abs(std::sin(phi)); }

Eigen::ArrayXd row_latitudes(int height, int width) {
  Eigen::ArrayXd phi(height);
  for (int y = 0; y < height; ++y) phi[y] = pixel_to_spherical<double>(0.0, y, width, height).phi;
  return phi;
}

Tensor erp_token_mixer(const Tensor& x, const MixerParams& params, const std::optional<Eigen::ArrayXd>& latitudes) {
  const Shape s = x.shape();
  if (s.w < 9) throw ContractError("erp_token_mixer: width must be >= 9 for the 3x9 kernel");
  if (!(params.k_std.shape() == Shape{s.c, 3, 3}) || !(params.k_wide.shape() == Shape{s.c, 3, 9})) {
    throw ContractError("erp_token_mixer: kernels must be (C, 3, 3) and (C, 3, 9)");
  }
  const Eigen::ArrayXd phi = latitudes ? *latitudes : row_latitudes(s.h, s.w);
  if (phi.size() != s.h) throw ContractError("erp_token_mixer: one latitude per row required");

  Eigen::ArrayXd wide(s.size()), narrow(s.size());
  for (int c = 0; c < s.c; ++c)
    for (int i = 0; i < s.h; ++i) {
      const double w = latitude_weight(phi[i]);
      wide.segment((c * s.h + i) * s.w, s.w).setConstant(w);
      narrow.segment((c * s.h + i) * s.w, s.w).setConstant(1.0 - w);
    }
  const Tensor a = depthwise_conv2d(x, params.k_std);
  const Tensor b = depthwise_conv2d(x, params.k_wide);
  return add(mul(Tensor::constant(s, std::move(narrow)), a), mul(Tensor::constant(s, std::move(wide)), b));
}

RowMatrix spherical_condition(int h, int w, int embed_dim) {
  if (embed_dim < 0 || embed_dim % 2 != 0) throw ContractError("spherical_condition: embed_dim must be even");
  const int dim = 3 + 2 * embed_dim;
  RowMatrix cond(dim, h * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      const auto c = pixel_to_spherical<double>(x, y, w, h);
      cond.block<3, 1>(0, p) = ray_direction(c, RayConvention::Film);
      int row = 3;
      for (const double angle : {c.theta, c.phi}) {
        for (int k = 0; k < embed_dim / 2; ++k) {
          const double freq = std::ldexp(1.0, k);
          cond(row++, p) = std::sin(freq * angle);
          cond(row++, p) = std::cos(freq * angle);
        }
      }
    }
  }
  return cond;
}

FilmParams FilmParams::zero_init(int channels, int cond_dim, Rng& rng, int hidden) {
  FilmParams p;
  p.w1 = random_param({1, hidden, cond_dim}, rng, 1.0 / std::sqrt(static_cast<double>(cond_dim)));
  p.b1 = Tensor::parameter({1, hidden, 1}, Eigen::ArrayXd::Zero(hidden));
  p.w2 = Tensor::parameter({1, 2 * channels, hidden}, Eigen::ArrayXd::Zero(2 * channels * hidden));
  p.b2 = Tensor::parameter({1, 2 * channels, 1}, Eigen::ArrayXd::Zero(2 * channels));
  return p;
}

FilmParams FilmParams::random(int channels, int cond_dim, Rng& rng, int hidden, double scale) {
  FilmParams p;
  p.w1 = random_param({1, hidden, cond_dim}, rng, scale);
  p.b1 = random_param({1, hidden, 1}, rng, scale);
  p.w2 = random_param({1, 2 * channels, hidden}, rng, scale);
  p.b2 = random_param({1, 2 * channels, 1}, rng, scale);
  return p;
}

Tensor film_modulate(const Tensor& f, const Tensor& cond, const FilmParams& params) {
  const Shape s = f.shape();
  if (cond.shape().cols() != s.h * s.w) throw ContractError("film_modulate: condition pixels differ from feature map");
  if (params.w2.shape().rows() != 2 * s.c) throw ContractError("film_modulate: output layer must produce 2C rows");
  const Tensor hidden = tanh(add_bias(matmul(params.w1, cond), params.b1));
  const Tensor gb = add_bias(matmul(params.w2, hidden), params.b2);
  const Tensor gamma = reshape(slice_rows(gb, 0, s.c), s);
  const Tensor beta = reshape(slice_rows(gb, s.c, s.c), s);
  return affine_modulate(f, gamma, beta);
}

ZeroInjection ZeroInjection::zeros(int out_channels, int in_channels) {
  return {Tensor::parameter({1, out_channels, in_channels}, Eigen::ArrayXd::Zero(out_channels * in_channels))};
}

Tensor inject(const Tensor& x, const Tensor& injected, const ZeroInjection& params) {
  const Shape xs = x.shape(), is = injected.shape();
  if (xs.h != is.h || xs.w != is.w) throw ContractError("inject: spatial dims differ");
  const Tensor flat = reshape(injected, {1, is.c, is.h * is.w});
  return add(x, reshape(matmul(params.weight, flat), xs));
}

AttentionParams AttentionParams::identity(int dim, bool trainable) {
  const RowMatrix eye = RowMatrix::Identity(dim, dim);
  auto make = [&] { return trainable ? Tensor::parameter(eye) : Tensor::constant(eye); };
  return {make(), make(), make()};
}

AttentionParams AttentionParams::random(int dim, Rng& rng, double scale) {
  auto make = [&] {
    Eigen::ArrayXd v = random_array(dim * dim, rng, scale);
    for (int i = 0; i < dim; ++i) v[i * dim + i] += 1.0;
    return Tensor::parameter({1, dim, dim}, std::move(v));
  };
  AttentionParams p;
  p.wq = make();
  p.wk = make();
  p.wv = make();
  return p;
}

Tensor bridge_cross_attention(const Tensor& query, const std::vector<TaskFeature>& task_feats, Stream query_stream,
                              bool truncate, const AttentionParams& params) {
  if (task_feats.empty()) throw ContractError("bridge_cross_attention: no task features");
  const int d = query.shape().cols();
  std::vector<Tensor> parts;
  parts.reserve(task_feats.size());
  for (const auto& tf : task_feats) {
    if (tf.tokens.shape().cols() != d) {
      throw ContractError("bridge_cross_attention: task feature dim " + std::to_string(tf.tokens.shape().cols()) +
                          " differs from query dim " + std::to_string(d));
    }
    parts.push_back(truncate && tf.origin != query_stream ? stop_gradient(tf.tokens) : tf.tokens);
  }
  const Tensor kv = concat_rows(parts);
  const Tensor q = matmul(query, params.wq);
  const Tensor k = matmul(kv, params.wk);
  const Tensor v = matmul(kv, params.wv);
  const Tensor attn = softmax_rows(scale(matmul(q, k, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(d))));
  return matmul(attn, v);
}

void LossWeights::validate() const {
  for (double w : main)
    if (!(w >= 0)) throw ConfigError("main task loss weights must be >= 0");
  for (double w : aux)
    if (!(w >= 0)) throw ConfigError("auxiliary loss weights must be >= 0");
  if (!(geo >= 0)) throw ConfigError("geometry loss weight must be >= 0");
}

Tensor multitask_objective(const std::array<Tensor, 3>& main_losses, const std::array<Tensor, 3>& aux_losses,
                           const LossWeights& weights) {
  weights.validate();
  Tensor total = Tensor::scalar(0.0);
  for (int t = 0; t < 3; ++t) {
    if (main_losses[t].shape().size() != 1 || aux_losses[t].shape().size() != 1) {
      throw ContractError("multitask_objective: losses must be scalars");
    }
    total = add(total, scale(main_losses[t], weights.main[t]));
  }
  for (int t = 0; t < 3; ++t) total = add(total, scale(aux_losses[t], weights.aux[t]));
  return total;
}

std::vector<NamedParameter> warmup_schedule(const std::vector<NamedParameter>& params, TrainingPhase phase) {
  if (phase == TrainingPhase::Full) return params;
  std::vector<NamedParameter> heads;
  for (const auto& p : params)
    if (p.role == ParamRole::Head) heads.push_back(p);
  return heads;
}

void sgd_step(std::vector<NamedParameter>& params, const Gradients& grads, double learning_rate) {
  for (auto& p : params) p.tensor.mutable_value() -= learning_rate * grads.of(p.tensor);
}

DualStreamToy DualStreamToy::make(std::uint64_t seed) {
  Rng rng(seed);
  DualStreamToy t;
  t.channels = 2;
  t.height = 4;
  t.width = 12;
  t.dim = t.channels;
  const Shape fs{t.channels, t.height, t.width};
  const int pixels = t.height * t.width;
  t.input = Tensor::constant(fs, random_array(fs.size(), rng, 1.0));
  t.cond = Tensor::constant(spherical_condition(t.height, t.width, 4));
  t.target_inv = Tensor::constant({1, pixels, t.dim}, random_array(pixels * t.dim, rng, 1.0));
  t.target_var = Tensor::constant({1, pixels, t.dim}, random_array(pixels * t.dim, rng, 1.0));
  t.inv_mixer = MixerParams::random(t.channels, rng);
  t.var_mixer = MixerParams::random(t.channels, rng);
  t.film = FilmParams::random(t.channels, static_cast<int>(t.cond.shape().rows()), rng, 8);
  t.inv_head = random_param({1, t.dim, t.dim}, rng, 0.8);
  t.var_head = random_param({1, t.dim, t.dim}, rng, 0.8);
  t.inv_attn = AttentionParams::random(t.dim, rng);
  t.var_attn = AttentionParams::random(t.dim, rng);
  t.inv_out = random_param({1, t.dim, t.dim}, rng, 0.8);
  t.var_out = random_param({1, t.dim, t.dim}, rng, 0.8);
  return t;
}

DualStreamToy::Losses DualStreamToy::forward(bool truncate) const {
  const int pixels = height * width;
  const Eigen::ArrayXd all = Eigen::ArrayXd::Ones(pixels * dim);
  const Tensor f_inv = to_tokens(erp_token_mixer(input, inv_mixer));
  const Tensor f_var = to_tokens(film_modulate(erp_token_mixer(input, var_mixer), cond, film));
  const Tensor inv_task = tanh(matmul(f_inv, inv_head));
  const Tensor var_task = tanh(matmul(f_var, var_head));
  const std::vector<TaskFeature> feats{{inv_task, Stream::Invariant}, {var_task, Stream::Variant}};
  const Tensor bridge_inv = bridge_cross_attention(f_inv, feats, Stream::Invariant, truncate, inv_attn);
  const Tensor bridge_var = bridge_cross_attention(f_var, feats, Stream::Variant, truncate, var_attn);
  return {l1_loss(matmul(bridge_inv, inv_out), target_inv, all), l1_loss(matmul(bridge_var, var_out), target_var, all)};
}

std::vector<NamedParameter> DualStreamToy::invariant_params() const {
  return {{"inv.mixer.k_std", inv_mixer.k_std, ParamRole::Backbone},
          {"inv.mixer.k_wide", inv_mixer.k_wide, ParamRole::Backbone},
          {"inv.head", inv_head, ParamRole::Head},
          {"inv.attn.wq", inv_attn.wq, ParamRole::Head},
          {"inv.attn.wk", inv_attn.wk, ParamRole::Head},
          {"inv.attn.wv", inv_attn.wv, ParamRole::Head},
          {"inv.out", inv_out, ParamRole::Head}};
}

std::vector<NamedParameter> DualStreamToy::variant_params() const {
  return {{"var.mixer.k_std", var_mixer.k_std, ParamRole::Backbone},
          {"var.mixer.k_wide", var_mixer.k_wide, ParamRole::Backbone},
          {"var.film.w1", film.w1, ParamRole::Backbone},
          {"var.film.b1", film.b1, ParamRole::Backbone},
          {"var.film.w2", film.w2, ParamRole::Backbone},
          {"var.film.b2", film.b2, ParamRole::Backbone},
          {"var.head", var_head, ParamRole::Head},
          {"var.attn.wq", var_attn.wq, ParamRole::Head},
          {"var.attn.wk", var_attn.wk, ParamRole::Head},
          {"var.attn.wv", var_attn.wv, ParamRole::Head},
          {"var.out", var_out, ParamRole::Head}};
}

}  // namespace mtpano::nn
