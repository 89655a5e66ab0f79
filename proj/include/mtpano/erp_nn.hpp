#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mtpano/autodiff.hpp"
#include "mtpano/rng.hpp"

namespace mtpano::nn {

// ---------------------------------------------------------------------------------------
// ERP token mixer

/// Per-channel kernels of the latitude-adaptive mixer: k_std is (C, 3, 3), k_wide (C, 3, 9).
struct MixerParams {
  Tensor k_std;
  Tensor k_wide;

  static MixerParams delta(int channels);
  static MixerParams random(int channels, Rng& rng, double scale = 0.5);
};

/// Fusion weight |sin(phi)|.
double latitude_weight(double phi);

/// Latitude of each of `height` rows under the pixel-center ERP convention.
Eigen::ArrayXd row_latitudes(int height, int width);

/// (1 - w(phi)) * (k_std * x) + w(phi) * (k_wide * x) per row. `latitudes` overrides the
/// per-row phi (one entry per row); by default rows follow the ERP convention. Requires
/// width >= 9.
Tensor erp_token_mixer(const Tensor& x, const MixerParams& params,
                       const std::optional<Eigen::ArrayXd>& latitudes = std::nullopt);

// ---------------------------------------------------------------------------------------
// Spherical FiLM

inline constexpr int kDefaultEmbeddingDim = 8;
inline constexpr int kFilmHidden = 32;

/// Condition matrix (3 + 2 * embed_dim) x (h * w), one column per pixel in row-major pixel
/// order: film-convention ray direction, then sin/cos(2^k theta) for k < embed_dim / 2,
/// then the same for phi.
RowMatrix spherical_condition(int h, int w, int embed_dim = kDefaultEmbeddingDim);

/// One-hidden-layer tanh MLP from the condition vector to per-pixel (gamma, beta).
struct FilmParams {
  Tensor w1;  // hidden x cond_dim
  Tensor b1;  // hidden x 1
  Tensor w2;  // 2C x hidden; rows [0, C) produce gamma, [C, 2C) beta
  Tensor b2;  // 2C x 1

  /// Zero-initialized output layer, random hidden layer: the modulation starts as identity.
  static FilmParams zero_init(int channels, int cond_dim, Rng& rng, int hidden = kFilmHidden);
  static FilmParams random(int channels, int cond_dim, Rng& rng, int hidden = kFilmHidden, double scale = 0.3);
};

/// F_var = (1 + gamma) * f + beta with (gamma, beta) = MLP(cond).
Tensor film_modulate(const Tensor& f, const Tensor& cond, const FilmParams& params);

/// Zero-initialized injection: x + reshape(W * injected), W is (C_x x C_injected).
struct ZeroInjection {
  Tensor weight;

  static ZeroInjection zeros(int out_channels, int in_channels);
};

Tensor inject(const Tensor& x, const Tensor& injected, const ZeroInjection& params);

// ---------------------------------------------------------------------------------------
// Bridge

enum class Stream { Invariant, Variant };

struct TaskFeature {
  Tensor tokens;  // (1, n_i, d)
  Stream origin = Stream::Invariant;
};

/// Single-head projections; identity by default.
struct AttentionParams {
  Tensor wq, wk, wv;  // d x d

  static AttentionParams identity(int dim, bool trainable = true);
  static AttentionParams random(int dim, Rng& rng, double scale = 0.4);
};

/// Queries from `query`, keys/values from the row-concatenation of every task feature.
/// With truncate, features whose origin differs from query_stream go through
/// stop_gradient. Scaled dot-product, softmax over keys. Output is (1, n_q, d).
Tensor bridge_cross_attention(const Tensor& query, const std::vector<TaskFeature>& task_feats,
                              Stream query_stream, bool truncate, const AttentionParams& params);

// ---------------------------------------------------------------------------------------
// Objective and schedule

inline constexpr double kDefaultMainWeight = 1.0;
inline constexpr double kDefaultAuxWeight = 0.003;
inline constexpr int kDefaultWarmupSteps = 1000;

/// Main tasks: semantic, depth, normal. Auxiliary tasks: gradient, edf, point map.
struct LossWeights {
  std::array<double, 3> main{kDefaultMainWeight, kDefaultMainWeight, kDefaultMainWeight};
  std::array<double, 3> aux{kDefaultAuxWeight, kDefaultAuxWeight, kDefaultAuxWeight};
  double geo = 0.0;  // reserved; the geometry regulariser is not part of this library

  void validate() const;
};

Tensor multitask_objective(const std::array<Tensor, 3>& main_losses, const std::array<Tensor, 3>& aux_losses,
                           const LossWeights& weights);

enum class ParamRole { Backbone, Head };
enum class TrainingPhase { Warmup, Full };

struct NamedParameter {
  std::string name;
  Tensor tensor;
  ParamRole role = ParamRole::Head;
};

/// Warmup: head parameters only. Full: everything.
std::vector<NamedParameter> warmup_schedule(const std::vector<NamedParameter>& params, TrainingPhase phase);

/// Plain gradient descent on the given parameters.
void sgd_step(std::vector<NamedParameter>& params, const Gradients& grads, double learning_rate);

// ---------------------------------------------------------------------------------------
// Dual-stream toy graph

/// Small two-stream network wired like the bridge: each stream mixes the input (the variant
/// stream adds spherical FiLM), produces task tokens through a head, and queries the
/// concatenated task tokens of both streams.
struct DualStreamToy {
  int channels = 2, height = 4, width = 12, dim = 2;

  Tensor input;
  Tensor cond;
  Tensor target_inv, target_var;

  MixerParams inv_mixer, var_mixer;
  FilmParams film;
  Tensor inv_head, var_head;  // d x d
  AttentionParams inv_attn, var_attn;
  Tensor inv_out, var_out;  // d x d

  struct Losses {
    Tensor invariant;
    Tensor variant;
  };

  static DualStreamToy make(std::uint64_t seed);
  Losses forward(bool truncate) const;
  std::vector<NamedParameter> invariant_params() const;
  std::vector<NamedParameter> variant_params() const;
};

}  // namespace mtpano::nn
