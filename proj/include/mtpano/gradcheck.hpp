#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtpano/autodiff.hpp"

namespace mtpano::nn {

inline constexpr double kGradcheckStep = 1e-6;
inline constexpr double kGradcheckTolerance = 1e-5;

/// Central finite differences against backward() for every entry of every input.
/// Error per input tensor is max|analytic - numeric| / max(max|analytic|, max|numeric|);
/// the maximum over inputs is returned. Inputs are perturbed in place and restored.
double gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs,
                 double step = kGradcheckStep);

struct GradcheckReport {
  std::string op;
  int instances = 0;
  double max_rel_error = 0;
  bool pass() const { return max_rel_error < kGradcheckTolerance; }
};

/// Random double-precision gradient checks of the differentiable mechanisms:
/// erp_token_mixer, film_modulate, bridge_cross_attention and multitask_objective.
std::vector<GradcheckReport> run_gradchecks(int instances, std::uint64_t seed);

}  // namespace mtpano::nn
