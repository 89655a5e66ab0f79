#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtpano/aux_labels.hpp"
#include "mtpano/erp_nn.hpp"
#include "mtpano/pipeline.hpp"

namespace mtpano {

/// Shared settings for every CLI subcommand. The defaults are the published training
/// configuration; the training-only constants are carried for reference and not used by
/// any computation here.
struct ToolConfig {
  std::uint64_t seed = 0;
  int crop_count = kDefaultCropCount;
  PoseRanges ranges;
  int pano_width = 1024;
  int pano_height = 512;
  std::filesystem::path root = ".";
  std::vector<Task> tasks{Task::Semantic, Task::Depth, Task::Normal};
  nn::LossWeights loss_weights;
  int warmup_steps = nn::kDefaultWarmupSteps;
  double edge_tau = kDefaultEdgeThreshold;
  int edge_border_px = kDefaultBorderPx;
  std::filesystem::path attribute_pool;  // empty: built-in pool
  int jobs = 0;                          // 0: logical cores
  bool emit_vis = false;

  // Reference only.
  int train_iterations = 100000;
  double base_learning_rate = 2e-5;
  double weight_decay = 5e-6;
  double poly_power = 0.9;
  int batch_size_per_gpu = 4;
  int head_embed_dim = 512;

  int resolved_jobs() const;
};

/// Flat `key = value` lines; '#' comments; `include <path>` (relative to the including
/// file) pulls in another file whose keys are overridden by later lines. Include cycles
/// are an error. Returns keys in final-assignment order.
std::map<std::string, std::string> load_key_values(const std::filesystem::path& path);

/// Sets one key; throws ConfigError for unknown keys or malformed values.
void apply_config_value(ToolConfig& config, const std::string& key, const std::string& value);

ToolConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in the file format accepted by load_config.
std::string to_key_values(const ToolConfig& config);

std::vector<Task> parse_task_list(const std::string& csv);

}  // namespace mtpano
