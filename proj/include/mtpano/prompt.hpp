#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mtpano {

enum class SceneDomain { Indoor, Outdoor };

struct AttributePool {
  std::vector<std::string> indoor;
  std::vector<std::string> outdoor;
  std::vector<std::string> lighting;
  std::vector<std::string> details;
  std::vector<std::string> quality;

  void validate() const;
};

/// The pool shipped in data/attribute_pool.txt.
AttributePool default_attribute_pool();
/// Text format: one `category: value` per line, '#' starts a comment. Categories are
/// indoor, outdoor, lighting, details, quality.
AttributePool parse_attribute_pool(const std::string& text);
AttributePool load_attribute_pool(const std::filesystem::path& path);

struct PromptSpec {
  std::string scene;
  std::optional<std::string> lighting;
  std::optional<std::string> details;
  std::optional<std::string> quality;
  SceneDomain domain = SceneDomain::Indoor;
};

struct PromptDraw {
  PromptSpec spec;
  std::string text;
};

inline constexpr double kIndoorProbability = 0.6;
inline constexpr double kModifierProbability = 0.5;

/// "A [L] view of a [S] with [D], [Q], 360 panorama." with absent slots dropped together
/// with their connectives.
std::string render_prompt(const PromptSpec& spec);

/// Draw order: domain, scene, then (trigger, pick) for lighting, details and quality.
PromptDraw build_prompt(std::uint64_t seed, const AttributePool& pool);

}  // namespace mtpano
