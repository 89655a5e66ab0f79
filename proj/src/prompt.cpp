#include "mtpano/prompt.hpp"

#include <fstream>
#include <sstream>

#include "mtpano/error.hpp"
#include "mtpano/rng.hpp"

namespace mtpano {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const char* kDefaultPool = R"(
indoor: modern kitchen
indoor: cozy living room
indoor: hotel lobby
indoor: open-plan office
indoor: public library reading room
indoor: museum gallery
indoor: industrial warehouse
indoor: bedroom with large windows
outdoor: dense pine forest
outdoor: city plaza
outdoor: rural farmland
outdoor: ancient temple courtyard
outdoor: mountain lake shore
outdoor: busy downtown street
lighting: golden hour sunset
lighting: cinematic lighting
lighting: blue hour twilight
lighting: overcast daylight
lighting: soft morning light
details: wooden flooring
details: exposed brick walls
details: lush vegetation
details: marble surfaces
details: scattered furniture
quality: photorealistic
quality: 8k
quality: masterpiece
quality: highly detailed
)";

}  // namespace

void AttributePool::validate() const {
  auto check = [](const std::vector<std::string>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("attribute pool category '") + name + "' is empty");
  };
  check(indoor, "indoor");
  check(outdoor, "outdoor");
  check(lighting, "lighting");
  check(details, "details");
  check(quality, "quality");
}

AttributePool parse_attribute_pool(const std::string& text) {
  AttributePool pool;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw ParseError("attribute pool line " + std::to_string(line_no) + ": expected 'category: value'");
    }
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (value.empty()) throw ParseError("attribute pool line " + std::to_string(line_no) + ": empty value");
    if (key == "indoor") pool.indoor.push_back(value);
    else if (key == "outdoor") pool.outdoor.push_back(value);
    else if (key == "lighting") pool.lighting.push_back(value);
    else if (key == "details") pool.details.push_back(value);
    else if (key == "quality") pool.quality.push_back(value);
    else throw ParseError("attribute pool line " + std::to_string(line_no) + ": unknown category '" + key + "'");
  }
  return pool;
}

AttributePool default_attribute_pool() { return parse_attribute_pool(kDefaultPool); }

AttributePool load_attribute_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open attribute pool: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_attribute_pool(buf.str());
}

std::string render_prompt(const PromptSpec& spec) {
  std::string s = "A ";
  if (spec.lighting) s += *spec.lighting + " ";
  s += "view of a " + spec.scene;
  if (spec.details) s += " with " + *spec.details;
  if (spec.quality) s += ", " + *spec.quality;
  s += ", 360 panorama.";
  return s;
}

PromptDraw build_prompt(std::uint64_t seed, const AttributePool& pool) {
  pool.validate();
  Rng rng(seed);
  PromptDraw draw;
  PromptSpec& spec = draw.spec;
  spec.domain = rng.bernoulli(kIndoorProbability) ? SceneDomain::Indoor : SceneDomain::Outdoor;
  const auto& scenes = spec.domain == SceneDomain::Indoor ? pool.indoor : pool.outdoor;
  spec.scene = scenes[rng.index(scenes.size())];
  auto maybe = [&](const std::vector<std::string>& options) -> std::optional<std::string> {
    if (!rng.bernoulli(kModifierProbability)) return std::nullopt;
    return options[rng.index(options.size())];
  };
  spec.lighting = maybe(pool.lighting);
  spec.details = maybe(pool.details);
  spec.quality = maybe(pool.quality);
  draw.text = render_prompt(spec);
  return draw;
}

}  // namespace mtpano
