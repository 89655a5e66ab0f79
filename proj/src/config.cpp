#include "mtpano/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace mtpano {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void load_into(const std::filesystem::path& path, std::map<std::string, std::string>& out,
               std::set<std::filesystem::path>& active) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  if (!active.insert(canonical).second) throw ConfigError("config include cycle at " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.rfind("include", 0) == 0 && (line.size() == 7 || line[7] == ' ' || line[7] == '\t')) {
      const std::string target = trim(line.substr(7));
      if (target.empty()) throw ConfigError(where + ": include needs a path");
      std::filesystem::path inc = target;
      if (inc.is_relative()) inc = path.parent_path() / inc;
      load_into(inc, out, active);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  active.erase(canonical);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': bad number '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

int ToolConfig::resolved_jobs() const {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::map<std::string, std::string> load_key_values(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::set<std::filesystem::path> active;
  load_into(path, out, active);
  return out;
}

std::vector<Task> parse_task_list(const std::string& csv) {
  std::vector<Task> tasks;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) tasks.push_back(task_from_string(item));
  }
  if (tasks.empty()) throw ConfigError("task list is empty");
  return tasks;
}

void apply_config_value(ToolConfig& c, const std::string& key, const std::string& value) {
  auto d = [&] { return parse_number<double>(key, value); };
  auto i = [&] { return parse_number<int>(key, value); };
  if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "crop_count" || key == "n") c.crop_count = i();
  else if (key == "fov_min") c.ranges.fov_deg.lo = d();
  else if (key == "fov_max") c.ranges.fov_deg.hi = d();
  else if (key == "yaw_min") c.ranges.yaw_deg.lo = d();
  else if (key == "yaw_max") c.ranges.yaw_deg.hi = d();
  else if (key == "pitch_min") c.ranges.pitch_deg.lo = d();
  else if (key == "pitch_max") c.ranges.pitch_deg.hi = d();
  else if (key == "patch_width") c.ranges.patch_width = i();
  else if (key == "patch_height") c.ranges.patch_height = i();
  else if (key == "pano_width") c.pano_width = i();
  else if (key == "pano_height") c.pano_height = i();
  else if (key == "root") c.root = value;
  else if (key == "tasks") c.tasks = parse_task_list(value);
  else if (key == "lambda_semantic") c.loss_weights.main[0] = d();
  else if (key == "lambda_depth") c.loss_weights.main[1] = d();
  else if (key == "lambda_normal") c.loss_weights.main[2] = d();
  else if (key == "lambda_gradient") c.loss_weights.aux[0] = d();
  else if (key == "lambda_edf") c.loss_weights.aux[1] = d();
  else if (key == "lambda_pointmap") c.loss_weights.aux[2] = d();
  else if (key == "lambda_geo") c.loss_weights.geo = d();
  else if (key == "warmup_steps") c.warmup_steps = i();
  else if (key == "edge_tau") c.edge_tau = d();
  else if (key == "edge_border_px") c.edge_border_px = i();
  else if (key == "attribute_pool") c.attribute_pool = value;
  else if (key == "jobs") c.jobs = i();
  else if (key == "emit_vis") c.emit_vis = parse_bool(key, value);
  else if (key == "train_iterations") c.train_iterations = i();
  else if (key == "base_learning_rate") c.base_learning_rate = d();
  else if (key == "weight_decay") c.weight_decay = d();
  else if (key == "poly_power") c.poly_power = d();
  else if (key == "batch_size_per_gpu") c.batch_size_per_gpu = i();
  else if (key == "head_embed_dim") c.head_embed_dim = i();
  else throw ConfigError("unknown config key '" + key + "'");
}

ToolConfig load_config(const std::filesystem::path& path) {
  ToolConfig c;
  for (const auto& [k, v] : load_key_values(path)) {
    try {
      apply_config_value(c, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  c.loss_weights.validate();
  return c;
}

std::string to_key_values(const ToolConfig& c) {
  std::ostringstream s;
  std::string tasks;
  for (Task t : c.tasks) tasks += (tasks.empty() ? "" : ",") + std::string(to_string(t));
  s << "seed = " << c.seed << "\n"
    << "crop_count = " << c.crop_count << "\n"
    << "fov_min = " << format_double(c.ranges.fov_deg.lo) << "\n"
    << "fov_max = " << format_double(c.ranges.fov_deg.hi) << "\n"
    << "yaw_min = " << format_double(c.ranges.yaw_deg.lo) << "\n"
    << "yaw_max = " << format_double(c.ranges.yaw_deg.hi) << "\n"
    << "pitch_min = " << format_double(c.ranges.pitch_deg.lo) << "\n"
    << "pitch_max = " << format_double(c.ranges.pitch_deg.hi) << "\n"
    << "patch_width = " << c.ranges.patch_width << "\n"
    << "patch_height = " << c.ranges.patch_height << "\n"
    << "pano_width = " << c.pano_width << "\n"
    << "pano_height = " << c.pano_height << "\n"
    << "root = " << c.root.string() << "\n"
    << "tasks = " << tasks << "\n"
    << "lambda_semantic = " << format_double(c.loss_weights.main[0]) << "\n"
    << "lambda_depth = " << format_double(c.loss_weights.main[1]) << "\n"
    << "lambda_normal = " << format_double(c.loss_weights.main[2]) << "\n"
    << "lambda_gradient = " << format_double(c.loss_weights.aux[0]) << "\n"
    << "lambda_edf = " << format_double(c.loss_weights.aux[1]) << "\n"
    << "lambda_pointmap = " << format_double(c.loss_weights.aux[2]) << "\n"
    << "lambda_geo = " << format_double(c.loss_weights.geo) << "\n"
    << "warmup_steps = " << c.warmup_steps << "\n"
    << "edge_tau = " << format_double(c.edge_tau) << "\n"
    << "edge_border_px = " << c.edge_border_px << "\n"
    << "attribute_pool = " << c.attribute_pool.string() << "\n"
    << "jobs = " << c.jobs << "\n"
    << "emit_vis = " << (c.emit_vis ? "true" : "false") << "\n"
    << "train_iterations = " << c.train_iterations << "\n"
    << "base_learning_rate = " << format_double(c.base_learning_rate) << "\n"
    << "weight_decay = " << format_double(c.weight_decay) << "\n"
    << "poly_power = " << format_double(c.poly_power) << "\n"
    << "batch_size_per_gpu = " << c.batch_size_per_gpu << "\n"
    << "head_embed_dim = " << c.head_embed_dim << "\n";
  return s.str();
}

}  // namespace mtpano
