#include "mtpano/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mtpano/codec.hpp"
#include "mtpano/rng.hpp"

namespace mtpano {

using ordered_json = nlohmann::ordered_json;

void AngleRange::validate(const char* name) const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    std::ostringstream msg;
    msg << name << " range [" << lo << ", " << hi << "] is empty";
    throw ConfigError(msg.str());
  }
}

double AngleRange::draw(double unit) const {
  if (lo == hi) return lo;
  const double v = lo + (hi - lo) * unit;
  if (half_open && v >= hi) return std::nextafter(hi, lo);
  return std::min(v, hi);
}

bool AngleRange::contains(double v) const {
  if (lo == hi) return v == lo;
  return v >= lo && (half_open ? v < hi : v <= hi);
}

CameraPose CropPose::camera() const {
  CameraPose p;
  p.yaw = deg_to_rad(yaw_deg);
  p.pitch = deg_to_rad(pitch_deg);
  p.fov = deg_to_rad(fov_deg);
  p.width = patch_w;
  p.height = patch_h;
  return p;
}

CropManifest sample_camera_poses(int n, std::uint64_t seed, const PoseRanges& ranges,
                                 std::string pano_id, int pano_width, int pano_height) {
  if (n < 1) throw ConfigError("crop count must be >= 1");
  ranges.fov_deg.validate("fov");
  ranges.yaw_deg.validate("yaw");
  ranges.pitch_deg.validate("pitch");
  if (!(ranges.fov_deg.lo > 0 && ranges.fov_deg.hi < 180)) throw ConfigError("fov range must lie in (0, 180) degrees");
  if (ranges.patch_width < 2 || ranges.patch_height < 2) throw ConfigError("patch size must be >= 2");

  CropManifest m;
  m.pano_id = std::move(pano_id);
  m.pano_width = pano_width;
  m.pano_height = pano_height;
  m.seed = seed;
  Rng rng(seed);
  m.crops.reserve(n);
  for (int i = 0; i < n; ++i) {
    CropPose c;
    c.index = i;
    c.fov_deg = ranges.fov_deg.draw(rng.uniform01());
    c.yaw_deg = ranges.yaw_deg.draw(rng.uniform01());
    c.pitch_deg = ranges.pitch_deg.draw(rng.uniform01());
    c.patch_w = ranges.patch_width;
    c.patch_h = ranges.patch_height;
    m.crops.push_back(c);
  }
  return m;
}

namespace {

constexpr const char* kManifestFormat = "mtpano-crop-manifest";

template <typename T>
T field(const ordered_json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

void warn_unknown(const ordered_json& obj, std::initializer_list<const char*> known,
                  const std::string& where, std::vector<std::string>* warnings) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool listed = std::any_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; });
    if (!listed && warnings) warnings->push_back(where + ": ignoring unknown field '" + it.key() + "'");
  }
}

}  // namespace

std::string manifest_to_string(const CropManifest& m) {
  ordered_json j;
  j["format"] = kManifestFormat;
  j["version"] = m.version;
  j["pano_id"] = m.pano_id;
  j["pano_width"] = m.pano_width;
  j["pano_height"] = m.pano_height;
  j["seed"] = m.seed;
  j["crops"] = ordered_json::array();
  for (const auto& c : m.crops) {
    j["crops"].push_back({{"index", c.index},
                          {"yaw_deg", c.yaw_deg},
                          {"pitch_deg", c.pitch_deg},
                          {"fov_deg", c.fov_deg},
                          {"patch_w", c.patch_w},
                          {"patch_h", c.patch_h}});
  }
  return j.dump(2) + "\n";
}

CropManifest manifest_from_string(const std::string& text, std::vector<std::string>* warnings) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("manifest: top level must be an object");
  if (field<std::string>(j, "format", "manifest") != kManifestFormat) {
    throw ParseError("manifest.format: expected '" + std::string(kManifestFormat) + "'");
  }
  CropManifest m;
  m.version = field<int>(j, "version", "manifest");
  if (m.version > CropManifest::kVersion) {
    throw ParseError("manifest.version: " + std::to_string(m.version) + " is newer than supported " +
                     std::to_string(CropManifest::kVersion));
  }
  warn_unknown(j, {"format", "version", "pano_id", "pano_width", "pano_height", "seed", "crops"}, "manifest", warnings);
  m.pano_id = field<std::string>(j, "pano_id", "manifest");
  m.pano_width = field<int>(j, "pano_width", "manifest");
  m.pano_height = field<int>(j, "pano_height", "manifest");
  m.seed = field<std::uint64_t>(j, "seed", "manifest");
  const auto crops = field<ordered_json>(j, "crops", "manifest");
  if (!crops.is_array()) throw ParseError("manifest.crops: expected an array");
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const std::string where = "manifest.crops[" + std::to_string(i) + "]";
    const auto& cj = crops[i];
    if (!cj.is_object()) throw ParseError(where + ": expected an object");
    warn_unknown(cj, {"index", "yaw_deg", "pitch_deg", "fov_deg", "patch_w", "patch_h"}, where, warnings);
    CropPose c;
    c.index = field<int>(cj, "index", where);
    c.yaw_deg = field<double>(cj, "yaw_deg", where);
    c.pitch_deg = field<double>(cj, "pitch_deg", where);
    c.fov_deg = field<double>(cj, "fov_deg", where);
    c.patch_w = field<int>(cj, "patch_w", where);
    c.patch_h = field<int>(cj, "patch_h", where);
    if (c.index != static_cast<int>(i)) throw ParseError(where + ".index: expected " + std::to_string(i));
    m.crops.push_back(c);
  }
  if (m.crops.empty()) throw ParseError("manifest.crops: empty");
  return m;
}

void write_manifest(const std::filesystem::path& path, const CropManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << manifest_to_string(manifest);
  if (!out) throw IoError("write failed: " + path.string());
}

CropManifest read_manifest(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return manifest_from_string(buf.str(), warnings);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace layout {

namespace fs = std::filesystem;

fs::path pano_dir(const fs::path& root, const std::string& pano_id) { return root / pano_id; }

fs::path manifest(const fs::path& root, const std::string& pano_id) { return root / pano_id / "manifest.json"; }

fs::path pano_input(const fs::path& root, const std::string& pano_id, Task task) {
  return root / pano_id / ("pano." + std::string(to_string(task)) + ".png");
}

fs::path crop(const fs::path& root, const std::string& pano_id, int index, Task task) {
  return root / pano_id / "crops" / (std::to_string(index) + "." + std::string(to_string(task)) + ".png");
}

fs::path label(const fs::path& root, const std::string& pano_id, int index, Task task) {
  return root / pano_id / "labels" / (std::to_string(index) + "." + std::string(to_string(task)) + ".png");
}

fs::path label_mask(const fs::path& root, const std::string& pano_id, int index, Task task) {
  return root / pano_id / "labels" / (std::to_string(index) + "." + std::string(to_string(task)) + ".mask.png");
}

fs::path aux(const fs::path& root, const std::string& pano_id, const std::string& name) {
  return root / pano_id / "aux" / (name + ".png");
}

std::vector<std::string> list_panos(const fs::path& root) {
  std::vector<std::string> ids;
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace layout

IngestResult ingest_predictions(const CropManifest& manifest, const std::filesystem::path& root, Task task) {
  IngestResult result;
  for (const CropPose& crop : manifest.crops) {
    const auto path = layout::crop(root, manifest.pano_id, crop.index, task);
    try {
      if (!std::filesystem::exists(path)) throw IoError("missing prediction " + path.string());
      const PngImage png = read_png(path);
      if (png.width != crop.patch_w || png.height != crop.patch_h) {
        std::ostringstream msg;
        msg << "prediction " << path.string() << " is " << png.width << "x" << png.height << ", manifest expects "
            << crop.patch_w << "x" << crop.patch_h;
        throw DataError(msg.str());
      }
      PatchSample sample;
      sample.pose = crop.camera();
      sample.task = task;
      sample.pano_id = manifest.pano_id;
      sample.payload = decode_task(png, task, &sample.valid);
      result.labels.push_back({crop.index, reproject_labels(sample, manifest.pano_width, manifest.pano_height)});
    } catch (const std::exception& e) {
      result.errors.push_back({crop.index, e.what()});
    }
  }
  return result;
}

std::vector<CropError> run_work_queue(int count, int jobs, const std::function<void(int)>& fn) {
  std::vector<std::string> failures(count);
  std::vector<char> failed(count, 0);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        failures[i] = e.what();
        failed[i] = 1;
      }
    }
  };
  const int threads = std::clamp(jobs, 1, std::max(count, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  std::vector<CropError> errors;
  for (int i = 0; i < count; ++i) {
    if (failed[i]) errors.push_back({i, failures[i]});
  }
  return errors;
}

}  // namespace mtpano
