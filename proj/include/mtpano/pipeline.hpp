#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mtpano/raster.hpp"
#include "mtpano/reproject.hpp"

namespace mtpano {

/// Closed interval [lo, hi], or [lo, hi) when half_open. lo == hi is a fixed value.
struct AngleRange {
  double lo = 0;
  double hi = 0;
  bool half_open = false;

  void validate(const char* name) const;
  double draw(double unit) const;
  bool contains(double v) const;
};

struct PoseRanges {
  AngleRange fov_deg{80.0, 120.0, false};
  AngleRange yaw_deg{0.0, 360.0, true};
  AngleRange pitch_deg{-90.0, 90.0, false};
  int patch_width = 512;
  int patch_height = 512;
};

inline constexpr int kDefaultCropCount = 32;

struct CropPose {
  int index = 0;
  double yaw_deg = 0;
  double pitch_deg = 0;
  double fov_deg = 90;
  int patch_w = 512;
  int patch_h = 512;

  CameraPose camera() const;
  bool operator==(const CropPose&) const = default;
};

struct CropManifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  std::string pano_id;
  int pano_width = 0;
  int pano_height = 0;
  std::uint64_t seed = 0;
  std::vector<CropPose> crops;

  bool operator==(const CropManifest&) const = default;
};

/// Draws n poses, each axis independently uniform, in the order fov, yaw, pitch per crop.
/// The manifest is a pure function of (n, seed, ranges).
CropManifest sample_camera_poses(int n, std::uint64_t seed, const PoseRanges& ranges,
                                 std::string pano_id = "pano", int pano_width = 1024,
                                 int pano_height = 512);

std::string manifest_to_string(const CropManifest& manifest);
/// Parses a manifest; unknown fields are reported through `warnings` and otherwise ignored.
CropManifest manifest_from_string(const std::string& text, std::vector<std::string>* warnings = nullptr);
void write_manifest(const std::filesystem::path& path, const CropManifest& manifest);
CropManifest read_manifest(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

// On-disk layout below a dataset root.
namespace layout {
std::filesystem::path pano_dir(const std::filesystem::path& root, const std::string& pano_id);
std::filesystem::path manifest(const std::filesystem::path& root, const std::string& pano_id);
std::filesystem::path pano_input(const std::filesystem::path& root, const std::string& pano_id, Task task);
std::filesystem::path crop(const std::filesystem::path& root, const std::string& pano_id, int index, Task task);
std::filesystem::path label(const std::filesystem::path& root, const std::string& pano_id, int index, Task task);
std::filesystem::path label_mask(const std::filesystem::path& root, const std::string& pano_id, int index, Task task);
std::filesystem::path aux(const std::filesystem::path& root, const std::string& pano_id, const std::string& name);
std::vector<std::string> list_panos(const std::filesystem::path& root);
}  // namespace layout

struct CropError {
  int index = -1;
  std::string message;
};

struct IndexedLabel {
  int index = 0;
  ErpPatchLabel label;
};

struct IngestResult {
  std::vector<IndexedLabel> labels;  // ascending crop index
  std::vector<CropError> errors;     // ascending crop index
};

/// Decodes one perspective prediction per crop from `<root>/<pano_id>/crops/` and
/// re-projects it. Missing or mis-sized files become error records; the rest still run.
IngestResult ingest_predictions(const CropManifest& manifest, const std::filesystem::path& root, Task task);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; each index runs exactly once.
/// Exceptions are captured per index and returned in index order.
std::vector<CropError> run_work_queue(int count, int jobs, const std::function<void(int)>& fn);

}  // namespace mtpano
