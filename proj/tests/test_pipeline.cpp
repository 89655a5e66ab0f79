#include <doctest.h>

#include <atomic>
#include <fstream>

#include "helpers.hpp"
#include "mtpano/codec.hpp"
#include "mtpano/pipeline.hpp"
#include "mtpano/synthetic.hpp"

using namespace mtpano;

TEST_CASE("default pose sampling") {
  const CropManifest m = sample_camera_poses(kDefaultCropCount, 11, PoseRanges{});
  REQUIRE(m.crops.size() == 32);
  for (const auto& c : m.crops) {
    CHECK(c.fov_deg >= 80);
    CHECK(c.fov_deg <= 120);
    CHECK(c.yaw_deg >= 0);
    CHECK(c.yaw_deg < 360);
    CHECK(c.pitch_deg >= -90);
    CHECK(c.pitch_deg <= 90);
    CHECK(c.patch_w == 512);
  }
}

TEST_CASE("degenerate ranges give a fixed pose") {
  PoseRanges r;
  r.fov_deg = {90, 90};
  r.yaw_deg = {0, 0, true};
  r.pitch_deg = {0, 0};
  const CropManifest m = sample_camera_poses(1, 5, r);
  REQUIRE(m.crops.size() == 1);
  CHECK(m.crops[0].fov_deg == 90);
  CHECK(m.crops[0].yaw_deg == 0);
  CHECK(m.crops[0].pitch_deg == 0);
}

TEST_CASE("half-open draws never reach the upper bound") {
  const AngleRange yaw{0, 360, true};
  CHECK(yaw.draw(0.0) == 0);
  CHECK(yaw.draw(1.0) < 360);
  CHECK(yaw.contains(yaw.draw(std::nextafter(1.0, 0.0))));
  const AngleRange pitch{-90, 90, false};
  CHECK(pitch.draw(1.0) == 90);
}

TEST_CASE("invalid ranges are config errors") {
  PoseRanges r;
  r.fov_deg = {120, 80};
  CHECK_THROWS_AS(sample_camera_poses(4, 0, r), ConfigError);
  CHECK_THROWS_AS(sample_camera_poses(0, 0, PoseRanges{}), ConfigError);
}

TEST_CASE("pose sampling is a pure function of seed") {
  const std::string a = manifest_to_string(sample_camera_poses(32, 7, PoseRanges{}));
  const std::string b = manifest_to_string(sample_camera_poses(32, 7, PoseRanges{}));
  const std::string c = manifest_to_string(sample_camera_poses(32, 8, PoseRanges{}));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("manifest write and read") {
  const auto dir = testing::scratch_dir("manifest");
  const CropManifest m = sample_camera_poses(5, 3, PoseRanges{}, "room", 2048, 1024);
  write_manifest(dir / "m.json", m);
  std::vector<std::string> warnings;
  CHECK(read_manifest(dir / "m.json", &warnings) == m);
  CHECK(warnings.empty());
}

TEST_CASE("unknown manifest fields warn and are ignored") {
  std::string text = manifest_to_string(sample_camera_poses(2, 3, PoseRanges{}));
  text.insert(text.find('{') + 1, "\"producer\": \"elsewhere\",");
  const auto pos = text.find("\"index\": 1");
  text.insert(pos, "\"note\": 4, ");
  std::vector<std::string> warnings;
  const CropManifest m = manifest_from_string(text, &warnings);
  CHECK(m.crops.size() == 2);
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].find("producer") != std::string::npos);
  CHECK(warnings[1].find("crops[1]") != std::string::npos);
}

TEST_CASE("malformed manifests are parse errors") {
  const std::string good = manifest_to_string(sample_camera_poses(3, 3, PoseRanges{}));
  CHECK_THROWS_AS(manifest_from_string(good.substr(0, good.size() / 2)), ParseError);
  CHECK_THROWS_AS(manifest_from_string("[]"), ParseError);

  std::string newer = good;
  newer.replace(newer.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_AS(manifest_from_string(newer), ParseError);

  std::string gap = good;
  gap.replace(gap.find("\"index\": 1"), 10, "\"index\": 5");
  CHECK_THROWS_WITH_AS(manifest_from_string(gap), doctest::Contains("crops[1].index"), ParseError);

  std::string wrong_type = good;
  wrong_type.replace(wrong_type.find("\"patch_w\": 512"), 14, "\"patch_w\": \"x\"");
  CHECK_THROWS_WITH_AS(manifest_from_string(wrong_type), doctest::Contains("patch_w"), ParseError);

  const auto dir = testing::scratch_dir("manifest_bad");
  std::ofstream(dir / "cut.json") << good.substr(0, 40);
  CHECK_THROWS_WITH_AS(read_manifest(dir / "cut.json"), doctest::Contains("cut.json"), ParseError);
  CHECK_THROWS_AS(read_manifest(dir / "absent.json"), IoError);
}

namespace {

void write_depth_predictions(const std::filesystem::path& root, const CropManifest& m, const ErpImage& pano) {
  for (const auto& c : m.crops) {
    const PatchSample s = extract_patch(pano, c.camera(), Task::Depth);
    write_png(layout::crop(root, m.pano_id, c.index, Task::Depth), encode_task(s.payload, Task::Depth, s.valid));
  }
}

}  // namespace

TEST_CASE("ingest recovers the synthetic ground truth") {
  const auto root = testing::scratch_dir("ingest");
  const ErpImage depth = synthetic::depth_pano(128, 64);
  PoseRanges r;
  r.patch_width = r.patch_height = 64;
  const CropManifest m = sample_camera_poses(4, 1, r, "p0", 128, 64);
  write_depth_predictions(root, m, depth);
  const IngestResult res = ingest_predictions(m, root, Task::Depth);
  CHECK(res.errors.empty());
  REQUIRE(res.labels.size() == 4);
  for (const auto& l : res.labels)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 128; ++x)
        // Millimeter quantization dominates: 0.5 mm on ~2 m.
        if (l.label.valid(y, x)) CHECK(testing::rel_err(l.label.payload.planes[0](y, x), depth.planes[0](y, x)) < 2e-3);
}

TEST_CASE("a missing crop becomes one error record") {
  const auto root = testing::scratch_dir("ingest_missing");
  PoseRanges r;
  r.patch_width = r.patch_height = 16;
  const CropManifest m = sample_camera_poses(32, 2, r, "p0", 64, 32);
  write_depth_predictions(root, m, ErpImage(ChannelKind::Depth, 64, 32, 2.0));
  std::filesystem::remove(layout::crop(root, "p0", 7, Task::Depth));
  write_png(layout::crop(root, "p0", 9, Task::Depth), make_png(8, 8, 1, 16));
  const IngestResult res = ingest_predictions(m, root, Task::Depth);
  CHECK(res.labels.size() == 30);
  REQUIRE(res.errors.size() == 2);
  CHECK(res.errors[0].index == 7);
  CHECK(res.errors[0].message.find("7.depth.png") != std::string::npos);
  CHECK(res.errors[1].index == 9);
  CHECK(res.errors[1].message.find("8x8") != std::string::npos);
}

TEST_CASE("work queue runs every index once and reports failures in order") {
  for (int jobs : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(50);
    const auto errors = run_work_queue(50, jobs, [&](int i) {
      hits[i]++;
      if (i % 10 == 3) throw DataError("bad " + std::to_string(i));
    });
    for (auto& h : hits) CHECK(h.load() == 1);
    REQUIRE(errors.size() == 5);
    for (std::size_t k = 0; k < errors.size(); ++k) CHECK(errors[k].index == static_cast<int>(10 * k + 3));
  }
  CHECK(run_work_queue(0, 4, [](int) {}).empty());
}

TEST_CASE("layout paths") {
  const std::filesystem::path root = "data";
  CHECK(layout::manifest(root, "a") == root / "a" / "manifest.json");
  CHECK(layout::crop(root, "a", 3, Task::Normal) == root / "a" / "crops" / "3.normal.png");
  CHECK(layout::label_mask(root, "a", 3, Task::Depth) == root / "a" / "labels" / "3.depth.mask.png");
  CHECK(layout::aux(root, "a", "edf") == root / "a" / "aux" / "edf.png");
  CHECK_THROWS_AS(layout::list_panos("/nonexistent/mtpano"), IoError);
}
