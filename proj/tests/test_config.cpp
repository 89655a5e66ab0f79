#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "mtpano/config.hpp"

using namespace mtpano;

TEST_CASE("defaults carry the published configuration") {
  const ToolConfig c;
  CHECK(c.crop_count == 32);
  CHECK(c.ranges.fov_deg.lo == 80);
  CHECK(c.ranges.fov_deg.hi == 120);
  CHECK(c.ranges.yaw_deg.hi == 360);
  CHECK(c.ranges.pitch_deg.lo == -90);
  CHECK(c.loss_weights.aux[0] == 0.003);
  CHECK(c.warmup_steps == 1000);
  CHECK(c.batch_size_per_gpu == 4);
  CHECK(c.base_learning_rate == 2e-5);
  CHECK(c.pano_width == 1024);
  CHECK(c.pano_height == 512);
  CHECK(c.resolved_jobs() >= 1);
}

TEST_CASE("file values, includes and overrides") {
  const auto dir = testing::scratch_dir("config");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "base.cfg") << "seed = 3\ncrop_count = 8\n# comment\nfov_min = 70\n";
  std::ofstream(dir / "main.cfg") << "include sub/base.cfg\ncrop_count = 12   # later wins\ntasks = depth, normals\n";
  const ToolConfig c = load_config(dir / "main.cfg");
  CHECK(c.seed == 3);
  CHECK(c.crop_count == 12);
  CHECK(c.ranges.fov_deg.lo == 70);
  REQUIRE(c.tasks.size() == 2);
  CHECK(c.tasks[1] == Task::Normal);

  // Dumped form loads back to the same values.
  std::ofstream(dir / "dump.cfg") << to_key_values(c);
  const ToolConfig d = load_config(dir / "dump.cfg");
  CHECK(to_key_values(d) == to_key_values(c));
}

TEST_CASE("config errors") {
  const auto dir = testing::scratch_dir("config_bad");
  std::ofstream(dir / "a.cfg") << "include b.cfg\n";
  std::ofstream(dir / "b.cfg") << "include a.cfg\n";
  CHECK_THROWS_WITH_AS(load_config(dir / "a.cfg"), doctest::Contains("cycle"), ConfigError);
  std::ofstream(dir / "unknown.cfg") << "sed = 3\n";
  CHECK_THROWS_WITH_AS(load_config(dir / "unknown.cfg"), doctest::Contains("sed"), ConfigError);
  std::ofstream(dir / "num.cfg") << "seed = 3x\n";
  CHECK_THROWS_AS(load_config(dir / "num.cfg"), ConfigError);
  std::ofstream(dir / "line.cfg") << "seed 3\n";
  CHECK_THROWS_WITH_AS(load_config(dir / "line.cfg"), doctest::Contains("line.cfg:1"), ConfigError);
  std::ofstream(dir / "weight.cfg") << "lambda_edf = -1\n";
  CHECK_THROWS_AS(load_config(dir / "weight.cfg"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), IoError);
}
