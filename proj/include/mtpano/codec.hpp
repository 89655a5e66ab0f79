#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mtpano/raster.hpp"

namespace mtpano {

/// Interleaved 8- or 16-bit integer raster as stored on disk.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 1;   // 1 (gray) or 3 (RGB)
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t& at(int row, int col, int ch) {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::uint16_t at(int row, int col, int ch) const {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

PngImage make_png(int width, int height, int channels, int bit_depth);

void write_png(const std::filesystem::path& path, const PngImage& image);
PngImage read_png(const std::filesystem::path& path);

// Bit-exact file encodings.
//   rgb       8-bit, 3 channels
//   depth     16-bit gray, millimeters, 0 = invalid
//   normal    16-bit, 3 channels, round((v + 1) / 2 * 65535); all-zero samples = invalid
//   semantic  8-bit gray class index
//   pointmap  16-bit, 3 channels, clamp(round(mm) + 32768, 0, 65535)
//   edf       16-bit gray, clamp(round(px), 0, 65535)
//   mask      8-bit gray, 0 / 255
inline constexpr int kPointMapOffset = 32768;

std::uint16_t encode_depth_mm(double meters);
double decode_depth_mm(std::uint16_t mm);
std::uint16_t encode_normal_component(double v);
double decode_normal_component(std::uint16_t c);
std::uint16_t encode_point_component(double meters);
double decode_point_component(std::uint16_t c);

/// Encodes a task raster. `valid`, when non-empty, marks pixels to write; the rest get the
/// task's invalid value (depth/normal) or zero.
PngImage encode_task(const Raster& raster, Task task, const Mask& valid = {});

/// Decodes a task file into a raster plus its validity (depth 0 and all-zero normals are
/// invalid; rgb and semantic are always valid).
Raster decode_task(const PngImage& image, Task task, Mask* valid = nullptr);

PngImage encode_point_map(const Raster& points, const Mask& valid);
Raster decode_point_map(const PngImage& image);
PngImage encode_edf(const Plane<double>& distance);
PngImage encode_mask(const Mask& mask);
Mask decode_mask(const PngImage& image);

}  // namespace mtpano
