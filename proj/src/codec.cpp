#include "mtpano/codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <string>
#include <cstdio>
#include <memory>

namespace mtpano {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports through callbacks; keep the message for the exception instead of stderr.
thread_local std::string png_last_error;

void png_error_handler(png_structp png, png_const_charp msg) {
  png_last_error = msg ? msg : "unknown error";
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

std::uint16_t clamp_u16(double v) {
  return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
}

std::uint16_t clamp_u8(double v) {
  return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

PngImage make_png(int width, int height, int channels, int bit_depth) {
  PngImage img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.bit_depth = bit_depth;
  img.samples.assign(static_cast<std::size_t>(width) * height * channels, 0);
  return img;
}

void write_png(const std::filesystem::path& path, const PngImage& image) {
  if (image.channels != 1 && image.channels != 3) throw ContractError("png: 1 or 3 channels");
  if (image.bit_depth != 8 && image.bit_depth != 16) throw ContractError("png: bit depth 8 or 16");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: out of memory writing " + path.string());
  }
  const std::size_t row_bytes = static_cast<std::size_t>(image.width) * image.channels *
                                (image.bit_depth / 8);
  std::vector<png_byte> row(row_bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: write failed for " + path.string() + ": " + png_last_error);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, image.bit_depth,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int per_row = image.width * image.channels;
  for (int y = 0; y < image.height; ++y) {
    const std::uint16_t* src = image.samples.data() + static_cast<std::size_t>(y) * per_row;
    if (image.bit_depth == 8) {
      for (int i = 0; i < per_row; ++i) row[i] = static_cast<png_byte>(src[i]);
    } else {
      // PNG stores 16-bit samples big-endian.
      for (int i = 0; i < per_row; ++i) {
        row[2 * i] = static_cast<png_byte>(src[i] >> 8);
        row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

PngImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open for reading: " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw IoError("not a png file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: out of memory reading " + path.string());
  }
  PngImage img;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: corrupt file " + path.string() + ": " + png_last_error);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: unsupported channel layout in " + path.string());
  }
  img.channels = channels;
  img.samples.resize(static_cast<std::size_t>(img.width) * img.height * channels);
  row.resize(png_get_rowbytes(png, info));
  const int per_row = img.width * channels;
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    std::uint16_t* dst = img.samples.data() + static_cast<std::size_t>(y) * per_row;
    if (img.bit_depth == 8) {
      for (int i = 0; i < per_row; ++i) dst[i] = row[i];
    } else {
      for (int i = 0; i < per_row; ++i) {
        dst[i] = static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::uint16_t encode_depth_mm(double meters) {
  if (!valid_depth(meters)) return 0;
  return clamp_u16(meters * 1000.0);
}

double decode_depth_mm(std::uint16_t mm) { return mm / 1000.0; }

std::uint16_t encode_normal_component(double v) { return clamp_u16((v + 1.0) / 2.0 * 65535.0); }

double decode_normal_component(std::uint16_t c) { return c / 65535.0 * 2.0 - 1.0; }

std::uint16_t encode_point_component(double meters) {
  return static_cast<std::uint16_t>(
      std::clamp(std::round(meters * 1000.0) + kPointMapOffset, 0.0, 65535.0));
}

double decode_point_component(std::uint16_t c) {
  return (static_cast<double>(c) - kPointMapOffset) / 1000.0;
}

PngImage encode_task(const Raster& raster, Task task, const Mask& valid) {
  if (raster.kind != channel_kind_for(task)) throw ContractError("encode: raster kind does not match task");
  const int w = raster.width(), h = raster.height();
  const bool masked = valid.size() != 0;
  auto use = [&](int y, int x) { return !masked || valid(y, x); };
  switch (task) {
    case Task::Rgb: {
      PngImage img = make_png(w, h, 3, 8);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = use(y, x) ? clamp_u8(raster.planes[ch](y, x)) : 0;
      return img;
    }
    case Task::Semantic: {
      PngImage img = make_png(w, h, 1, 8);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x, 0) = use(y, x) ? clamp_u8(raster.planes[0](y, x)) : 0;
      return img;
    }
    case Task::Depth: {
      PngImage img = make_png(w, h, 1, 16);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x, 0) = use(y, x) ? encode_depth_mm(raster.planes[0](y, x)) : 0;
      return img;
    }
    case Task::Normal: {
      PngImage img = make_png(w, h, 3, 16);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!use(y, x)) continue;
          for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = encode_normal_component(raster.planes[ch](y, x));
        }
      return img;
    }
  }
  throw ContractError("encode: unsupported task");
}

Raster decode_task(const PngImage& image, Task task, Mask* valid) {
  const int w = image.width, h = image.height;
  const int want_channels = channel_count(channel_kind_for(task));
  const int want_depth = (task == Task::Depth || task == Task::Normal) ? 16 : 8;
  if (image.channels != want_channels || image.bit_depth != want_depth) {
    throw DataError("file layout does not match the " + std::string(to_string(task)) + " encoding");
  }
  Raster out(channel_kind_for(task), w, h);
  Mask m = Mask::Constant(h, w, true);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      switch (task) {
        case Task::Rgb:
          for (int ch = 0; ch < 3; ++ch) out.planes[ch](y, x) = image.at(y, x, ch);
          break;
        case Task::Semantic:
          out.planes[0](y, x) = image.at(y, x, 0);
          break;
        case Task::Depth:
          out.planes[0](y, x) = decode_depth_mm(image.at(y, x, 0));
          m(y, x) = image.at(y, x, 0) != 0;
          break;
        case Task::Normal: {
          const bool zero = image.at(y, x, 0) == 0 && image.at(y, x, 1) == 0 && image.at(y, x, 2) == 0;
          m(y, x) = !zero;
          if (zero) break;
          Vec3<double> n(decode_normal_component(image.at(y, x, 0)),
                         decode_normal_component(image.at(y, x, 1)),
                         decode_normal_component(image.at(y, x, 2)));
          out.set_vec3(y, x, n.normalized());
          break;
        }
      }
    }
  }
  if (valid) *valid = std::move(m);
  return out;
}

PngImage encode_point_map(const Raster& points, const Mask& valid) {
  const int w = points.width(), h = points.height();
  PngImage img = make_png(w, h, 3, 16);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img.at(y, x, ch) = (valid.size() == 0 || valid(y, x))
                               ? encode_point_component(points.planes[ch](y, x))
                               : static_cast<std::uint16_t>(kPointMapOffset);
  return img;
}

Raster decode_point_map(const PngImage& image) {
  if (image.channels != 3 || image.bit_depth != 16) throw DataError("point map must be 16-bit RGB");
  Raster out(ChannelKind::PointMap, image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int ch = 0; ch < 3; ++ch) out.planes[ch](y, x) = decode_point_component(image.at(y, x, ch));
  return out;
}

PngImage encode_edf(const Plane<double>& distance) {
  const int w = static_cast<int>(distance.cols()), h = static_cast<int>(distance.rows());
  PngImage img = make_png(w, h, 1, 16);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(y, x, 0) = static_cast<std::uint16_t>(std::clamp(std::round(distance(y, x)), 0.0, 65535.0));
  return img;
}

PngImage encode_mask(const Mask& mask) {
  PngImage img = make_png(static_cast<int>(mask.cols()), static_cast<int>(mask.rows()), 1, 8);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) img.at(y, x, 0) = mask(y, x) ? 255 : 0;
  return img;
}

Mask decode_mask(const PngImage& image) {
  if (image.channels != 1) throw DataError("mask must be single channel");
  Mask m(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) m(y, x) = image.at(y, x, 0) != 0;
  return m;
}

}  // namespace mtpano
