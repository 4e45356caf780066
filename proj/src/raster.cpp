#include "brickscan/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "brickscan/error.hpp"

namespace brickscan {

void validate(const GrayRaster& img) {
  if (img.width < 0 || img.height < 0 || img.values.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw Error(ErrorCode::InvalidArgument, "raster size mismatch");
  }
  for (double v : img.values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error(ErrorCode::InvalidArgument, "raster value outside [0, 1]");
  }
}

void validate(const RgbRaster& img) {
  if (img.width < 0 || img.height < 0 || img.values.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw Error(ErrorCode::InvalidArgument, "raster size mismatch");
  }
  for (const auto& px : img.values) {
    for (double v : px) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error(ErrorCode::InvalidArgument, "raster value outside [0, 1]");
    }
  }
}

GrayRaster channel(const RgbRaster& img, int c) {
  GrayRaster out(img.width, img.height);
  for (std::size_t i = 0; i < img.values.size(); ++i) out.values[i] = img.values[i][static_cast<std::size_t>(c)];
  return out;
}

RgbRaster to_rgb(const GrayRaster& img) {
  RgbRaster out(img.width, img.height);
  for (std::size_t i = 0; i < img.values.size(); ++i) out.values[i] = {img.values[i], img.values[i], img.values[i]};
  return out;
}

GrayRaster resample_bilinear(const GrayRaster& img, const Rect& src, int out_w, int out_h) {
  GrayRaster out(out_w, out_h);
  if (img.width == 0 || img.height == 0) return out;
  const double sx = src.w / out_w;
  const double sy = src.h / out_h;
  for (int y = 0; y < out_h; ++y) {
    // Sample position in source pixel-centre coordinates.
    const double fy = std::clamp(src.y + (y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp(src.x + (x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, y0) * (1 - tx) + img.at(x1, y0) * tx;
      const double bot = img.at(x0, y1) * (1 - tx) + img.at(x1, y1) * tx;
      out.at(x, y) = std::clamp(top * (1 - ty) + bot * ty, 0.0, 1.0);
    }
  }
  return out;
}

GrayRaster rotate90(const GrayRaster& img) {
  GrayRaster out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) out.at(y, img.width - 1 - x) = img.at(x, y);
  }
  return out;
}

GrayRaster normalize_minmax(const GrayRaster& img) {
  GrayRaster out = img;
  if (img.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
  const double span = *hi - *lo;
  for (auto& v : out.values) v = span > 0 ? (v - *lo) / span : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// libpng glue

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint16_t quantize(double v, double max_value) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * max_value));
}

void write_png_raw(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
                   const std::vector<std::uint16_t>& samples, int channels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error(ErrorCode::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng init failed");
  }
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  std::vector<png_byte> row(static_cast<std::size_t>(width) * channels * bytes_per_sample);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * width * channels;
    for (std::size_t i = 0; i < static_cast<std::size_t>(width) * channels; ++i) {
      const std::uint16_t s = samples[base + i];
      if (bit_depth == 16) {
        row[2 * i] = static_cast<png_byte>(s >> 8);  // big-endian
        row[2 * i + 1] = static_cast<png_byte>(s & 0xFF);
      } else {
        row[i] = static_cast<png_byte>(s);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const GrayRaster& img, const std::filesystem::path& path, PngDepth depth) {
  const double max_value = depth == PngDepth::Sixteen ? 65535.0 : 255.0;
  std::vector<std::uint16_t> samples(img.values.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = quantize(img.values[i], max_value);
  write_png_raw(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, depth == PngDepth::Sixteen ? 16 : 8, samples, 1);
}

void write_png(const RgbRaster& img, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(img.values.size() * 3);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) samples[3 * i + c] = quantize(img.values[i][c], 255.0);
  }
  write_png_raw(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, samples, 3);
}

PngImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw Error(ErrorCode::Io, "cannot open " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw Error(ErrorCode::Io, path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng init failed");
  }
  PngImage out;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  row.resize(png_get_rowbytes(png, info));
  out.samples.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    const std::size_t base = static_cast<std::size_t>(y) * out.width * out.channels;
    for (std::size_t i = 0; i < static_cast<std::size_t>(out.width) * out.channels; ++i) {
      out.samples[base + i] = out.bit_depth == 16
                                  ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1])
                                  : row[i];
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

GrayRaster read_png_gray(const std::filesystem::path& path, int channel_index) {
  const PngImage png = read_png(path);
  const double max_value = png.bit_depth == 16 ? 65535.0 : 255.0;
  GrayRaster out(png.width, png.height);
  const int colour = png.channels >= 3 ? 3 : 1;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const auto* px = &png.samples[i * static_cast<std::size_t>(png.channels)];
    double v = 0.0;
    if (colour == 1) {
      v = px[0];
    } else if (channel_index >= 0 && channel_index < 3) {
      v = px[channel_index];
    } else {
      v = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    out.values[i] = v / max_value;
  }
  return out;
}

RgbRaster read_png_rgb(const std::filesystem::path& path) {
  const PngImage png = read_png(path);
  const double max_value = png.bit_depth == 16 ? 65535.0 : 255.0;
  RgbRaster out(png.width, png.height);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const auto* px = &png.samples[i * static_cast<std::size_t>(png.channels)];
    for (int c = 0; c < 3; ++c) out.values[i][static_cast<std::size_t>(c)] = (png.channels >= 3 ? px[c] : px[0]) / max_value;
  }
  return out;
}

}  // namespace brickscan
