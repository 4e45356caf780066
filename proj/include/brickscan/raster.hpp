#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "brickscan/geometry.hpp"

namespace brickscan {

/// Row-major single-channel raster, values in [0, 1].
struct GrayRaster {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  GrayRaster() = default;
  GrayRaster(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const GrayRaster&, const GrayRaster&) = default;
};

using Rgb = std::array<double, 3>;

/// Row-major RGB raster, components in [0, 1].
struct RgbRaster {
  int width = 0;
  int height = 0;
  std::vector<Rgb> values;

  RgbRaster() = default;
  RgbRaster(int w, int h, Rgb fill = {0, 0, 0})
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  const Rgb& at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  Rgb& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const RgbRaster&, const RgbRaster&) = default;
};

/// Throws InvalidArgument on non-finite or out-of-range values.
void validate(const GrayRaster& img);
void validate(const RgbRaster& img);

GrayRaster channel(const RgbRaster& img, int c);
RgbRaster to_rgb(const GrayRaster& img);

/// Bilinear resample of a sub-rectangle (pixel units, may be fractional and
/// partly outside; edges clamp) to out_w x out_h.
GrayRaster resample_bilinear(const GrayRaster& img, const Rect& src, int out_w, int out_h);

/// 90 degrees counter-clockwise.
GrayRaster rotate90(const GrayRaster& img);

/// Min/max stretch to [0, 1]; flat images map to 0. Viewing only.
GrayRaster normalize_minmax(const GrayRaster& img);

// PNG --------------------------------------------------------------------

enum class PngDepth { Eight, Sixteen };

void write_png(const GrayRaster& img, const std::filesystem::path& path, PngDepth depth);
void write_png(const RgbRaster& img, const std::filesystem::path& path);

/// Raw decoded PNG; samples are widened to 16 bits.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

PngImage read_png(const std::filesystem::path& path);

/// Grayscale image from a PNG; for colour images `channel_index` picks the
/// channel (-1 = Rec.601 luma).
GrayRaster read_png_gray(const std::filesystem::path& path, int channel_index = -1);
RgbRaster read_png_rgb(const std::filesystem::path& path);

}  // namespace brickscan
