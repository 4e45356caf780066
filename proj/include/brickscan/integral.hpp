#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brickscan/geometry.hpp"
#include "brickscan/raster.hpp"

namespace brickscan {

/// Scale used to quantise [0, 1] raster values before summing: sums are
/// exact 64-bit integers of 16-bit samples, matching 16-bit PNG input.
inline constexpr double kSampleScale = 65535.0;

std::uint16_t quantize_sample(double value);

/// Summed-area tables of samples and squared samples, (width+1) x (height+1)
/// with a zero first row and column.
class IntegralImage {
 public:
  IntegralImage() = default;
  explicit IntegralImage(const GrayRaster& img);
  IntegralImage(int width, int height, std::span<const std::uint16_t> samples);

  int width() const { return width_; }
  int height() const { return height_; }

  /// Exact sum over the rect. Throws RectBounds if the rect is empty or
  /// leaves the image.
  std::int64_t rect_sum(const RectI& r) const;
  std::int64_t rect_sum_sq(const RectI& r) const;

  /// Unchecked four-lookup sums for inner loops.
  std::int64_t sum(int x, int y, int w, int h) const {
    const std::size_t s = static_cast<std::size_t>(width_) + 1;
    const std::size_t a = static_cast<std::size_t>(y) * s + x;
    const std::size_t b = static_cast<std::size_t>(y + h) * s + x;
    return sum_[b + w] - sum_[b] - sum_[a + w] + sum_[a];
  }
  std::int64_t sum_sq(int x, int y, int w, int h) const {
    const std::size_t s = static_cast<std::size_t>(width_) + 1;
    const std::size_t a = static_cast<std::size_t>(y) * s + x;
    const std::size_t b = static_cast<std::size_t>(y + h) * s + x;
    return sq_[b + w] - sq_[b] - sq_[a + w] + sq_[a];
  }

  /// Raw table entry (x, y) in [0, width] x [0, height].
  std::int64_t table(int x, int y) const { return sum_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }

  /// Standard deviation of the window in [0, 1] units, or 1.0 when the
  /// variance is <= 1e-12 (flat-window guard).
  double window_std(int x, int y, int w, int h) const;
  bool window_flat(int x, int y, int w, int h) const;

 private:
  void build(std::span<const std::uint16_t> samples);
  double window_variance(int x, int y, int w, int h) const;

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sq_;
};

}  // namespace brickscan
