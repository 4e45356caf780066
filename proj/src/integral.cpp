#include "brickscan/integral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brickscan/error.hpp"

namespace brickscan {

namespace {
constexpr double kFlatVariance = 1e-12;
}

std::uint16_t quantize_sample(double value) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(value, 0.0, 1.0) * kSampleScale));
}

IntegralImage::IntegralImage(const GrayRaster& img) : width_(img.width), height_(img.height) {
  std::vector<std::uint16_t> samples(img.values.size());
  std::transform(img.values.begin(), img.values.end(), samples.begin(), quantize_sample);
  build(samples);
}

IntegralImage::IntegralImage(int width, int height, std::span<const std::uint16_t> samples)
    : width_(width), height_(height) {
  if (width < 0 || height < 0 || samples.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "sample count does not match image size");
  }
  build(samples);
}

void IntegralImage::build(std::span<const std::uint16_t> samples) {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  sum_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
  sq_.assign(sum_.size(), 0);
  for (int y = 0; y < height_; ++y) {
    std::int64_t row = 0;
    std::int64_t row_sq = 0;
    for (int x = 0; x < width_; ++x) {
      const std::int64_t v = samples[static_cast<std::size_t>(y) * width_ + x];
      row += v;
      row_sq += v * v;
      const std::size_t idx = (static_cast<std::size_t>(y) + 1) * stride + x + 1;
      sum_[idx] = sum_[idx - stride] + row;
      sq_[idx] = sq_[idx - stride] + row_sq;
    }
  }
}

namespace {
void check_rect(const RectI& r, int width, int height) {
  if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > width || r.y + r.h > height) {
    throw Error(ErrorCode::RectBounds, "rect (" + std::to_string(r.x) + ", " + std::to_string(r.y) + ", " +
                                           std::to_string(r.w) + ", " + std::to_string(r.h) + ") outside " +
                                           std::to_string(width) + "x" + std::to_string(height));
  }
}
}  // namespace

std::int64_t IntegralImage::rect_sum(const RectI& r) const {
  check_rect(r, width_, height_);
  return sum(r.x, r.y, r.w, r.h);
}

std::int64_t IntegralImage::rect_sum_sq(const RectI& r) const {
  check_rect(r, width_, height_);
  return sum_sq(r.x, r.y, r.w, r.h);
}

__extension__ using Int128 = __int128;

double IntegralImage::window_variance(int x, int y, int w, int h) const {
  // n^2 * var * scale^2 = n * sum_sq - sum^2, exact in 128 bits.
  const Int128 n = static_cast<Int128>(w) * h;
  const Int128 s = sum(x, y, w, h);
  const Int128 scaled = n * sum_sq(x, y, w, h) - s * s;
  const double denom = static_cast<double>(n) * static_cast<double>(n) * kSampleScale * kSampleScale;
  return static_cast<double>(scaled) / denom;
}

bool IntegralImage::window_flat(int x, int y, int w, int h) const { return window_variance(x, y, w, h) <= kFlatVariance; }

double IntegralImage::window_std(int x, int y, int w, int h) const {
  const double var = window_variance(x, y, w, h);
  return var <= kFlatVariance ? 1.0 : std::sqrt(var);
}

}  // namespace brickscan
