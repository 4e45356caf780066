#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "brickscan/geometry.hpp"
#include "brickscan/integral.hpp"

namespace brickscan {

enum class HaarKind : std::uint8_t { TwoRectH, TwoRectV, ThreeRectH, ThreeRectV, FourRect };

std::string_view to_string(HaarKind kind);
HaarKind haar_kind_from_string(std::string_view s);

/// Horizontal and vertical partition counts of a feature kind.
std::array<int, 2> partitions(HaarKind kind);

struct HaarFeature {
  HaarKind kind = HaarKind::TwoRectH;
  RectI rect;  // base-window coordinates
  friend bool operator==(const HaarFeature&, const HaarFeature&) = default;
};

/// Throws InvalidArgument unless the rect lies in the window, w, h >= 2 and
/// both divide by the kind's partition counts.
void validate(const HaarFeature& f, int window_w, int window_h);

/// Every valid feature of the base window, in a fixed order.
std::vector<HaarFeature> enumerate_features(int window_w, int window_h);

/// A feature mapped into a concrete window size, as up to four weighted
/// cells. Weights are +1/A_pos and -1/A_neg so a constant image scores 0.
struct ScaledFeature {
  std::array<RectI, 4> cells{};  // offsets relative to the window origin
  std::array<double, 4> weights{};
  int count = 0;

  /// Mean(positive cells) - mean(negative cells), in raw sample units.
  double raw(const IntegralImage& ii, int wx, int wy) const {
    double acc = 0.0;
    for (int k = 0; k < count; ++k) {
      const auto& c = cells[static_cast<std::size_t>(k)];
      acc += weights[static_cast<std::size_t>(k)] * static_cast<double>(ii.sum(wx + c.x, wy + c.y, c.w, c.h));
    }
    return acc;
  }
};

ScaledFeature scale_feature(const HaarFeature& f, int base_w, int base_h, int window_w, int window_h);

/// Variance-normalised feature response on `window` (any size; the feature
/// scales with it). Value = (mean_pos - mean_neg) / window_std. Throws
/// RectBounds if the window leaves the image.
double eval_feature(const IntegralImage& ii, const HaarFeature& f, const RectI& window, int base_w, int base_h);

}  // namespace brickscan
