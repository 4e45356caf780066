#include "brickscan/haar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brickscan/error.hpp"

namespace brickscan {

std::string_view to_string(HaarKind kind) {
  switch (kind) {
    case HaarKind::TwoRectH: return "TWO_RECT_H";
    case HaarKind::TwoRectV: return "TWO_RECT_V";
    case HaarKind::ThreeRectH: return "THREE_RECT_H";
    case HaarKind::ThreeRectV: return "THREE_RECT_V";
    case HaarKind::FourRect: return "FOUR_RECT";
  }
  return "?";
}

HaarKind haar_kind_from_string(std::string_view s) {
  for (auto k : {HaarKind::TwoRectH, HaarKind::TwoRectV, HaarKind::ThreeRectH, HaarKind::ThreeRectV, HaarKind::FourRect}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown Haar feature kind '" + std::string(s) + "'");
}

std::array<int, 2> partitions(HaarKind kind) {
  switch (kind) {
    case HaarKind::TwoRectH: return {2, 1};
    case HaarKind::TwoRectV: return {1, 2};
    case HaarKind::ThreeRectH: return {3, 1};
    case HaarKind::ThreeRectV: return {1, 3};
    case HaarKind::FourRect: return {2, 2};
  }
  return {1, 1};
}

void validate(const HaarFeature& f, int window_w, int window_h) {
  const auto [px, py] = partitions(f.kind);
  const auto& r = f.rect;
  if (r.x < 0 || r.y < 0 || r.x + r.w > window_w || r.y + r.h > window_h || r.w < 2 || r.h < 2 || r.w % px != 0 ||
      r.h % py != 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid Haar feature " + std::string(to_string(f.kind)) + " (" +
                                                std::to_string(r.x) + ", " + std::to_string(r.y) + ", " +
                                                std::to_string(r.w) + ", " + std::to_string(r.h) + ")");
  }
}

std::vector<HaarFeature> enumerate_features(int window_w, int window_h) {
  std::vector<HaarFeature> out;
  for (auto kind : {HaarKind::TwoRectH, HaarKind::TwoRectV, HaarKind::ThreeRectH, HaarKind::ThreeRectV, HaarKind::FourRect}) {
    const auto [px, py] = partitions(kind);
    for (int w = std::max(2, px); w <= window_w; w += px) {
      if (w % px != 0) continue;
      for (int h = std::max(2, py); h <= window_h; h += py) {
        if (h % py != 0) continue;
        for (int y = 0; y + h <= window_h; ++y) {
          for (int x = 0; x + w <= window_w; ++x) out.push_back({kind, {x, y, w, h}});
        }
      }
    }
  }
  return out;
}

ScaledFeature scale_feature(const HaarFeature& f, int base_w, int base_h, int window_w, int window_h) {
  const auto [px, py] = partitions(f.kind);
  const double sx = static_cast<double>(window_w) / base_w;
  const double sy = static_cast<double>(window_h) / base_h;
  const int cw = std::clamp(static_cast<int>(std::lround(f.rect.w / px * sx)), 1, std::max(1, window_w / px));
  const int ch = std::clamp(static_cast<int>(std::lround(f.rect.h / py * sy)), 1, std::max(1, window_h / py));
  int x = static_cast<int>(std::lround(f.rect.x * sx));
  int y = static_cast<int>(std::lround(f.rect.y * sy));
  x = std::clamp(x, 0, std::max(0, window_w - cw * px));
  y = std::clamp(y, 0, std::max(0, window_h - ch * py));

  // Cell sign pattern per kind, row-major over the partition grid.
  std::array<int, 4> sign{};
  switch (f.kind) {
    case HaarKind::TwoRectH:
    case HaarKind::TwoRectV: sign = {1, -1, 0, 0}; break;
    case HaarKind::ThreeRectH:
    case HaarKind::ThreeRectV: sign = {1, -1, 1, 0}; break;
    case HaarKind::FourRect: sign = {1, -1, -1, 1}; break;
  }
  ScaledFeature sf;
  sf.count = px * py;
  double pos_area = 0.0, neg_area = 0.0;
  for (int j = 0; j < py; ++j) {
    for (int i = 0; i < px; ++i) {
      const int k = j * px + i;
      sf.cells[static_cast<std::size_t>(k)] = {x + i * cw, y + j * ch, cw, ch};
      (sign[static_cast<std::size_t>(k)] > 0 ? pos_area : neg_area) += static_cast<double>(cw) * ch;
    }
  }
  for (int k = 0; k < sf.count; ++k) {
    sf.weights[static_cast<std::size_t>(k)] = sign[static_cast<std::size_t>(k)] > 0 ? 1.0 / pos_area : -1.0 / neg_area;
  }
  return sf;
}

double eval_feature(const IntegralImage& ii, const HaarFeature& f, const RectI& window, int base_w, int base_h) {
  if (window.w <= 0 || window.h <= 0 || window.x < 0 || window.y < 0 || window.x + window.w > ii.width() ||
      window.y + window.h > ii.height()) {
    throw Error(ErrorCode::RectBounds, "window outside image");
  }
  const ScaledFeature sf = scale_feature(f, base_w, base_h, window.w, window.h);
  const double std = ii.window_std(window.x, window.y, window.w, window.h);
  return sf.raw(ii, window.x, window.y) / (kSampleScale * std);
}

}  // namespace brickscan
