#pragma once

#include <span>
#include <string>
#include <vector>

#include "brickscan/cascade.hpp"
#include "brickscan/geometry.hpp"
#include "brickscan/raster.hpp"

namespace brickscan {

struct Detection {
  Rect rect;  // pixels
  double score = 0.0;
  int neighbors = 1;
  std::string label = "brick";
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectParams {
  double scale_factor = 1.1;
  int min_neighbors = 3;
  int min_w = 0, min_h = 0;  // 0: base window
  int max_w = 0, max_h = 0;  // 0: image size
  double step = 1.0;
  double group_eps = 0.2;
  bool rotated_pass = false;  // also scan the image turned 90 degrees

  /// The paper's `detectMultiScale(gray, 10, 25)` call taken literally.
  static DetectParams paper_preset();
};

/// Every window accepted by the cascade, unflat, at all scales. Order is
/// scale, then row, then column.
std::vector<Detection> detect_candidates(const GrayRaster& img, const CascadeModel& model, const DetectParams& params);

/// Candidates grouped with group_rectangles(min_neighbors, group_eps). With
/// rotated_pass the turned image is scanned and grouped separately and its
/// detections are mapped back and appended.
std::vector<Detection> detect_multiscale(const GrayRaster& img, const CascadeModel& model,
                                         const DetectParams& params);

/// Shrinks each rect about its centre by 1 + dilation per dimension, turning
/// detection windows back into brick-face rects.
void to_face_rects(std::vector<Detection>& dets, double dilation);

/// Clusters by the transitive closure of |dx| <= eps*mean_w, |dy| <= eps*mean_h,
/// |dw| <= eps*mean_w, |dh| <= eps*mean_h. Clusters smaller than
/// min_neighbors are dropped; the rest yield the mean rect, the max score and
/// neighbors = size, ordered by their first member. min_neighbors = 0 returns
/// the input with neighbors = 1.
std::vector<Detection> group_rectangles(std::span<const Detection> rects, int min_neighbors, double eps = 0.2);

bool similar_rects(const Rect& a, const Rect& b, double eps);

// Template matching -----------------------------------------------------------

struct ScoreMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, one per valid offset
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct TemplatePeak {
  int x = 0;
  int y = 0;
  double score = 0.0;
};

struct TemplateMatch {
  ScoreMap scores;
  std::vector<TemplatePeak> peaks;  // descending score
};

/// Zero-normalised cross-correlation at every offset, then greedy
/// non-maximum suppression: a peak suppresses offsets closer than the
/// template size on both axes. Flat image windows score 0. Throws
/// FlatTemplate, InvalidArgument if the template does not fit.
TemplateMatch match_template_ncc(const GrayRaster& img, const GrayRaster& tmpl, double threshold = 0.9);

/// Scores mapped from [-1, 1] to [0, 1] for PNG export.
GrayRaster score_map_image(const ScoreMap& map);

}  // namespace brickscan
