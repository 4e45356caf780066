#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "brickscan/bake.hpp"
#include "brickscan/detect.hpp"
#include "brickscan/wall.hpp"

namespace brickscan {

// Evaluation ------------------------------------------------------------------

struct EvalReport {
  double iou_threshold = 0.5;
  int detections = 0;
  int annotations = 0;
  int true_positives = 0;
  double precision = 0.0;
  bool precision_defined = false;  // false when there are no detections
  double recall = 0.0;
  bool recall_defined = false;     // false when there are no annotations
  double recall_h = 0.0;
  double recall_v = 0.0;
  int annotations_h = 0;
  int annotations_v = 0;
  std::vector<int> labels_per_brick;  // per annotation, detections whose centre lies inside
  int assigned_labels = 0;            // sum of labels_per_brick
  int detected_bricks = 0;            // bricks with at least one label
  double mean_labels_per_brick = 0.0; // over detected bricks
};

/// Greedy one-to-one matching by descending IoU (ties: detection index, then
/// annotation index); pairs at or above iou_threshold count as true
/// positives. Labels per brick are counted separately by centre containment.
EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<Annotation>& annotations,
                    const OrthoFrame& frame, double iou_threshold = 0.5);

// Enrichment ------------------------------------------------------------------

struct BrickClass {
  std::string name;
  BrickType type = BrickType::Standard;
  double length = 240.0;  // face, mm
  double height = 45.0;
  double depth = 240.0;
};

/// STANDARD and LONG classes of a brick spec (240x45x240 and 360x45x360 by default).
std::vector<BrickClass> default_catalog(const BrickSpec& spec = {});

struct EnrichedBrick {
  Detection detection;
  Orientation orientation = Orientation::H;
  BrickType brick_type = BrickType::Standard;
  std::string class_name;
  double inferred_depth = 0.0;
  Rect world_rect;  // mm
};

/// Maps detections to world mm, orients them (H when width >= height) and
/// picks the catalog class nearest in relative (long, short) face size.
std::vector<EnrichedBrick> enrich(const std::vector<Detection>& detections, const OrthoFrame& frame,
                                  const std::vector<BrickClass>& catalog);

// Overlay ---------------------------------------------------------------------

struct OverlayStyle {
  Rgb box{0.0, 0.0, 1.0};
  Rgb text{1.0, 0.5, 0.0};
  int thickness = 2;
  bool labels = true;
};

/// Grayscale promoted to RGB with each detection outlined inside its rect
/// and its label drawn above the top-left corner (inside when there is no
/// room). Everything is clipped to the image.
RgbRaster render_overlay(const GrayRaster& img, const std::vector<Detection>& detections,
                         const OverlayStyle& style = {});

/// 5x7 bitmap text; lowercase is drawn as uppercase, unknown glyphs as boxes.
void draw_text(RgbRaster& img, int x, int y, const std::string& text, const Rgb& color);

// File formats ------------------------------------------------------------------

std::string annotations_to_json(const std::vector<Annotation>& annotations);
std::vector<Annotation> annotations_from_json(const std::string& text);

std::string frame_to_json(const OrthoFrame& frame, const BakeParams& params);
OrthoFrame frame_from_json(const std::string& text, BakeParams* params = nullptr);

struct DetectionSet {
  std::vector<Detection> detections;
  OrthoFrame frame;
  std::string image;  // source map, informational
};
std::string detections_to_json(const DetectionSet& set);
DetectionSet detections_from_json(const std::string& text);

std::string report_to_json(const EvalReport& report, int min_neighbors);

struct SweepRow {
  int min_neighbors = 0;
  EvalReport report;
};
inline constexpr const char* kSweepHeader =
    "min_neighbors,detections,precision,recall,recall_H,recall_V,mean_labels_per_brick";
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace brickscan
