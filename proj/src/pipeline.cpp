#include "brickscan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "brickscan/error.hpp"
#include "json.hpp"

namespace brickscan {

using nlohmann::json;

EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<Annotation>& annotations,
                    const OrthoFrame& frame, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "iou_threshold must be in (0, 1)");
  }
  EvalReport r;
  r.iou_threshold = iou_threshold;
  r.detections = static_cast<int>(detections.size());
  r.annotations = static_cast<int>(annotations.size());

  std::vector<Rect> det_mm;
  det_mm.reserve(detections.size());
  for (const auto& d : detections) det_mm.push_back(frame.pixel_to_world(d.rect));

  struct Pair {
    double iou;
    std::size_t det, ann;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < det_mm.size(); ++i) {
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      const double v = iou(det_mm[i], annotations[j].rect);
      if (v >= iou_threshold) pairs.push_back({v, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.det != b.det) return a.det < b.det;
    return a.ann < b.ann;
  });
  std::vector<bool> det_used(det_mm.size(), false), ann_used(annotations.size(), false);
  int tp_h = 0, tp_v = 0;
  for (const auto& p : pairs) {
    if (det_used[p.det] || ann_used[p.ann]) continue;
    det_used[p.det] = ann_used[p.ann] = true;
    ++r.true_positives;
    (annotations[p.ann].orientation == Orientation::H ? tp_h : tp_v) += 1;
  }
  for (const auto& a : annotations) (a.orientation == Orientation::H ? r.annotations_h : r.annotations_v) += 1;

  r.precision_defined = r.detections > 0;
  r.precision = r.precision_defined ? static_cast<double>(r.true_positives) / r.detections : 0.0;
  r.recall_defined = r.annotations > 0;
  r.recall = r.recall_defined ? static_cast<double>(r.true_positives) / r.annotations : 0.0;
  r.recall_h = r.annotations_h > 0 ? static_cast<double>(tp_h) / r.annotations_h : 0.0;
  r.recall_v = r.annotations_v > 0 ? static_cast<double>(tp_v) / r.annotations_v : 0.0;

  r.labels_per_brick.assign(annotations.size(), 0);
  for (const auto& d : det_mm) {
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      if (annotations[j].rect.contains(d.cx(), d.cy())) {
        ++r.labels_per_brick[j];
        ++r.assigned_labels;
        break;
      }
    }
  }
  for (int n : r.labels_per_brick) r.detected_bricks += n > 0 ? 1 : 0;
  r.mean_labels_per_brick =
      r.detected_bricks > 0 ? static_cast<double>(r.assigned_labels) / r.detected_bricks : 0.0;
  return r;
}

std::vector<BrickClass> default_catalog(const BrickSpec& spec) {
  return {{"STANDARD", BrickType::Standard, spec.face_length, spec.face_height, spec.depth},
          {"LONG", BrickType::Long, spec.face_length * spec.long_length_factor, spec.face_height,
           spec.depth * spec.long_depth_factor}};
}

std::vector<EnrichedBrick> enrich(const std::vector<Detection>& detections, const OrthoFrame& frame,
                                  const std::vector<BrickClass>& catalog) {
  if (catalog.empty()) throw Error(ErrorCode::InvalidArgument, "brick catalog is empty");
  std::vector<EnrichedBrick> out;
  out.reserve(detections.size());
  for (const auto& d : detections) {
    EnrichedBrick b;
    b.detection = d;
    b.world_rect = frame.pixel_to_world(d.rect);
    b.orientation = b.world_rect.w >= b.world_rect.h ? Orientation::H : Orientation::V;
    const double lng = std::max(b.world_rect.w, b.world_rect.h), shrt = std::min(b.world_rect.w, b.world_rect.h);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : catalog) {
      const double dl = (lng - c.length) / c.length, ds = (shrt - c.height) / c.height;
      const double dist = dl * dl + ds * ds;
      if (dist < best) {
        best = dist;
        b.brick_type = c.type;
        b.class_name = c.name;
        b.inferred_depth = c.depth;
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

constexpr const char* kAnnotationsFormat = "brickscan-annotations-v1";
constexpr const char* kDetectionsFormat = "brickscan-detections-v1";
constexpr const char* kFrameFormat = "brickscan-frame-v1";

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " is not valid JSON: " + e.what());
  }
}

void check_format(const json& root, const char* format) {
  if (!root.is_object() || !root.contains("format") || !root.at("format").is_string()) {
    throw Error(ErrorCode::FormatMismatch, std::string("missing format tag, expected '") + format + "'");
  }
  if (root.at("format").get<std::string>() != format) {
    throw Error(ErrorCode::FormatMismatch,
                std::string("expected format '") + format + "', got '" + root.at("format").get<std::string>() + "'");
  }
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "': " + e.what());
  }
}

json rect_json(const Rect& r) { return {r.x, r.y, r.w, r.h}; }

Rect rect_from(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, std::string("'") + key + "' needs 4 numbers");
  return {v[0], v[1], v[2], v[3]};
}

json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 vec_from(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  if (v.size() != 3) throw Error(ErrorCode::InvalidArgument, std::string("'") + key + "' needs 3 numbers");
  return {v[0], v[1], v[2]};
}

json frame_object(const OrthoFrame& f) {
  return {{"origin", vec_json(f.origin)},
          {"right", vec_json(f.right)},
          {"up", vec_json(f.up)},
          {"width_mm", f.width},
          {"height_mm", f.height},
          {"pixel_size", f.pixel_size},
          {"cols", f.cols()},
          {"rows", f.rows()}};
}

OrthoFrame frame_from_object(const json& j) {
  OrthoFrame f;
  f.origin = vec_from(j, "origin");
  f.right = vec_from(j, "right");
  f.up = vec_from(j, "up");
  f.width = get<double>(j, "width_mm");
  f.height = get<double>(j, "height_mm");
  f.pixel_size = get<double>(j, "pixel_size");
  f.validate();
  return f;
}

}  // namespace

std::string annotations_to_json(const std::vector<Annotation>& annotations) {
  json list = json::array();
  for (const auto& a : annotations) {
    list.push_back({{"brick_id", a.brick_id},
                    {"rect_mm", rect_json(a.rect)},
                    {"orientation", std::string(to_string(a.orientation))},
                    {"brick_type", std::string(to_string(a.brick_type))}});
  }
  return json{{"format", kAnnotationsFormat}, {"annotations", std::move(list)}}.dump(1) + "\n";
}

std::vector<Annotation> annotations_from_json(const std::string& text) {
  const json root = parse(text, "annotations");
  check_format(root, kAnnotationsFormat);
  std::vector<Annotation> out;
  for (const auto& j : get<json>(root, "annotations")) {
    Annotation a;
    a.brick_id = get<int>(j, "brick_id");
    a.rect = rect_from(j, "rect_mm");
    a.orientation = orientation_from_string(get<std::string>(j, "orientation"));
    a.brick_type = brick_type_from_string(get<std::string>(j, "brick_type"));
    out.push_back(a);
  }
  return out;
}

std::string frame_to_json(const OrthoFrame& frame, const BakeParams& params) {
  json root = frame_object(frame);
  root["format"] = kFrameFormat;
  root["depth_range"] = params.depth_range;
  root["rays_per_pixel"] = params.rays_per_pixel;
  root["max_dist"] = params.max_dist;
  root["gain"] = params.gain;
  root["seed"] = params.seed;
  return root.dump(1) + "\n";
}

OrthoFrame frame_from_json(const std::string& text, BakeParams* params) {
  const json root = parse(text, "frame");
  check_format(root, kFrameFormat);
  if (params) {
    params->depth_range = get<double>(root, "depth_range");
    params->rays_per_pixel = get<int>(root, "rays_per_pixel");
    params->max_dist = get<double>(root, "max_dist");
    params->gain = get<double>(root, "gain");
    params->seed = get<std::uint64_t>(root, "seed");
  }
  return frame_from_object(root);
}

std::string detections_to_json(const DetectionSet& set) {
  json list = json::array();
  for (const auto& d : set.detections) {
    list.push_back({{"rect_px", rect_json(d.rect)}, {"score", d.score}, {"neighbors", d.neighbors}, {"label", d.label}});
  }
  return json{{"format", kDetectionsFormat},
              {"image", set.image},
              {"frame", frame_object(set.frame)},
              {"detections", std::move(list)}}
             .dump(1) +
         "\n";
}

DetectionSet detections_from_json(const std::string& text) {
  const json root = parse(text, "detections");
  check_format(root, kDetectionsFormat);
  DetectionSet set;
  set.image = get<std::string>(root, "image");
  set.frame = frame_from_object(get<json>(root, "frame"));
  for (const auto& j : get<json>(root, "detections")) {
    Detection d;
    d.rect = rect_from(j, "rect_px");
    d.score = get<double>(j, "score");
    d.neighbors = get<int>(j, "neighbors");
    d.label = get<std::string>(j, "label");
    if (!(d.rect.w > 0.0 && d.rect.h > 0.0) || d.neighbors < 1) {
      throw Error(ErrorCode::InvalidArgument, "detection needs w, h > 0 and neighbors >= 1");
    }
    set.detections.push_back(std::move(d));
  }
  return set;
}

std::string report_to_json(const EvalReport& r, int min_neighbors) {
  json hist = json::object();
  for (int n : r.labels_per_brick) {
    const auto key = std::to_string(n);
    hist[key] = hist.value(key, 0) + 1;
  }
  json root = {{"format", "brickscan-report-v1"},
               {"parameters", {{"iou_threshold", r.iou_threshold}, {"min_neighbors", min_neighbors}}},
               {"detections", r.detections},
               {"annotations", r.annotations},
               {"true_positives", r.true_positives},
               {"precision", r.precision},
               {"precision_defined", r.precision_defined},
               {"recall", r.recall},
               {"recall_defined", r.recall_defined},
               {"recall_H", r.recall_h},
               {"recall_V", r.recall_v},
               {"annotations_H", r.annotations_h},
               {"annotations_V", r.annotations_v},
               {"labels_per_brick", r.labels_per_brick},
               {"label_histogram", std::move(hist)},
               {"assigned_labels", r.assigned_labels},
               {"detected_bricks", r.detected_bricks},
               {"mean_labels_per_brick", r.mean_labels_per_brick}};
  return root.dump(1) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  char line[256];
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", row.min_neighbors, r.detections,
                  r.precision, r.recall, r.recall_h, r.recall_v, r.mean_labels_per_brick);
    out += line;
  }
  return out;
}

}  // namespace brickscan
