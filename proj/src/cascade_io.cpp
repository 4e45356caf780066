#include <cmath>

#include "brickscan/cascade.hpp"
#include "json.hpp"

namespace brickscan {

using nlohmann::json;

namespace {

constexpr const char* kCascadeFormat = "brickscan-cascade-v1";

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("cascade JSON missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("cascade JSON field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string cascade_to_json(const CascadeModel& model) {
  json stages = json::array();
  for (const auto& stage : model.stages) {
    json weak = json::array();
    for (const auto& w : stage.weak) {
      const auto& r = w.feature.rect;
      weak.push_back({{"kind", std::string(to_string(w.feature.kind))},
                      {"rect", {r.x, r.y, r.w, r.h}},
                      {"threshold", w.threshold},
                      {"polarity", w.polarity},
                      {"alpha", w.alpha}});
    }
    stages.push_back({{"stage_threshold", stage.stage_threshold}, {"weak", std::move(weak)}});
  }
  const auto& m = model.metadata;
  json meta = {{"modality", m.modality},
               {"target_fpr", m.target_fpr},
               {"f_max", m.f_max},
               {"d_min", m.d_min},
               {"max_weak", m.max_weak},
               {"feature_pool_size", m.feature_pool_size},
               {"max_stages", m.max_stages},
               {"positives", m.positives},
               {"negatives", m.negatives},
               {"crop_dilation", m.crop_dilation},
               {"stage_detection_rates", m.stage_detection_rates},
               {"stage_false_positive_rates", m.stage_false_positive_rates}};
  json root = {{"format", kCascadeFormat},
               {"window", {{"width", model.window_w}, {"height", model.window_h}}},
               {"seed", m.seed},
               {"metadata", std::move(meta)},
               {"stages", std::move(stages)}};
  return root.dump(1) + "\n";
}

CascadeModel cascade_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("cascade JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::InvalidArgument, "cascade JSON must be an object");
  const auto format = field<std::string>(root, "format");
  if (format != kCascadeFormat) {
    throw Error(ErrorCode::FormatMismatch, "expected format '" + std::string(kCascadeFormat) + "', got '" + format + "'");
  }
  CascadeModel model;
  const auto& window = root.at("window");
  model.window_w = field<int>(window, "width");
  model.window_h = field<int>(window, "height");
  auto& m = model.metadata;
  m.seed = field<std::uint64_t>(root, "seed");
  if (root.contains("metadata")) {
    const auto& meta = root.at("metadata");
    m.modality = field<std::string>(meta, "modality");
    m.target_fpr = field<double>(meta, "target_fpr");
    m.f_max = field<double>(meta, "f_max");
    m.d_min = field<double>(meta, "d_min");
    m.max_weak = field<int>(meta, "max_weak");
    m.feature_pool_size = field<int>(meta, "feature_pool_size");
    m.max_stages = field<int>(meta, "max_stages");
    m.positives = field<int>(meta, "positives");
    m.negatives = field<int>(meta, "negatives");
    m.crop_dilation = field<double>(meta, "crop_dilation");
    m.stage_detection_rates = field<std::vector<double>>(meta, "stage_detection_rates");
    m.stage_false_positive_rates = field<std::vector<double>>(meta, "stage_false_positive_rates");
  }
  for (const auto& js : field<json>(root, "stages")) {
    CascadeStage stage;
    stage.stage_threshold = field<double>(js, "stage_threshold");
    for (const auto& jw : field<json>(js, "weak")) {
      WeakClassifier w;
      w.feature.kind = haar_kind_from_string(field<std::string>(jw, "kind"));
      const auto rect = field<std::vector<int>>(jw, "rect");
      if (rect.size() != 4) throw Error(ErrorCode::InvalidArgument, "feature rect needs 4 entries");
      w.feature.rect = {rect[0], rect[1], rect[2], rect[3]};
      w.threshold = field<double>(jw, "threshold");
      w.polarity = field<int>(jw, "polarity");
      w.alpha = field<double>(jw, "alpha");
      stage.weak.push_back(w);
    }
    model.stages.push_back(std::move(stage));
  }
  validate(model);
  return model;
}

}  // namespace brickscan
