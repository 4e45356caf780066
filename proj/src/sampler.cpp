#include "brickscan/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "brickscan/error.hpp"
#include "brickscan/io.hpp"
#include "brickscan/parallel.hpp"
#include "brickscan/rng.hpp"
#include "json.hpp"

namespace brickscan {

using nlohmann::json;

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Height: return "HEIGHT";
    case Modality::NormalR: return "NORMAL_R";
    case Modality::NormalG: return "NORMAL_G";
    case Modality::AO: return "AO";
    case Modality::Curvature: return "CURVATURE";
  }
  return "?";
}

std::string_view to_string(SampleLabel l) { return l == SampleLabel::Positive ? "POSITIVE" : "NEGATIVE"; }

Modality modality_from_string(std::string_view s) {
  for (auto m : {Modality::Height, Modality::NormalR, Modality::NormalG, Modality::AO, Modality::Curvature}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown modality '" + std::string(s) + "'");
}

SampleLabel sample_label_from_string(std::string_view s) {
  if (s == "POSITIVE") return SampleLabel::Positive;
  if (s == "NEGATIVE") return SampleLabel::Negative;
  throw Error(ErrorCode::InvalidArgument, "unknown sample label '" + std::string(s) + "'");
}

GrayRaster select_modality(const SurfaceMapSet& maps, Modality m) {
  switch (m) {
    case Modality::Height: return maps.height;
    case Modality::NormalR: return channel(maps.normal, 0);
    case Modality::NormalG: return channel(maps.normal, 1);
    case Modality::AO: return maps.ao;
    case Modality::Curvature: return maps.curvature;
  }
  return maps.height;
}

GrayRaster bake_modality(const RayCaster& caster, const OrthoFrame& frame, Modality m, const BakeParams& params) {
  switch (m) {
    case Modality::Height: return bake_height(caster, frame, params.depth_range);
    case Modality::NormalR: return channel(bake_normal(caster, frame), 0);
    case Modality::NormalG: return channel(bake_normal(caster, frame), 1);
    case Modality::AO: return bake_ao(caster, frame, params.rays_per_pixel, params.max_dist, params.seed);
    case Modality::Curvature: {
      const double gain = params.gain < 0.0 ? default_curvature_gain(frame.pixel_size) : params.gain;
      return curvature_from_height(bake_height(caster, frame, params.depth_range), frame.pixel_size,
                                   params.depth_range, gain);
    }
  }
  return {};
}

int DatasetManifest::count(SampleLabel l) const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.label == l; }));
}

// ---------------------------------------------------------------------------
// Manifest JSON

namespace {

constexpr const char* kManifestFormat = "brickscan-dataset-v1";

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorCode::ManifestSchema, what); }

void expect_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) schema_error(where + " must be an object");
  for (const char* k : keys) {
    if (!obj.contains(k)) schema_error(where + " missing '" + k + "'");
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      schema_error(where + " has unknown field '" + key + "'");
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    schema_error(where + " field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    const auto& p = e.provenance;
    entries.push_back({{"path", e.path},
                       {"label", std::string(to_string(e.label))},
                       {"modality", std::string(to_string(e.modality))},
                       {"provenance",
                        {{"seed", p.seed},
                         {"generator", p.generator},
                         {"params", p.params},
                         {"source_rect", {p.source_rect.x, p.source_rect.y, p.source_rect.w, p.source_rect.h}}}}});
  }
  json root = {{"format", kManifestFormat},
               {"seed", m.seed},
               {"window", {{"width", m.window_w}, {"height", m.window_h}}},
               {"counts", {{"positive", m.count(SampleLabel::Positive)}, {"negative", m.count(SampleLabel::Negative)}}},
               {"entries", std::move(entries)}};
  return root.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    schema_error(std::string("manifest is not valid JSON: ") + e.what());
  }
  expect_keys(root, {"format", "seed", "window", "counts", "entries"}, "manifest");
  if (get<std::string>(root, "format", "manifest") != kManifestFormat) {
    throw Error(ErrorCode::FormatMismatch, std::string("manifest format must be '") + kManifestFormat + "'");
  }
  DatasetManifest m;
  m.seed = get<std::uint64_t>(root, "seed", "manifest");
  const auto& window = root.at("window");
  expect_keys(window, {"width", "height"}, "window");
  m.window_w = get<int>(window, "width", "window");
  m.window_h = get<int>(window, "height", "window");
  const auto& counts = root.at("counts");
  expect_keys(counts, {"positive", "negative"}, "counts");
  if (!root.at("entries").is_array()) schema_error("entries must be an array");
  std::set<std::string> paths;
  for (const auto& je : root.at("entries")) {
    expect_keys(je, {"path", "label", "modality", "provenance"}, "entry");
    ManifestEntry e;
    e.path = get<std::string>(je, "path", "entry");
    if (!paths.insert(e.path).second) schema_error("duplicate entry path '" + e.path + "'");
    try {
      e.label = sample_label_from_string(get<std::string>(je, "label", "entry"));
      e.modality = modality_from_string(get<std::string>(je, "modality", "entry"));
    } catch (const Error& err) {
      schema_error(err.what());
    }
    const auto& jp = je.at("provenance");
    expect_keys(jp, {"seed", "generator", "params", "source_rect"}, "provenance");
    e.provenance.seed = get<std::uint64_t>(jp, "seed", "provenance");
    e.provenance.generator = get<std::string>(jp, "generator", "provenance");
    e.provenance.params = get<std::map<std::string, double>>(jp, "params", "provenance");
    const auto r = get<std::vector<double>>(jp, "source_rect", "provenance");
    if (r.size() != 4) schema_error("source_rect needs 4 entries");
    e.provenance.source_rect = {r[0], r[1], r[2], r[3]};
    m.entries.push_back(std::move(e));
  }
  if (get<int>(counts, "positive", "counts") != m.count(SampleLabel::Positive) ||
      get<int>(counts, "negative", "counts") != m.count(SampleLabel::Negative)) {
    schema_error("counts do not match the entry list");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Generation

Rect positive_crop_rect(const Rect& annotation, double dilation, int window_w, int window_h, bool vertical) {
  Rect r = dilate(annotation, dilation);
  const double aspect = vertical ? static_cast<double>(window_h) / window_w : static_cast<double>(window_w) / window_h;
  if (r.w / r.h > aspect) {
    const double h = r.w / aspect;
    r = {r.x, r.y - 0.5 * (h - r.h), r.w, h};
  } else {
    const double w = r.h * aspect;
    r = {r.x - 0.5 * (w - r.w), r.y, w, r.h};
  }
  return r;
}

namespace {

void check_render(const SampleRender& render) {
  if (render.window_w < 8 || render.window_h < 8) throw Error(ErrorCode::InvalidArgument, "window must be >= 8 px");
  if (!(render.pixel_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel_size must be > 0");
  if (!(render.dilation >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dilation must be >= 0");
}

/// Crop in map pixels to the window, turning vertical crops to landscape.
GrayRaster crop_to_window(const GrayRaster& map, const OrthoFrame& frame, const Rect& crop_mm, bool vertical,
                          const SampleRender& render) {
  const Rect px = frame.world_to_pixel(crop_mm);
  if (!vertical) return resample_bilinear(map, px, render.window_w, render.window_h);
  return rotate90(resample_bilinear(map, px, render.window_h, render.window_w));
}

}  // namespace

Dataset generate_positives(int n, const BrickSpec& brick, const PositiveVariation& variation,
                           const SampleRender& render, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  if (!(variation.scale_min >= 0.5 && variation.scale_max <= 2.0 && variation.scale_min <= variation.scale_max)) {
    throw Error(ErrorCode::InvalidArgument, "scale range must lie within [0.5, 2.0]");
  }
  if (!(variation.damage_min >= 0.0 && variation.damage_min <= variation.damage_max)) {
    throw Error(ErrorCode::InvalidArgument, "damage range must be ordered and >= 0");
  }
  brick.validate();
  check_render(render);

  Dataset ds;
  ds.manifest.seed = seed;
  ds.manifest.window_w = render.window_w;
  ds.manifest.window_h = render.window_h;
  ds.manifest.entries.resize(static_cast<std::size_t>(n));
  ds.images.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const std::uint64_t sample_seed = derive_seed(seed, i);
    CounterRng rng(sample_seed);
    const double scale = rng.uniform(variation.scale_min, variation.scale_max);
    const double damage = rng.uniform(variation.damage_min, variation.damage_max);
    const bool vertical = variation.allow_90_rotation && rng.uniform() < 0.5;

    BrickSpec spec = brick;
    spec.damage_amplitude = damage;
    const double length = brick.face_length * scale, height = brick.face_height * scale;
    const double depth = brick.depth * scale;
    TriangleMesh mesh = generate_brick(spec, length, height, depth, vertical, derive_seed(sample_seed, 1));

    const Rect face = vertical ? Rect{-0.5 * height, -0.5 * length, height, length}
                               : Rect{-0.5 * length, -0.5 * height, length, height};
    const Rect crop = positive_crop_rect(face, render.dilation, render.window_w, render.window_h, vertical);
    const double pad = 2.0 * render.pixel_size;
    mesh.append(make_box({crop.x - pad, crop.y - pad, -variation.backdrop_recess - depth},
                         {crop.right() + pad, crop.bottom() + pad, -variation.backdrop_recess}));

    const OrthoFrame frame = frame_from_mesh(mesh, render.pixel_size, 0.0);
    BakeParams bake = render.bake;
    bake.seed = derive_seed(sample_seed, 2);
    const GrayRaster map = bake_modality(RayCaster(mesh), frame, render.modality, bake);
    ds.images[i] = crop_to_window(map, frame, crop, vertical, render);

    auto& e = ds.manifest.entries[i];
    e.label = SampleLabel::Positive;
    e.modality = render.modality;
    e.provenance.seed = sample_seed;
    e.provenance.generator = "single-brick";
    e.provenance.params = {{"scale", scale}, {"damage_amplitude", damage}, {"rotation", vertical ? 90.0 : 0.0}, {"dilation", render.dilation}};
    e.provenance.source_rect = crop;
  });
  return ds;
}

Dataset generate_positives_in_situ(int n, const std::vector<Annotation>& annotations, const GrayRaster& map,
                                   const OrthoFrame& frame, const PositiveVariation& variation,
                                   const SampleRender& render, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  check_render(render);
  std::vector<const Annotation*> eligible;
  for (const auto& a : annotations) {
    if (a.orientation == Orientation::H || variation.allow_90_rotation) eligible.push_back(&a);
  }
  if (eligible.empty()) throw Error(ErrorCode::InvalidArgument, "no annotations usable as positives");

  Dataset ds;
  ds.manifest.seed = seed;
  ds.manifest.window_w = render.window_w;
  ds.manifest.window_h = render.window_h;
  ds.manifest.entries.resize(static_cast<std::size_t>(n));
  ds.images.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const std::uint64_t sample_seed = derive_seed(seed, i);
    CounterRng rng(sample_seed);
    const Annotation& a = *eligible[rng.below(eligible.size())];
    const bool vertical = a.orientation == Orientation::V;
    Rect crop = positive_crop_rect(a.rect, render.dilation, render.window_w, render.window_h, vertical);
    const double shift = variation.in_situ_shift * frame.pixel_size;
    const double dx = rng.uniform(-shift, shift), dy = rng.uniform(-shift, shift);
    const double k = 1.0 + rng.uniform(-variation.in_situ_scale, variation.in_situ_scale);
    crop = {crop.x + dx + 0.5 * (1.0 - k) * crop.w, crop.y + dy + 0.5 * (1.0 - k) * crop.h, k * crop.w, k * crop.h};
    ds.images[i] = crop_to_window(map, frame, crop, vertical, render);
    auto& e = ds.manifest.entries[i];
    e.label = SampleLabel::Positive;
    e.modality = render.modality;
    e.provenance.seed = sample_seed;
    e.provenance.generator = "in-situ";
    e.provenance.params = {{"brick_id", a.brick_id}, {"rotation", vertical ? 90.0 : 0.0},
                            {"shift_x", dx},          {"shift_y", dy},
                            {"crop_scale", k},        {"dilation", render.dilation}};
    e.provenance.source_rect = crop;
  });
  return ds;
}

NegativeSampler::NegativeSampler(std::vector<Annotation> annotations, GrayRaster map, OrthoFrame frame,
                                 NegativeParams params, SampleRender render)
    : annotations_(std::move(annotations)),
      map_(std::move(map)),
      frame_(frame),
      params_(params),
      render_(render) {
  if (!(params_.scale_min > 0.0 && params_.scale_min <= params_.scale_max)) {
    throw Error(ErrorCode::InvalidArgument, "negative scale range must be ordered and > 0");
  }
  if (!(params_.max_iou > 0.0 && params_.max_iou <= 1.0)) throw Error(ErrorCode::InvalidArgument, "max_iou must be in (0, 1]");
  check_render(render_);
  if (map_.width != frame_.cols() || map_.height != frame_.rows()) {
    throw Error(ErrorCode::InvalidArgument, "map size does not match its frame");
  }
  extent_ = frame_.pixel_to_world({0.0, 0.0, double(map_.width), double(map_.height)});
}

std::optional<NegativeCrop> NegativeSampler::attempt(CounterRng& rng) const {
  const double scale = rng.uniform(params_.scale_min, params_.scale_max);
  const double w = render_.window_w * render_.pixel_size * scale, h = render_.window_h * render_.pixel_size * scale;
  if (w > extent_.w || h > extent_.h) {
    throw Error(ErrorCode::NegativePoolExhausted, "negative crops do not fit inside the wall map");
  }
  const Rect crop{extent_.x + rng.uniform(0.0, extent_.w - w), extent_.y + rng.uniform(0.0, extent_.h - h), w, h};
  for (const auto& a : annotations_) {
    if (iou(crop, a.rect) >= params_.max_iou) return std::nullopt;
  }
  return NegativeCrop{crop_to_window(map_, frame_, crop, false, render_), crop, scale};
}

NegativeDraw NegativeSampler::as_draw(std::uint64_t seed) const {
  return [this, seed](std::uint64_t index) -> std::optional<GrayRaster> {
    CounterRng rng(derive_seed(seed, index));
    auto crop = attempt(rng);
    if (!crop) return std::nullopt;
    return std::move(crop->image);
  };
}

ScanWindowSampler::ScanWindowSampler(const std::vector<Annotation>& annotations, GrayRaster map,
                                     const OrthoFrame& frame, double max_iou, int window_w, int window_h,
                                     double scale_factor, double step, std::uint64_t seed)
    : map_(std::move(map)), window_w_(window_w), window_h_(window_h) {
  if (!(scale_factor > 1.0) || !(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "scan needs scale_factor > 1, step > 0");
  int last_w = -1, last_h = -1;
  for (int k = 0;; ++k) {
    const double sc = std::pow(scale_factor, k);
    const int w = static_cast<int>(std::lround(window_w * sc)), h = static_cast<int>(std::lround(window_h * sc));
    if (w > map_.width || h > map_.height) break;
    if (w == last_w && h == last_h) continue;
    last_w = w;
    last_h = h;
    const int stride = std::max(1, static_cast<int>(std::lround(step * sc)));
    for (int y = 0; y + h <= map_.height; y += stride) {
      for (int x = 0; x + w <= map_.width; x += stride) {
        const Rect mm = frame.pixel_to_world({double(x), double(y), double(w), double(h)});
        const bool clear = std::all_of(annotations.begin(), annotations.end(),
                                       [&](const Annotation& a) { return iou(mm, a.rect) < max_iou; });
        if (clear) windows_.push_back({x, y, w, h});
      }
    }
  }
  CounterRng rng(seed);
  for (std::size_t i = windows_.size(); i > 1; --i) std::swap(windows_[i - 1], windows_[rng.below(i)]);
}

NegativeDraw ScanWindowSampler::as_draw() const {
  return [this](std::uint64_t index) -> std::optional<GrayRaster> {
    if (index >= windows_.size()) return std::nullopt;
    const RectI& r = windows_[index];
    return resample_bilinear(map_, Rect{double(r.x), double(r.y), double(r.w), double(r.h)}, window_w_, window_h_);
  };
}

Dataset generate_negatives(int n, const std::vector<Annotation>& annotations, const GrayRaster& map,
                           const OrthoFrame& frame, const NegativeParams& params, const SampleRender& render,
                           std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  const NegativeSampler sampler(annotations, map, frame, params, render);
  const long long budget = static_cast<long long>(params.rejection_factor) * n;

  Dataset ds;
  ds.manifest.seed = seed;
  ds.manifest.window_w = render.window_w;
  ds.manifest.window_h = render.window_h;
  ds.manifest.entries.resize(static_cast<std::size_t>(n));
  ds.images.resize(static_cast<std::size_t>(n));
  std::vector<long long> rejections(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const std::uint64_t sample_seed = derive_seed(seed, i);
    CounterRng rng(sample_seed);
    while (rejections[i] <= budget) {
      auto crop = sampler.attempt(rng);
      if (!crop) {
        ++rejections[i];
        continue;
      }
      ds.images[i] = std::move(crop->image);
      auto& e = ds.manifest.entries[i];
      e.label = SampleLabel::Negative;
      e.modality = render.modality;
      e.provenance.seed = sample_seed;
      e.provenance.generator = "negative";
      e.provenance.params = {{"scale", crop->scale}};
      e.provenance.source_rect = crop->source_rect;
      return;
    }
  });
  long long total = 0;
  for (auto r : rejections) total += r;
  if (total > budget) {
    throw Error(ErrorCode::NegativePoolExhausted, "wall yields fewer than " + std::to_string(n) +
                                                      " negative crops within " + std::to_string(budget) +
                                                      " rejections");
  }
  return ds;
}

Dataset merge(Dataset a, const Dataset& b) {
  if (a.manifest.window_w != b.manifest.window_w || a.manifest.window_h != b.manifest.window_h) {
    throw Error(ErrorCode::InvalidArgument, "datasets have different window sizes");
  }
  a.manifest.entries.insert(a.manifest.entries.end(), b.manifest.entries.begin(), b.manifest.entries.end());
  a.images.insert(a.images.end(), b.images.begin(), b.images.end());
  return a;
}

void write_dataset(Dataset& ds, const std::filesystem::path& dir) {
  if (ds.images.size() != ds.manifest.entries.size()) {
    throw Error(ErrorCode::InvalidArgument, "dataset images and entries differ in count");
  }
  int pos = 0, neg = 0;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    auto& e = ds.manifest.entries[i];
    const bool positive = e.label == SampleLabel::Positive;
    char name[32];
    std::snprintf(name, sizeof name, "%06d.png", positive ? pos++ : neg++);
    e.path = std::string(positive ? "positive/" : "negative/") + name;
    write_png(ds.images[i], dir / e.path, PngDepth::Sixteen);
  }
  write_text_file(dir / "manifest.json", manifest_to_json(ds.manifest));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.manifest = manifest_from_json(read_text_file(manifest_path));
  const auto base = manifest_path.parent_path();
  ds.images.resize(ds.manifest.entries.size());
  parallel_for(ds.images.size(), [&](std::size_t i) {
    ds.images[i] = read_png_gray(base / ds.manifest.entries[i].path);
    if (ds.images[i].width != ds.manifest.window_w || ds.images[i].height != ds.manifest.window_h) {
      throw Error(ErrorCode::ManifestSchema, "sample '" + ds.manifest.entries[i].path + "' is not window-sized");
    }
  });
  return ds;
}

}  // namespace brickscan
