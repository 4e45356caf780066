#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brickscan/bake.hpp"
#include "brickscan/cascade.hpp"
#include "brickscan/raster.hpp"
#include "brickscan/rng.hpp"
#include "brickscan/wall.hpp"

namespace brickscan {

enum class Modality : std::uint8_t { Height, NormalR, NormalG, AO, Curvature };
enum class SampleLabel : std::uint8_t { Positive, Negative };

std::string_view to_string(Modality m);
std::string_view to_string(SampleLabel l);
Modality modality_from_string(std::string_view s);
SampleLabel sample_label_from_string(std::string_view s);

/// Single-channel detector input from a baked map set.
GrayRaster select_modality(const SurfaceMapSet& maps, Modality m);
/// Bakes only what the modality needs.
GrayRaster bake_modality(const RayCaster& caster, const OrthoFrame& frame, Modality m, const BakeParams& params);

struct Provenance {
  std::uint64_t seed = 0;
  std::string generator;              // "single-brick", "in-situ" or "negative"
  std::map<std::string, double> params;
  Rect source_rect;                   // crop in source millimetres
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest
  SampleLabel label = SampleLabel::Positive;
  Modality modality = Modality::Height;
  Provenance provenance;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int window_w = 48;
  int window_h = 12;
  std::vector<ManifestEntry> entries;

  int count(SampleLabel l) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Lossless JSON ("brickscan-dataset-v1"). Reading rejects unknown or
/// missing fields, count mismatches and duplicate paths with ManifestSchema.
std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

/// Manifest plus its images, index-aligned.
struct Dataset {
  DatasetManifest manifest;
  std::vector<GrayRaster> images;
};

/// Rendering shared by positive and negative generation.
struct SampleRender {
  int window_w = 48;
  int window_h = 12;
  double pixel_size = 5.0;
  Modality modality = Modality::Height;
  BakeParams bake;
  double dilation = 0.1;  // crop growth per dimension around the brick
};

struct PositiveVariation {
  double scale_min = 0.9;
  double scale_max = 1.1;
  bool allow_90_rotation = false;
  double damage_min = 0.0;
  double damage_max = 1.5;
  double backdrop_recess = 12.0;  // mortar plane behind the brick face
  double in_situ_shift = 0.5;     // in-situ crop centre jitter, map pixels
  double in_situ_scale = 0.03;    // in-situ crop size jitter, relative
};

/// Crop around an annotation: dilated, then widened on the short side to the
/// window aspect (transposed for vertical crops).
Rect positive_crop_rect(const Rect& annotation, double dilation, int window_w, int window_h, bool vertical);

/// n single-brick scenes over a mortar backdrop with sampled scale, damage
/// and (optionally) a 90 degree turn, baked and cropped around the nominal
/// face. Vertical renders are rotated back to landscape. Sample i depends
/// only on derive_seed(seed, i).
Dataset generate_positives(int n, const BrickSpec& brick, const PositiveVariation& variation,
                           const SampleRender& render, std::uint64_t seed);

/// Positives cropped from a wall map at annotated bricks, each with a small
/// random shift and size change of the crop.
/// Vertical bricks are used only with allow_90_rotation.
Dataset generate_positives_in_situ(int n, const std::vector<Annotation>& annotations, const GrayRaster& map,
                                   const OrthoFrame& frame, const PositiveVariation& variation,
                                   const SampleRender& render, std::uint64_t seed);

struct NegativeParams {
  double scale_min = 1.0;  // crop size relative to the window at the render pixel size
  double scale_max = 1.6;
  double max_iou = 0.2;
  int rejection_factor = 100;
};

struct NegativeCrop {
  GrayRaster image;
  Rect source_rect;  // mm
  double scale = 1.0;
};

/// Rejection sampler of negative crops over one wall map.
class NegativeSampler {
 public:
  NegativeSampler(std::vector<Annotation> annotations, GrayRaster map, OrthoFrame frame, NegativeParams params,
                  SampleRender render);

  /// One attempt: a uniformly placed crop, or nullopt when it reaches
  /// max_iou with some annotation. Throws NegativePoolExhausted if no crop of
  /// the drawn size fits the map.
  std::optional<NegativeCrop> attempt(CounterRng& rng) const;

  /// Unbounded source for train_cascade_mined: draw i is one attempt with
  /// derive_seed(seed, i).
  NegativeDraw as_draw(std::uint64_t seed) const;

 private:
  std::vector<Annotation> annotations_;
  GrayRaster map_;
  OrthoFrame frame_;
  NegativeParams params_;
  SampleRender render_;
  Rect extent_;
};

/// The detector's sliding-window grid over a wall map (scales
/// window * scale_factor^k, stride max(1, round(step * scale))), restricted to
/// windows whose IoU with every annotation stays below max_iou, visited in a
/// seeded random order. Draw i resamples window i of that order to the base
/// window; draws past the end are nullopt.
class ScanWindowSampler {
 public:
  ScanWindowSampler(const std::vector<Annotation>& annotations, GrayRaster map, const OrthoFrame& frame,
                    double max_iou, int window_w, int window_h, double scale_factor, double step,
                    std::uint64_t seed);

  std::size_t size() const { return windows_.size(); }
  const RectI& window(std::size_t i) const { return windows_[i]; }
  NegativeDraw as_draw() const;

 private:
  GrayRaster map_;
  int window_w_, window_h_;
  std::vector<RectI> windows_;
};

/// n crops of a wall map whose IoU with every annotation is below max_iou,
/// rejection-sampled. Throws NegativePoolExhausted after
/// rejection_factor * n rejections.
Dataset generate_negatives(int n, const std::vector<Annotation>& annotations, const GrayRaster& map,
                           const OrthoFrame& frame, const NegativeParams& params, const SampleRender& render,
                           std::uint64_t seed);

/// Concatenates b after a; window sizes must agree.
Dataset merge(Dataset a, const Dataset& b);

/// Writes `<dir>/manifest.json` and 16-bit PNGs under `<dir>/positive` and
/// `<dir>/negative`, assigning entry paths.
void write_dataset(Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace brickscan
