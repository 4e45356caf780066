#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brickscan/bake.hpp"
#include "brickscan/cascade.hpp"
#include "brickscan/detect.hpp"
#include "brickscan/pipeline.hpp"
#include "brickscan/sampler.hpp"
#include "brickscan/wall.hpp"

namespace brickscan {

namespace fs = std::filesystem;

/// Every knob of the end-to-end run; the CLI and brickscan.toml map onto it.
struct PipelineConfig {
  std::uint64_t seed = 7;
  std::string train_pattern = "data/patterns/training_wall.txt";
  std::string heldout_pattern = "data/patterns/harput_44c.txt";
  BrickSpec brick;
  double pixel_size = 5.0;
  double margin = 30.0;
  BakeParams bake;
  SampleRender render;  // pixel_size and bake are taken from above
  int positives = 400;
  int negatives = 1200;
  bool in_situ = true;  // false: single-brick scenes
  PositiveVariation variation;
  NegativeParams negative;
  CascadeParams cascade;
  bool mine_negatives = true;  // bootstrap later stages from fresh wall crops
  std::int64_t mining_draws_per_stage = 0;  // 0: rejection_factor * negatives
  double mining_max_iou = 0.4;              // IoU ceiling for mined scan windows
  DetectParams detect{.group_eps = 0.15};
  double iou_threshold = 0.5;
  std::vector<int> sweep{1, 5, 25, 50, 100, 150};
};

/// File stem of each map inside a bake directory.
fs::path map_path(const fs::path& maps_dir, Modality m);

WallModel gen_wall_files(const fs::path& pattern, const BrickSpec& brick, std::uint64_t seed, const fs::path& obj_out,
                         const fs::path& annotations_out);

/// Writes height.png (16-bit), normal.png, ao.png, curvature.png and
/// frame.json into out_dir.
SurfaceMapSet bake_files(const fs::path& obj, double pixel_size, double margin, const BakeParams& params,
                         const fs::path& out_dir);

/// The detector input of a bake directory and its frame.
GrayRaster load_map(const fs::path& maps_dir, Modality m);
OrthoFrame load_frame(const fs::path& maps_dir);

/// Positives (single-brick, or in-situ from the wall) plus negatives from
/// the wall maps, written to out_dir.
Dataset gen_dataset_files(const PipelineConfig& config, std::uint64_t seed, const fs::path& wall_maps,
                          const fs::path& wall_annotations, const fs::path& out_dir);

/// Wall maps to mine fresh negatives from during training.
struct MiningSource {
  fs::path wall_maps;
  fs::path annotations;
  NegativeParams negative;
  MiningParams mining;
  std::uint64_t seed = 0;
  double scale_factor = 1.1;  // scan grid, as in detection
  double step = 1.0;
};

/// Trains on a manifest and writes the model JSON and a per-round CSV log.
/// With a mining source the manifest negatives train the first stage and
/// later stages mine the wall's scan windows.
CascadeTrainResult train_files(const fs::path& manifest, const CascadeParams& params, const fs::path& model_out,
                               const fs::path& log_out, const MiningSource* mining = nullptr);
std::string training_log_csv(const CascadeTrainResult& result);

DetectionSet detect_files(const fs::path& image, const fs::path& frame_json, const fs::path& model,
                          const DetectParams& params, const fs::path& detections_out, const fs::path& overlay_out);

EvalReport evaluate_files(const fs::path& detections, const fs::path& annotations, double iou_threshold,
                          const fs::path& report_out);

/// One candidate scan, grouped at each min_neighbors value.
std::vector<SweepRow> sweep_neighbors(const GrayRaster& img, const OrthoFrame& frame, const CascadeModel& model,
                                      const std::vector<Annotation>& annotations, const DetectParams& params,
                                      const std::vector<int>& neighbors, double iou_threshold);

/// Seeds of the end-to-end run, all derived from the global seed.
struct PipelineSeeds {
  std::uint64_t train_wall, heldout_wall, train_bake, heldout_bake, dataset, cascade;
  static PipelineSeeds from(std::uint64_t seed);
};

/// gen-wall, bake, gen-dataset, train, detect, evaluate and sweep-neighbors
/// into one output tree.
void run_all(const PipelineConfig& config, const fs::path& out_dir);

}  // namespace brickscan
