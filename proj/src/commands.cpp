#include "brickscan/commands.hpp"

#include <cstdio>

#include "brickscan/error.hpp"
#include "brickscan/io.hpp"
#include "brickscan/mesh.hpp"
#include "brickscan/rng.hpp"
#include "json.hpp"

namespace brickscan {

fs::path map_path(const fs::path& maps_dir, Modality m) {
  switch (m) {
    case Modality::Height: return maps_dir / "height.png";
    case Modality::NormalR:
    case Modality::NormalG: return maps_dir / "normal.png";
    case Modality::AO: return maps_dir / "ao.png";
    case Modality::Curvature: return maps_dir / "curvature.png";
  }
  return maps_dir / "height.png";
}

WallModel gen_wall_files(const fs::path& pattern, const BrickSpec& brick, std::uint64_t seed, const fs::path& obj_out,
                         const fs::path& annotations_out) {
  const WallModel wall = generate_wall(parse_pattern_file(pattern.string()), brick, seed);
  save_obj(wall.mesh, obj_out);
  write_text_file(annotations_out, annotations_to_json(wall.annotations));
  return wall;
}

SurfaceMapSet bake_files(const fs::path& obj, double pixel_size, double margin, const BakeParams& params,
                         const fs::path& out_dir) {
  const TriangleMesh mesh = load_obj(obj);
  const OrthoFrame frame = frame_from_mesh(mesh, pixel_size, margin);
  SurfaceMapSet maps = bake_map_set(mesh, frame, params);
  write_png(maps.height, out_dir / "height.png", PngDepth::Sixteen);
  write_png(maps.normal, out_dir / "normal.png");
  write_png(maps.ao, out_dir / "ao.png", PngDepth::Eight);
  write_png(maps.curvature, out_dir / "curvature.png", PngDepth::Eight);
  write_text_file(out_dir / "frame.json", frame_to_json(frame, maps.params));
  return maps;
}

GrayRaster load_map(const fs::path& maps_dir, Modality m) {
  const int ch = m == Modality::NormalR ? 0 : m == Modality::NormalG ? 1 : -1;
  return read_png_gray(map_path(maps_dir, m), ch);
}

OrthoFrame load_frame(const fs::path& maps_dir) { return frame_from_json(read_text_file(maps_dir / "frame.json")); }

Dataset gen_dataset_files(const PipelineConfig& config, std::uint64_t seed, const fs::path& wall_maps,
                          const fs::path& wall_annotations, const fs::path& out_dir) {
  SampleRender render = config.render;
  render.pixel_size = config.pixel_size;
  render.bake = config.bake;
  const auto annotations = annotations_from_json(read_text_file(wall_annotations));
  const GrayRaster map = load_map(wall_maps, render.modality);
  const OrthoFrame frame = load_frame(wall_maps);

  Dataset pos = config.in_situ ? generate_positives_in_situ(config.positives, annotations, map, frame,
                                                            config.variation, render, derive_seed(seed, 0))
                               : generate_positives(config.positives, config.brick, config.variation, render,
                                                    derive_seed(seed, 0));
  const Dataset neg =
      generate_negatives(config.negatives, annotations, map, frame, config.negative, render, derive_seed(seed, 1));
  Dataset ds = merge(std::move(pos), neg);
  ds.manifest.seed = seed;
  write_dataset(ds, out_dir);
  return ds;
}

std::string training_log_csv(const CascadeTrainResult& result) {
  std::string out =
      "stage,round,stump_error,alpha,exp_loss,weighted_error,stage_threshold,detection_rate,false_positive_rate\n";
  char line[512];
  for (std::size_t s = 0; s < result.stages.size(); ++s) {
    for (const auto& r : result.stages[s].rounds) {
      std::snprintf(line, sizeof line, "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s, r.round,
                    r.stump_error, r.alpha, r.exp_loss, r.weighted_error, r.stage_threshold, r.detection_rate,
                    r.false_positive_rate);
      out += line;
    }
  }
  return out;
}

CascadeTrainResult train_files(const fs::path& manifest, const CascadeParams& params, const fs::path& model_out,
                               const fs::path& log_out, const MiningSource* mining) {
  const Dataset ds = load_dataset(manifest);
  std::vector<GrayRaster> pos, neg;
  Modality modality = Modality::Height;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& e = ds.manifest.entries[i];
    modality = e.modality;
    (e.label == SampleLabel::Positive ? pos : neg).push_back(ds.images[i]);
  }
  CascadeTrainResult result;
  if (mining) {
    const OrthoFrame frame = load_frame(mining->wall_maps);
    const ScanWindowSampler sampler(annotations_from_json(read_text_file(mining->annotations)),
                                    load_map(mining->wall_maps, modality), frame, mining->negative.max_iou,
                                    ds.manifest.window_w, ds.manifest.window_h, mining->scale_factor, mining->step,
                                    mining->seed);
    result = train_cascade_mined(pos, neg, sampler.as_draw(), params, mining->mining);
  } else {
    result = train_cascade(pos, neg, params);
  }
  result.model.metadata.modality = std::string(to_string(modality));
  for (const auto& e : ds.manifest.entries) {
    const auto it = e.provenance.params.find("dilation");
    if (e.label == SampleLabel::Positive && it != e.provenance.params.end()) {
      result.model.metadata.crop_dilation = it->second;
      break;
    }
  }
  write_text_file(model_out, cascade_to_json(result.model));
  if (!log_out.empty()) write_text_file(log_out, training_log_csv(result));
  return result;
}

DetectionSet detect_files(const fs::path& image, const fs::path& frame_json, const fs::path& model,
                          const DetectParams& params, const fs::path& detections_out, const fs::path& overlay_out) {
  const CascadeModel cascade = cascade_from_json(read_text_file(model));
  const Modality m = modality_from_string(cascade.metadata.modality);
  const int ch = m == Modality::NormalR ? 0 : m == Modality::NormalG ? 1 : -1;
  const GrayRaster img = read_png_gray(image, ch);
  DetectionSet set;
  set.frame = frame_from_json(read_text_file(frame_json));
  set.image = image.filename().string();
  if (img.width != set.frame.cols() || img.height != set.frame.rows()) {
    throw Error(ErrorCode::InvalidArgument, image.string() + " does not match its frame");
  }
  set.detections = detect_multiscale(img, cascade, params);
  to_face_rects(set.detections, cascade.metadata.crop_dilation);
  if (!detections_out.empty()) write_text_file(detections_out, detections_to_json(set));
  if (!overlay_out.empty()) write_png(render_overlay(img, set.detections), overlay_out);
  return set;
}

EvalReport evaluate_files(const fs::path& detections, const fs::path& annotations, double iou_threshold,
                          const fs::path& report_out) {
  const DetectionSet set = detections_from_json(read_text_file(detections));
  const auto ann = annotations_from_json(read_text_file(annotations));
  const EvalReport report = evaluate(set.detections, ann, set.frame, iou_threshold);
  if (!report_out.empty()) write_text_file(report_out, report_to_json(report, -1));
  return report;
}

std::vector<SweepRow> sweep_neighbors(const GrayRaster& img, const OrthoFrame& frame, const CascadeModel& model,
                                      const std::vector<Annotation>& annotations, const DetectParams& params,
                                      const std::vector<int>& neighbors, double iou_threshold) {
  const auto candidates = detect_candidates(img, model, params);
  std::vector<Detection> turned;
  if (params.rotated_pass) turned = detect_candidates(rotate90(img), model, params);
  std::vector<SweepRow> rows;
  for (int m : neighbors) {
    auto dets = group_rectangles(candidates, m, params.group_eps);
    for (auto d : group_rectangles(turned, m, params.group_eps)) {
      const Rect r = d.rect;
      d.rect = {img.width - r.y - r.h, r.x, r.h, r.w};
      dets.push_back(std::move(d));
    }
    to_face_rects(dets, model.metadata.crop_dilation);
    rows.push_back({m, evaluate(dets, annotations, frame, iou_threshold)});
  }
  return rows;
}

PipelineSeeds PipelineSeeds::from(std::uint64_t seed) {
  return {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3),
          derive_seed(seed, 4), derive_seed(seed, 5), derive_seed(seed, 6)};
}

void run_all(const PipelineConfig& config, const fs::path& out_dir) {
  const PipelineSeeds seeds = PipelineSeeds::from(config.seed);
  const fs::path train = out_dir / "train_wall", held = out_dir / "heldout_wall";
  gen_wall_files(config.train_pattern, config.brick, seeds.train_wall, train / "wall.obj", train / "annotations.json");
  gen_wall_files(config.heldout_pattern, config.brick, seeds.heldout_wall, held / "wall.obj",
                 held / "annotations.json");
  BakeParams bake = config.bake;
  bake.seed = seeds.train_bake;
  bake_files(train / "wall.obj", config.pixel_size, config.margin, bake, train / "maps");
  bake.seed = seeds.heldout_bake;
  bake_files(held / "wall.obj", config.pixel_size, config.margin, bake, held / "maps");

  gen_dataset_files(config, seeds.dataset, train / "maps", train / "annotations.json", out_dir / "dataset");
  CascadeParams cascade = config.cascade;
  cascade.stage.seed = seeds.cascade;
  MiningSource mining{train / "maps", train / "annotations.json", config.negative, {}, derive_seed(seeds.dataset, 2),
                      config.detect.scale_factor, config.detect.step};
  mining.negative.max_iou = config.mining_max_iou;
  mining.mining.negatives_per_stage = config.negatives;
  mining.mining.max_draws_per_stage = config.mining_draws_per_stage > 0
                                          ? config.mining_draws_per_stage
                                          : std::int64_t{config.negative.rejection_factor} * config.negatives;
  train_files(out_dir / "dataset" / "manifest.json", cascade, out_dir / "model" / "cascade.json",
              out_dir / "model" / "training_log.csv", config.mine_negatives ? &mining : nullptr);

  const Modality m = config.render.modality;
  const DetectionSet set = detect_files(map_path(held / "maps", m), held / "maps" / "frame.json",
                                        out_dir / "model" / "cascade.json", config.detect,
                                        out_dir / "detect" / "detections.json", out_dir / "detect" / "overlay.png");
  const auto annotations = annotations_from_json(read_text_file(held / "annotations.json"));
  const EvalReport report = evaluate(set.detections, annotations, set.frame, config.iou_threshold);
  write_text_file(out_dir / "evaluate" / "report.json", report_to_json(report, config.detect.min_neighbors));

  nlohmann::json bricks = nlohmann::json::array();
  for (const auto& b : enrich(set.detections, set.frame, default_catalog(config.brick))) {
    const Rect& r = b.world_rect;
    bricks.push_back({{"rect_mm", {r.x, r.y, r.w, r.h}},
                      {"orientation", std::string(to_string(b.orientation))},
                      {"brick_type", std::string(to_string(b.brick_type))},
                      {"inferred_depth_mm", b.inferred_depth},
                      {"neighbors", b.detection.neighbors}});
  }
  write_text_file(out_dir / "detect" / "bricks.json",
                  nlohmann::json{{"format", "brickscan-bricks-v1"}, {"bricks", std::move(bricks)}}.dump(1) + "\n");

  const GrayRaster img = load_map(held / "maps", m);
  const CascadeModel model = cascade_from_json(read_text_file(out_dir / "model" / "cascade.json"));
  write_text_file(out_dir / "sweep" / "sweep.csv",
                  sweep_to_csv(sweep_neighbors(img, set.frame, model, annotations, config.detect, config.sweep,
                                               config.iou_threshold)));
}

}  // namespace brickscan
