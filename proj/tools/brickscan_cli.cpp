#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "brickscan/commands.hpp"
#include "brickscan/error.hpp"
#include "brickscan/io.hpp"
#include "brickscan/parallel.hpp"

namespace {

using namespace brickscan;

bool given_on_command_line(int argc, char** argv, std::string_view flag) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == flag || (a.size() > flag.size() && a.starts_with(flag) && a[flag.size()] == '=')) return true;
  }
  return false;
}

struct Paths {
  std::string pattern, obj, annotations, maps, out, manifest, model, log, mine_maps, mine_annotations, image, frame,
      detections, overlay;
};

int run(int argc, char** argv) {
  CLI::App app{"Synthetic brick-wall detection pipeline"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "brickscan.toml", "Key/value config file; flags override it");

  PipelineConfig c;
  int threads = 0;
  std::string modality = "HEIGHT";
  bool paper_preset = false;

  app.add_option("--seed", c.seed, "Global seed (BRICKSCAN_SEED overrides the config file)");
  app.add_option("--threads", threads, "Worker cap, 0 = auto (also BRICKSCAN_THREADS)");
  app.add_option("--train-pattern", c.train_pattern, "Pattern of the training wall");
  app.add_option("--heldout-pattern", c.heldout_pattern, "Pattern of the held-out wall");

  app.add_option("--brick-length", c.brick.face_length, "Standard brick face length, mm");
  app.add_option("--brick-height", c.brick.face_height, "Brick face height, mm");
  app.add_option("--brick-depth", c.brick.depth, "Standard brick depth, mm");
  app.add_option("--damage-amplitude", c.brick.damage_amplitude, "Surface damage amplitude, mm");

  app.add_option("--pixel-size", c.pixel_size, "Map resolution, mm per pixel");
  app.add_option("--margin", c.margin, "Map border around the wall, mm");
  app.add_option("--rays-per-pixel", c.bake.rays_per_pixel, "Ambient occlusion rays");
  app.add_option("--depth-range", c.bake.depth_range, "Height map range, mm");
  app.add_option("--ao-distance", c.bake.max_dist, "Ambient occlusion ray length, mm");
  app.add_option("--curvature-gain", c.bake.gain, "Curvature encoding gain, < 0 for the default");

  app.add_option("--positives", c.positives, "Positive samples");
  app.add_option("--negatives", c.negatives, "Negative samples, also per mined stage");
  app.add_option("--in-situ", c.in_situ, "Crop positives from the training wall");
  app.add_option("--allow-rotation", c.variation.allow_90_rotation, "Include 90 degree positives");
  app.add_option("--modality", modality, "HEIGHT, NORMAL_R, NORMAL_G, AO or CURVATURE");
  app.add_option("--dilation", c.render.dilation, "Positive crop growth per dimension");
  app.add_option("--negative-max-iou", c.negative.max_iou, "IoU ceiling of dataset negatives");

  app.add_option("--target-fpr", c.cascade.target_fpr, "Cascade false positive target");
  app.add_option("--max-stages", c.cascade.max_stages, "Cascade stage cap");
  app.add_option("--f-max", c.cascade.stage.f_max, "Per-stage false positive ceiling");
  app.add_option("--d-min", c.cascade.stage.d_min, "Per-stage detection floor");
  app.add_option("--max-weak", c.cascade.stage.max_weak, "Stumps per stage cap");
  app.add_option("--feature-pool", c.cascade.stage.feature_pool_size, "Features sampled per stage");
  app.add_option("--mine-negatives", c.mine_negatives, "Mine wall scan windows for each stage");
  app.add_option("--mining-max-iou", c.mining_max_iou, "IoU ceiling of mined windows");

  app.add_option("--scale-factor", c.detect.scale_factor, "Scan scale step");
  app.add_option("--min-neighbors", c.detect.min_neighbors, "Grouping threshold");
  app.add_option("--step", c.detect.step, "Stride at base scale, px");
  app.add_option("--group-eps", c.detect.group_eps, "Grouping tolerance");
  app.add_option("--rotated-pass", c.detect.rotated_pass, "Also scan the image turned 90 degrees");
  app.add_flag("--paper-preset", paper_preset, "scale_factor 10, min_neighbors 25");
  app.add_option("--iou-threshold", c.iou_threshold, "Match threshold for precision and recall");
  app.add_option("--neighbors", c.sweep, "min_neighbors values for the sweep")->delimiter(',');

  Paths p;
  auto* gen_wall = app.add_subcommand("gen-wall", "Pattern file to wall OBJ and annotations");
  gen_wall->add_option("--pattern", p.pattern, "Pattern file")->required();
  gen_wall->add_option("--obj", p.obj, "Output OBJ")->required();
  gen_wall->add_option("--annotations", p.annotations, "Output annotations JSON")->required();

  auto* bake = app.add_subcommand("bake", "Wall OBJ to surface maps and frame.json");
  bake->add_option("--obj", p.obj, "Input OBJ")->required();
  bake->add_option("--out", p.out, "Output directory")->required();

  auto* gen_dataset = app.add_subcommand("gen-dataset", "Positive and negative samples with a manifest");
  gen_dataset->add_option("--maps", p.maps, "Baked training wall directory")->required();
  gen_dataset->add_option("--annotations", p.annotations, "Training wall annotations")->required();
  gen_dataset->add_option("--out", p.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Manifest to cascade JSON and training log");
  train->add_option("--manifest", p.manifest, "Dataset manifest")->required();
  train->add_option("--model", p.model, "Output cascade JSON")->required();
  train->add_option("--log", p.log, "Output training log CSV");
  auto* mine_maps = train->add_option("--mine-maps", p.mine_maps, "Wall maps to mine negatives from");
  train->add_option("--mine-annotations", p.mine_annotations, "Annotations of that wall")->needs(mine_maps);
  mine_maps->needs(train->get_option("--mine-annotations"));

  auto* detect = app.add_subcommand("detect", "Map PNG and cascade to detections and overlay");
  detect->add_option("--image", p.image, "Map PNG")->required();
  detect->add_option("--frame", p.frame, "frame.json of the map")->required();
  detect->add_option("--model", p.model, "Cascade JSON")->required();
  detect->add_option("--out", p.detections, "Output detections JSON")->required();
  detect->add_option("--overlay", p.overlay, "Output overlay PNG");

  auto* evaluate = app.add_subcommand("evaluate", "Detections and annotations to a report");
  evaluate->add_option("--detections", p.detections, "Detections JSON")->required();
  evaluate->add_option("--annotations", p.annotations, "Annotations JSON")->required();
  evaluate->add_option("--out", p.out, "Output report JSON")->required();

  auto* sweep = app.add_subcommand("sweep-neighbors", "Detect and evaluate over a min_neighbors list");
  sweep->add_option("--maps", p.maps, "Baked wall directory")->required();
  sweep->add_option("--model", p.model, "Cascade JSON")->required();
  sweep->add_option("--annotations", p.annotations, "Annotations JSON")->required();
  sweep->add_option("--out", p.out, "Output CSV")->required();

  auto* all = app.add_subcommand("all", "End-to-end run into one output tree");
  all->add_option("--out", p.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!given_on_command_line(argc, argv, "--seed")) {
    if (const char* env = std::getenv("BRICKSCAN_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(env, &used);
        if (env[used] != '\0') throw std::invalid_argument(env);
      } catch (const std::exception&) {
        std::cerr << "error: BRICKSCAN_SEED is not an unsigned integer: " << env << "\n";
        return 2;
      }
    }
  }
  if (threads < 0) {
    std::cerr << "error: --threads must be >= 0\n";
    return 2;
  }
  set_thread_count(threads);
  try {
    c.render.modality = modality_from_string(modality);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (paper_preset) {
    const DetectParams preset = DetectParams::paper_preset();
    if (!given_on_command_line(argc, argv, "--scale-factor")) c.detect.scale_factor = preset.scale_factor;
    if (!given_on_command_line(argc, argv, "--min-neighbors")) c.detect.min_neighbors = preset.min_neighbors;
  }

  if (*gen_wall) {
    gen_wall_files(p.pattern, c.brick, c.seed, p.obj, p.annotations);
  } else if (*bake) {
    BakeParams params = c.bake;
    params.seed = c.seed;
    bake_files(p.obj, c.pixel_size, c.margin, params, p.out);
  } else if (*gen_dataset) {
    gen_dataset_files(c, c.seed, p.maps, p.annotations, p.out);
  } else if (*train) {
    CascadeParams params = c.cascade;
    params.stage.seed = c.seed;
    MiningSource mining;
    if (!p.mine_maps.empty()) {
      mining = {p.mine_maps, p.mine_annotations, c.negative, {}, derive_seed(c.seed, 2), c.detect.scale_factor,
                c.detect.step};
      mining.negative.max_iou = c.mining_max_iou;
      mining.mining.negatives_per_stage = c.negatives;
      mining.mining.max_draws_per_stage = std::int64_t{c.negative.rejection_factor} * c.negatives;
    }
    const auto result = train_files(p.manifest, params, p.model, p.log, p.mine_maps.empty() ? nullptr : &mining);
    std::cout << result.model.stages.size() << " stages, stop: " << result.stop_reason << "\n";
  } else if (*detect) {
    const auto set = detect_files(p.image, p.frame, p.model, c.detect, p.detections, p.overlay);
    std::cout << set.detections.size() << " detections\n";
  } else if (*evaluate) {
    const auto r = evaluate_files(p.detections, p.annotations, c.iou_threshold, p.out);
    std::cout << "precision " << r.precision << " recall " << r.recall << "\n";
  } else if (*sweep) {
    const auto rows = sweep_neighbors(load_map(p.maps, c.render.modality), load_frame(p.maps),
                                      cascade_from_json(read_text_file(p.model)),
                                      annotations_from_json(read_text_file(p.annotations)), c.detect, c.sweep,
                                      c.iou_threshold);
    write_text_file(p.out, sweep_to_csv(rows));
  } else if (*all) {
    run_all(c, p.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
