#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brickscan/error.hpp"
#include "brickscan/haar.hpp"
#include "brickscan/integral.hpp"
#include "brickscan/raster.hpp"

namespace brickscan {

/// Decision stump over one Haar feature. polarity +1 votes "brick" when
/// value >= threshold, polarity -1 when value < threshold.
struct WeakClassifier {
  HaarFeature feature;
  double threshold = 0.0;
  int polarity = 1;
  double alpha = 0.0;

  bool vote(double value) const { return polarity > 0 ? value >= threshold : value < threshold; }
  friend bool operator==(const WeakClassifier&, const WeakClassifier&) = default;
};

struct CascadeStage {
  std::vector<WeakClassifier> weak;
  double stage_threshold = 0.0;
  friend bool operator==(const CascadeStage&, const CascadeStage&) = default;
};

/// Parameters and achieved rates recorded with a trained model.
struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string modality = "HEIGHT";
  double target_fpr = 0.01;
  double f_max = 0.5;
  double d_min = 0.995;
  int max_weak = 100;
  int feature_pool_size = 2000;
  int max_stages = 10;
  int positives = 0;
  int negatives = 0;
  double crop_dilation = 0.0;  // margin around the brick face in positive crops
  std::vector<double> stage_detection_rates;
  std::vector<double> stage_false_positive_rates;
  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct CascadeModel {
  int window_w = 48;
  int window_h = 12;
  std::vector<CascadeStage> stages;
  TrainingMetadata metadata;
  friend bool operator==(const CascadeModel&, const CascadeModel&) = default;
};

/// Throws InvalidArgument when the model breaks its invariants.
void validate(const CascadeModel& model);

std::string cascade_to_json(const CascadeModel& model);
/// Throws FormatMismatch on a wrong `format` tag, InvalidArgument otherwise.
CascadeModel cascade_from_json(const std::string& text);

// Stump --------------------------------------------------------------------

struct Stump {
  double threshold = 0.0;
  int polarity = 1;
  double error = 0.0;
};

/// Minimum weighted-error stump by one sorted scan. Candidate thresholds are
/// min - 1, midpoints between consecutive distinct values, and max + 1; ties
/// go to the smaller threshold, then polarity +1. Labels are 1 (positive) or
/// 0. Throws SingleClass when only one label is present.
Stump train_stump(std::span<const double> values, std::span<const std::uint8_t> labels,
                  std::span<const double> weights);

// Stage and cascade training -------------------------------------------------

struct StageParams {
  double f_max = 0.5;
  double d_min = 0.995;
  int max_weak = 100;
  int feature_pool_size = 2000;
  std::uint64_t seed = 0;
};

struct RoundLog {
  int round = 0;
  double stump_error = 0.0;     // weighted error of the chosen stump
  double alpha = 0.0;
  double exp_loss = 0.0;        // sum_i D1(i) exp(-y_i F(x_i) / 2), F in +-alpha votes
  double weighted_error = 0.0;  // strong classifier at 1/2 sum(alpha), initial weights
  double stage_threshold = 0.0;
  double detection_rate = 0.0;
  double false_positive_rate = 0.0;
};

struct StageResult {
  CascadeStage stage;
  double detection_rate = 0.0;
  double false_positive_rate = 0.0;
  std::vector<RoundLog> rounds;
};

/// One AdaBoost stage over a seeded random feature pool. After each round
/// the threshold drops from 1/2 sum(alpha) until the positive detection rate
/// reaches d_min; training stops at false-positive rate <= f_max or max_weak
/// rounds. Throws StageInfeasible when no stump beats chance in the first
/// round or the finished stage still accepts every negative.
StageResult train_stage(std::span<const IntegralImage> pos, std::span<const IntegralImage> neg, int window_w,
                        int window_h, const StageParams& params);

struct CascadeParams {
  double target_fpr = 0.01;
  int max_stages = 10;
  StageParams stage;  // stage.seed is the cascade seed; stage k uses derive_seed(seed, k)
};

struct CascadeTrainResult {
  CascadeModel model;
  std::vector<StageResult> stages;
  std::vector<double> cumulative_fpr;        // over the whole negative pool
  std::vector<double> cumulative_detection;  // over all positives
  std::string stop_reason;
};

/// Stage-by-stage training with negative bootstrapping: each stage trains on
/// the positives and pool negatives the cascade so far still accepts.
CascadeTrainResult train_cascade(std::span<const GrayRaster> pos, std::span<const GrayRaster> neg_pool,
                                 const CascadeParams& params);

/// Negative window number `index` of a source, or nullopt when that draw is
/// rejected. Must be deterministic in `index`. A batch of 2048 consecutive
/// rejections counts as the end of the source.
using NegativeDraw = std::function<std::optional<GrayRaster>(std::uint64_t index)>;

struct MiningParams {
  int negatives_per_stage = 1200;
  std::int64_t max_draws_per_stage = 120000;
};

/// Bootstrapping against an unbounded negative source: before each stage,
/// fresh draws are classified by the cascade so far and the first
/// negatives_per_stage accepted ones form the stage's negative set. The
/// acceptance ratio of that pass estimates the cumulative false-positive
/// rate (cumulative_fpr[k] is measured before stage k + 1, so training
/// stops once it is <= target_fpr). Stops as well when a pass cannot fill
/// the set within max_draws_per_stage draws. `initial_neg` joins the
/// first stage's negative set.
CascadeTrainResult train_cascade_mined(std::span<const GrayRaster> pos, std::span<const GrayRaster> initial_neg,
                                       const NegativeDraw& draw, const CascadeParams& params,
                                       const MiningParams& mining);

/// Training failure with the stages completed before it.
class StageInfeasibleError : public Error {
 public:
  StageInfeasibleError(const std::string& message, CascadeModel partial)
      : Error(ErrorCode::StageInfeasible, message), partial_(std::move(partial)) {}
  const CascadeModel& partial() const { return partial_; }

 private:
  CascadeModel partial_;
};

// Classification -------------------------------------------------------------

struct ClassifyResult {
  bool pass = false;
  double score = 0.0;  // stage sum minus threshold of the last stage evaluated
  int stages_evaluated = 0;
};

/// A model with its features mapped to one window size.
class CompiledCascade {
 public:
  CompiledCascade(const CascadeModel& model, int window_w, int window_h);

  ClassifyResult classify(const IntegralImage& ii, int x, int y) const;
  int window_w() const { return window_w_; }
  int window_h() const { return window_h_; }

 private:
  const CascadeModel* model_;
  int window_w_;
  int window_h_;
  std::vector<std::vector<ScaledFeature>> features_;
};

/// Attentional evaluation: stages in order, rejecting at the first stage
/// whose vote sum falls below its threshold. Throws RectBounds.
ClassifyResult classify_window(const CascadeModel& model, const IntegralImage& ii, const RectI& window);

}  // namespace brickscan
