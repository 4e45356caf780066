#include "brickscan/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "brickscan/parallel.hpp"
#include "brickscan/rng.hpp"

namespace brickscan {

void validate(const CascadeModel& model) {
  if (model.window_w < 8 || model.window_h < 8) throw Error(ErrorCode::InvalidArgument, "window must be >= 8 px");
  if (model.stages.empty()) throw Error(ErrorCode::InvalidArgument, "cascade has no stages");
  for (const auto& stage : model.stages) {
    if (stage.weak.empty()) throw Error(ErrorCode::InvalidArgument, "stage without weak classifiers");
    if (!std::isfinite(stage.stage_threshold)) throw Error(ErrorCode::InvalidArgument, "non-finite stage threshold");
    for (const auto& w : stage.weak) {
      validate(w.feature, model.window_w, model.window_h);
      if (w.polarity != 1 && w.polarity != -1) throw Error(ErrorCode::InvalidArgument, "polarity must be +-1");
      if (!std::isfinite(w.alpha) || w.alpha < 0.0) throw Error(ErrorCode::InvalidArgument, "alpha must be finite, >= 0");
      if (!std::isfinite(w.threshold)) throw Error(ErrorCode::InvalidArgument, "non-finite stump threshold");
    }
  }
}

// ---------------------------------------------------------------------------
// Stumps

namespace {

double midpoint(double a, double b) {
  const double m = a + 0.5 * (b - a);
  return m > a ? m : b;
}

/// Scan over samples already sorted by value.
Stump scan_sorted(std::span<const double> values, std::span<const std::uint32_t> order,
                  std::span<const std::uint8_t> labels, std::span<const double> weights, double total_pos,
                  double total_neg) {
  Stump best{0.0, 1, INFINITY};
  double pos_below = 0.0, neg_below = 0.0;
  auto consider = [&](double theta) {
    const double e_plus = pos_below + (total_neg - neg_below);
    const double e_minus = neg_below + (total_pos - pos_below);
    if (e_plus < best.error) best = {theta, 1, e_plus};
    if (e_minus < best.error) best = {theta, -1, e_minus};
  };
  const std::size_t n = order.size();
  consider(values[order[0]] - 1.0);
  std::size_t k = 0;
  while (k < n) {
    const double v = values[order[k]];
    while (k < n && values[order[k]] == v) {
      const auto i = order[k];
      (labels[i] ? pos_below : neg_below) += weights[i];
      ++k;
    }
    consider(k < n ? midpoint(v, values[order[k]]) : v + 1.0);
  }
  return best;
}

}  // namespace

Stump train_stump(std::span<const double> values, std::span<const std::uint8_t> labels,
                  std::span<const double> weights) {
  if (values.size() != labels.size() || values.size() != weights.size() || values.empty()) {
    throw Error(ErrorCode::InvalidArgument, "train_stump: inconsistent sample arrays");
  }
  double total_pos = 0.0, total_neg = 0.0;
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "train_stump: weights must be positive");
    if (!std::isfinite(values[i])) throw Error(ErrorCode::InvalidArgument, "train_stump: non-finite value");
    if (labels[i]) {
      has_pos = true;
      total_pos += weights[i];
    } else {
      has_neg = true;
      total_neg += weights[i];
    }
  }
  if (!has_pos || !has_neg) throw Error(ErrorCode::SingleClass, "train_stump needs both classes");
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  return scan_sorted(values, order, labels, weights, total_pos, total_neg);
}

// ---------------------------------------------------------------------------
// Stage training

namespace {

std::vector<HaarFeature> sample_pool(const std::vector<HaarFeature>& family, int pool_size, std::uint64_t seed) {
  if (pool_size <= 0 || static_cast<std::size_t>(pool_size) >= family.size()) return family;
  std::vector<std::uint32_t> idx(family.size());
  std::iota(idx.begin(), idx.end(), 0u);
  CounterRng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(pool_size); ++i) {
    const auto j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<HaarFeature> pool;
  pool.reserve(static_cast<std::size_t>(pool_size));
  for (int i = 0; i < pool_size; ++i) pool.push_back(family[idx[static_cast<std::size_t>(i)]]);
  return pool;
}

double base_value(const ScaledFeature& sf, const IntegralImage& ii, double std) {
  return sf.raw(ii, 0, 0) / (kSampleScale * std);
}

/// Largest threshold keeping at least ceil(d_min * n) positive scores.
double threshold_for_rate(std::vector<double> pos_scores, double d_min, double cap) {
  std::sort(pos_scores.begin(), pos_scores.end(), std::greater<>());
  const auto n = pos_scores.size();
  auto keep = static_cast<std::size_t>(std::ceil(d_min * static_cast<double>(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);
  return std::min(cap, pos_scores[keep - 1]);
}

}  // namespace

StageResult train_stage(std::span<const IntegralImage> pos, std::span<const IntegralImage> neg, int window_w,
                        int window_h, const StageParams& params) {
  if (pos.empty() || neg.empty()) throw Error(ErrorCode::SingleClass, "train_stage needs positives and negatives");
  if (!(params.d_min > 0.0 && params.d_min <= 1.0)) throw Error(ErrorCode::InvalidArgument, "d_min must be in (0, 1]");
  if (!(params.f_max > 0.0 && params.f_max <= 1.0)) throw Error(ErrorCode::InvalidArgument, "f_max must be in (0, 1]");
  if (params.max_weak < 1) throw Error(ErrorCode::InvalidArgument, "max_weak must be >= 1");

  const auto family = enumerate_features(window_w, window_h);
  const auto pool = sample_pool(family, params.feature_pool_size, params.seed);
  const std::size_t n_pos = pos.size(), n_neg = neg.size(), n = n_pos + n_neg;
  auto image = [&](std::size_t i) -> const IntegralImage& { return i < n_pos ? pos[i] : neg[i - n_pos]; };

  std::vector<std::uint8_t> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
  std::vector<double> stds(n);
  for (std::size_t i = 0; i < n; ++i) stds[i] = image(i).window_std(0, 0, window_w, window_h);

  // values[f * n + i], and each feature's sample order by value.
  const std::size_t n_feat = pool.size();
  std::vector<double> values(n_feat * n);
  std::vector<std::uint32_t> orders(n_feat * n);
  parallel_for(n_feat, [&](std::size_t f) {
    const ScaledFeature sf = scale_feature(pool[f], window_w, window_h, window_w, window_h);
    double* row = &values[f * n];
    for (std::size_t i = 0; i < n; ++i) row[i] = base_value(sf, image(i), stds[i]);
    std::uint32_t* ord = &orders[f * n];
    std::iota(ord, ord + n, 0u);
    std::stable_sort(ord, ord + n, [&](auto a, auto b) { return row[a] < row[b]; });
  });

  std::vector<double> initial(n);
  for (std::size_t i = 0; i < n; ++i) initial[i] = labels[i] ? 0.5 / n_pos : 0.5 / n_neg;
  std::vector<double> weights = initial;
  std::vector<double> scores(n, 0.0);   // sum alpha * vote
  std::vector<double> margins(n, 0.0);  // sum alpha * (+-1 vote agreement)
  double alpha_sum = 0.0;

  StageResult result;
  std::vector<Stump> best_per_feature(n_feat);
  for (int round = 0; round < params.max_weak; ++round) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= total;
    double total_pos = 0.0, total_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) (labels[i] ? total_pos : total_neg) += weights[i];

    parallel_for(n_feat, [&](std::size_t f) {
      best_per_feature[f] = scan_sorted(std::span<const double>(&values[f * n], n),
                                        std::span<const std::uint32_t>(&orders[f * n], n), labels, weights, total_pos,
                                        total_neg);
    });
    std::size_t chosen = 0;
    for (std::size_t f = 1; f < n_feat; ++f) {
      if (best_per_feature[f].error < best_per_feature[chosen].error) chosen = f;
    }
    const Stump stump = best_per_feature[chosen];
    if (stump.error >= 0.5 - 1e-12) {
      if (result.stage.weak.empty()) {
        throw Error(ErrorCode::StageInfeasible, "no feature in the pool beats chance");
      }
      break;
    }
    const double eps = std::max(stump.error, 1e-10);
    const double beta = eps / (1.0 - eps);
    const double alpha = std::log(1.0 / beta);
    const WeakClassifier weak{pool[chosen], stump.threshold, stump.polarity, alpha};
    result.stage.weak.push_back(weak);
    alpha_sum += alpha;

    const double* row = &values[chosen * n];
    for (std::size_t i = 0; i < n; ++i) {
      const bool vote = weak.vote(row[i]);
      const bool correct = vote == static_cast<bool>(labels[i]);
      if (correct) weights[i] *= beta;
      if (vote) scores[i] += alpha;
      margins[i] += correct ? alpha : -alpha;
    }

    RoundLog log;
    log.round = round;
    log.stump_error = stump.error;
    log.alpha = alpha;
    for (std::size_t i = 0; i < n; ++i) {
      log.exp_loss += initial[i] * std::exp(-0.5 * margins[i]);
      const bool strong = scores[i] >= 0.5 * alpha_sum;
      if (strong != static_cast<bool>(labels[i])) log.weighted_error += initial[i];
    }

    std::vector<double> pos_scores(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(n_pos));
    const double thr = threshold_for_rate(std::move(pos_scores), params.d_min, 0.5 * alpha_sum);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (scores[i] >= thr) (labels[i] ? tp : fp) += 1;
    }
    result.stage.stage_threshold = thr;
    result.detection_rate = static_cast<double>(tp) / n_pos;
    result.false_positive_rate = static_cast<double>(fp) / n_neg;
    log.stage_threshold = thr;
    log.detection_rate = result.detection_rate;
    log.false_positive_rate = result.false_positive_rate;
    result.rounds.push_back(log);
    if (result.false_positive_rate <= params.f_max) break;
  }
  if (result.false_positive_rate >= 1.0) {
    throw Error(ErrorCode::StageInfeasible, "stage rejects no negatives at detection rate " +
                                                std::to_string(params.d_min));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Cascade training

namespace {

bool stage_accepts(const CascadeStage& stage, const IntegralImage& ii, int w, int h) {
  const double std = ii.window_std(0, 0, w, h);
  double acc = 0.0;
  for (const auto& weak : stage.weak) {
    const ScaledFeature sf = scale_feature(weak.feature, w, h, w, h);
    if (weak.vote(base_value(sf, ii, std))) acc += weak.alpha;
  }
  return acc >= stage.stage_threshold;
}

}  // namespace

CascadeTrainResult train_cascade(std::span<const GrayRaster> pos, std::span<const GrayRaster> neg_pool,
                                 const CascadeParams& params) {
  if (pos.empty() || neg_pool.empty()) throw Error(ErrorCode::SingleClass, "train_cascade needs both pools");
  const int w = pos.front().width, h = pos.front().height;
  auto check = [&](const GrayRaster& r) {
    if (r.width != w || r.height != h) throw Error(ErrorCode::InvalidArgument, "training samples differ in size");
  };
  std::vector<IntegralImage> pos_ii(pos.size()), neg_ii(neg_pool.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    check(pos[i]);
    pos_ii[i] = IntegralImage(pos[i]);
  }
  for (std::size_t i = 0; i < neg_pool.size(); ++i) {
    check(neg_pool[i]);
    neg_ii[i] = IntegralImage(neg_pool[i]);
  }

  CascadeTrainResult out;
  out.model.window_w = w;
  out.model.window_h = h;
  auto& meta = out.model.metadata;
  meta.seed = params.stage.seed;
  meta.target_fpr = params.target_fpr;
  meta.f_max = params.stage.f_max;
  meta.d_min = params.stage.d_min;
  meta.max_weak = params.stage.max_weak;
  meta.feature_pool_size = params.stage.feature_pool_size;
  meta.max_stages = params.max_stages;
  meta.positives = static_cast<int>(pos.size());
  meta.negatives = static_cast<int>(neg_pool.size());

  std::vector<std::size_t> live_pos(pos.size()), live_neg(neg_pool.size());
  std::iota(live_pos.begin(), live_pos.end(), 0u);
  std::iota(live_neg.begin(), live_neg.end(), 0u);

  for (int k = 0; k < params.max_stages; ++k) {
    std::vector<IntegralImage> stage_pos, stage_neg;
    stage_pos.reserve(live_pos.size());
    stage_neg.reserve(live_neg.size());
    for (auto i : live_pos) stage_pos.push_back(pos_ii[i]);
    for (auto i : live_neg) stage_neg.push_back(neg_ii[i]);

    StageParams sp = params.stage;
    sp.seed = derive_seed(params.stage.seed, static_cast<std::uint64_t>(k));
    StageResult stage;
    try {
      stage = train_stage(stage_pos, stage_neg, w, h, sp);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StageInfeasible) throw;
      throw StageInfeasibleError("stage " + std::to_string(k) + ": " + e.what(), out.model);
    }

    std::vector<std::size_t> next_pos, next_neg;
    for (auto i : live_pos) {
      if (stage_accepts(stage.stage, pos_ii[i], w, h)) next_pos.push_back(i);
    }
    for (auto i : live_neg) {
      if (stage_accepts(stage.stage, neg_ii[i], w, h)) next_neg.push_back(i);
    }
    live_pos = std::move(next_pos);
    live_neg = std::move(next_neg);

    out.model.stages.push_back(stage.stage);
    meta.stage_detection_rates.push_back(stage.detection_rate);
    meta.stage_false_positive_rates.push_back(stage.false_positive_rate);
    out.stages.push_back(std::move(stage));
    const double fpr = static_cast<double>(live_neg.size()) / static_cast<double>(neg_pool.size());
    out.cumulative_fpr.push_back(fpr);
    out.cumulative_detection.push_back(static_cast<double>(live_pos.size()) / static_cast<double>(pos.size()));

    if (fpr <= params.target_fpr) {
      out.stop_reason = "target_fpr";
      return out;
    }
    if (live_neg.empty()) {
      out.stop_reason = "negatives_exhausted";
      return out;
    }
    if (live_pos.empty()) {
      out.stop_reason = "positives_exhausted";
      return out;
    }
  }
  out.stop_reason = "max_stages";
  return out;
}

CascadeTrainResult train_cascade_mined(std::span<const GrayRaster> pos, std::span<const GrayRaster> initial_neg,
                                       const NegativeDraw& draw, const CascadeParams& params,
                                       const MiningParams& mining) {
  if (pos.empty()) throw Error(ErrorCode::SingleClass, "train_cascade needs positives");
  if (mining.negatives_per_stage < 1 || mining.max_draws_per_stage < mining.negatives_per_stage) {
    throw Error(ErrorCode::InvalidArgument, "mining needs negatives_per_stage >= 1 and a larger draw budget");
  }
  const int w = pos.front().width, h = pos.front().height;
  std::vector<IntegralImage> pos_ii(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (pos[i].width != w || pos[i].height != h) {
      throw Error(ErrorCode::InvalidArgument, "training samples differ in size");
    }
    pos_ii[i] = IntegralImage(pos[i]);
  }

  CascadeTrainResult out;
  out.model.window_w = w;
  out.model.window_h = h;
  auto& meta = out.model.metadata;
  meta.seed = params.stage.seed;
  meta.target_fpr = params.target_fpr;
  meta.f_max = params.stage.f_max;
  meta.d_min = params.stage.d_min;
  meta.max_weak = params.stage.max_weak;
  meta.feature_pool_size = params.stage.feature_pool_size;
  meta.max_stages = params.max_stages;
  meta.positives = static_cast<int>(pos.size());
  meta.negatives = mining.negatives_per_stage;

  std::vector<std::size_t> live_pos(pos.size());
  std::iota(live_pos.begin(), live_pos.end(), 0u);
  std::uint64_t next_index = 0;
  constexpr std::size_t kBatch = 2048;

  // Fills `found` with windows the current cascade accepts; returns the
  // number of windows classified.
  auto mine = [&](std::vector<IntegralImage>& found) {
    found.clear();
    std::int64_t drawn = 0;
    std::vector<std::optional<IntegralImage>> slot(kBatch);
    std::vector<char> accepted(kBatch);
    while (static_cast<int>(found.size()) < mining.negatives_per_stage && drawn < mining.max_draws_per_stage) {
      parallel_for(kBatch, [&](std::size_t b) {
        slot[b].reset();
        accepted[b] = 0;
        auto img = draw(next_index + b);
        if (!img) return;
        if (img->width != w || img->height != h) {
          throw Error(ErrorCode::InvalidArgument, "negative draw is not window-sized");
        }
        slot[b].emplace(*img);
        bool pass = true;
        for (const auto& stage : out.model.stages) {
          if (!stage_accepts(stage, *slot[b], w, h)) {
            pass = false;
            break;
          }
        }
        accepted[b] = pass;
      });
      if (std::none_of(slot.begin(), slot.end(), [](const auto& o) { return o.has_value(); })) break;
      std::size_t b = 0;
      for (; b < kBatch; ++b) {
        if (static_cast<int>(found.size()) >= mining.negatives_per_stage || drawn >= mining.max_draws_per_stage) break;
        if (!slot[b]) continue;
        ++drawn;
        if (accepted[b]) found.push_back(std::move(*slot[b]));
      }
      next_index += b;
    }
    return drawn;
  };

  std::vector<IntegralImage> negatives;
  mine(negatives);
  for (const auto& img : initial_neg) {
    if (img.width != w || img.height != h) throw Error(ErrorCode::InvalidArgument, "training samples differ in size");
    negatives.emplace_back(img);
  }
  for (int k = 0; k < params.max_stages; ++k) {
    std::vector<IntegralImage> stage_pos;
    stage_pos.reserve(live_pos.size());
    for (auto i : live_pos) stage_pos.push_back(pos_ii[i]);

    StageParams sp = params.stage;
    sp.seed = derive_seed(params.stage.seed, static_cast<std::uint64_t>(k));
    StageResult stage;
    try {
      stage = train_stage(stage_pos, negatives, w, h, sp);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StageInfeasible) throw;
      throw StageInfeasibleError("stage " + std::to_string(k) + ": " + e.what(), out.model);
    }
    std::vector<std::size_t> next_pos;
    for (auto i : live_pos) {
      if (stage_accepts(stage.stage, pos_ii[i], w, h)) next_pos.push_back(i);
    }
    live_pos = std::move(next_pos);
    out.model.stages.push_back(stage.stage);
    meta.stage_detection_rates.push_back(stage.detection_rate);
    meta.stage_false_positive_rates.push_back(stage.false_positive_rate);
    out.stages.push_back(std::move(stage));
    out.cumulative_detection.push_back(static_cast<double>(live_pos.size()) / static_cast<double>(pos.size()));

    const std::int64_t drawn = mine(negatives);
    const double fpr = drawn > 0 ? static_cast<double>(negatives.size()) / static_cast<double>(drawn) : 0.0;
    out.cumulative_fpr.push_back(fpr);
    if (fpr <= params.target_fpr) {
      out.stop_reason = "target_fpr";
      return out;
    }
    if (static_cast<int>(negatives.size()) < mining.negatives_per_stage) {
      out.stop_reason = "negatives_exhausted";
      return out;
    }
    if (live_pos.empty()) {
      out.stop_reason = "positives_exhausted";
      return out;
    }
  }
  out.stop_reason = "max_stages";
  return out;
}

// ---------------------------------------------------------------------------
// Classification

CompiledCascade::CompiledCascade(const CascadeModel& model, int window_w, int window_h)
    : model_(&model), window_w_(window_w), window_h_(window_h) {
  features_.reserve(model.stages.size());
  for (const auto& stage : model.stages) {
    std::vector<ScaledFeature> feats;
    feats.reserve(stage.weak.size());
    for (const auto& weak : stage.weak) {
      feats.push_back(scale_feature(weak.feature, model.window_w, model.window_h, window_w, window_h));
    }
    features_.push_back(std::move(feats));
  }
}

ClassifyResult CompiledCascade::classify(const IntegralImage& ii, int x, int y) const {
  const double std = ii.window_std(x, y, window_w_, window_h_);
  ClassifyResult result;
  for (std::size_t s = 0; s < model_->stages.size(); ++s) {
    const auto& stage = model_->stages[s];
    const auto& feats = features_[s];
    double acc = 0.0;
    for (std::size_t k = 0; k < stage.weak.size(); ++k) {
      const double value = feats[k].raw(ii, x, y) / (kSampleScale * std);
      if (stage.weak[k].vote(value)) acc += stage.weak[k].alpha;
    }
    result.stages_evaluated = static_cast<int>(s) + 1;
    result.score = acc - stage.stage_threshold;
    if (acc < stage.stage_threshold) {
      result.pass = false;
      return result;
    }
  }
  result.pass = true;
  return result;
}

ClassifyResult classify_window(const CascadeModel& model, const IntegralImage& ii, const RectI& window) {
  if (window.w <= 0 || window.h <= 0 || window.x < 0 || window.y < 0 || window.x + window.w > ii.width() ||
      window.y + window.h > ii.height()) {
    throw Error(ErrorCode::RectBounds, "window outside image");
  }
  return CompiledCascade(model, window.w, window.h).classify(ii, window.x, window.y);
}

}  // namespace brickscan
