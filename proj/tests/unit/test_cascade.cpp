#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "brickscan/cascade.hpp"
#include "brickscan/haar.hpp"
#include "brickscan/integral.hpp"
#include "brickscan/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace brickscan;

namespace {

GrayRaster random_raster(int w, int h, CounterRng& rng) {
  GrayRaster img(w, h);
  for (auto& v : img.values) v = rng.uniform();
  return img;
}

std::int64_t brute_sum(const GrayRaster& img, const RectI& r) {
  std::int64_t s = 0;
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) s += quantize_sample(img.at(x, y));
  return s;
}

/// Left half bright for positives, right half bright for negatives, plus noise.
void toy_samples(std::vector<IntegralImage>& pos, std::vector<IntegralImage>& neg, int n, std::uint64_t seed,
                 double noise) {
  CounterRng rng(seed);
  for (int i = 0; i < 2 * n; ++i) {
    const bool positive = i < n;
    GrayRaster img(24, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 24; ++x)
        img.at(x, y) = std::clamp(((x < 12) == positive ? 0.8 : 0.2) + noise * rng.uniform(-1, 1), 0.0, 1.0);
    (positive ? pos : neg).emplace_back(img);
  }
}

/// Exhaustive stump search with the documented tie rules.
Stump brute_stump(const std::vector<double>& v, const std::vector<std::uint8_t>& y, const std::vector<double>& w) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> cand{sorted.front() - 1.0};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) cand.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  cand.push_back(sorted.back() + 1.0);
  Stump best{0, 1, INFINITY};
  for (double t : cand) {
    for (int p : {1, -1}) {
      double err = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const bool vote = p == 1 ? v[i] >= t : v[i] < t;
        if (vote != (y[i] == 1)) err += w[i];
      }
      if (err < best.error) best = {t, p, err};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("integral image: small exact cases") {
  const std::vector<std::uint16_t> ones(16, 1);
  const IntegralImage ii(4, 4, ones);
  CHECK(ii.rect_sum({0, 0, 4, 4}) == 16);
  CHECK(ii.rect_sum({1, 1, 2, 3}) == 6);
  std::vector<std::uint16_t> one(30, 0);
  one[2 * 6 + 4] = 777;
  const IntegralImage single(6, 5, one);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x)
      for (int h = 1; y + h <= 5; ++h)
        for (int w = 1; x + w <= 6; ++w) {
          const bool covers = x <= 4 && 4 < x + w && y <= 2 && 2 < y + h;
          REQUIRE(single.rect_sum({x, y, w, h}) == (covers ? 777 : 0));
        }
  CHECK(error_code_of([&] { ii.rect_sum({0, 0, 0, 2}); }) == ErrorCode::RectBounds);
  CHECK(error_code_of([&] { ii.rect_sum({3, 0, 2, 2}); }) == ErrorCode::RectBounds);
  CHECK(error_code_of([&] { ii.rect_sum({-1, 0, 2, 2}); }) == ErrorCode::RectBounds);
}

TEST_CASE("integral image: brute force on random rasters") {
  CounterRng rng(1);
  for (int k = 0; k < 10; ++k) {
    const GrayRaster img = random_raster(64, 64, rng);
    const IntegralImage ii(img);
    for (int i = 0; i < 200; ++i) {
      const int x = static_cast<int>(rng.below(64)), y = static_cast<int>(rng.below(64));
      const RectI r{x, y, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(64 - x))),
                    1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(64 - y)))};
      REQUIRE(ii.rect_sum(r) == brute_sum(img, r));
      std::int64_t sq = 0;
      for (int yy = r.y; yy < r.y + r.h; ++yy)
        for (int xx = r.x; xx < r.x + r.w; ++xx) {
          const std::int64_t q = quantize_sample(img.at(xx, yy));
          sq += q * q;
        }
      REQUIRE(ii.rect_sum_sq(r) == sq);
    }
  }
}

TEST_CASE("haar: enumeration is valid and unique") {
  const auto all = enumerate_features(12, 6);
  REQUIRE(!all.empty());
  for (const auto& f : all) validate(f, 12, 6);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(!(all[i] == all[i - 1]));
  CHECK(error_code_of([] { validate(HaarFeature{HaarKind::ThreeRectH, {0, 0, 4, 2}}, 12, 6); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("haar: constant image scores 0") {
  const IntegralImage ii(GrayRaster(48, 12, 0.37));
  for (const auto& f : enumerate_features(48, 12)) {
    if (f.rect.w > 8 || f.rect.h > 4) continue;
    CHECK(eval_feature(ii, f, {0, 0, 48, 12}, 48, 12) == 0.0);
  }
}

TEST_CASE("haar: aligned step maximises TWO_RECT_H over translations") {
  GrayRaster img(32, 8, 0.2);
  for (int y = 0; y < 8; ++y)
    for (int x = 16; x < 32; ++x) img.at(x, y) = 0.9;
  const IntegralImage ii(img);
  double best = -1.0;
  int best_x = -1;
  for (int x = 0; x + 8 <= 32; ++x) {
    const double v = std::abs(eval_feature(ii, {HaarKind::TwoRectH, {x, 0, 8, 8}}, {0, 0, 32, 8}, 32, 8));
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  CHECK(best_x == 12);
}

TEST_CASE("haar: 2x window on 2x upsampled image gives the same value") {
  CounterRng rng(4);
  const GrayRaster img = random_raster(24, 6, rng);
  GrayRaster up(48, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 48; ++x) up.at(x, y) = img.at(x / 2, y / 2);
  const IntegralImage a(img), b(up);
  for (const auto& f : enumerate_features(24, 6)) {
    const double va = eval_feature(a, f, {0, 0, 24, 6}, 24, 6);
    const double vb = eval_feature(b, f, {0, 0, 48, 12}, 24, 6);
    REQUIRE(std::abs(va - vb) <= 1e-6);
  }
}

TEST_CASE("haar: scaled cells stay inside the window") {
  int outside = 0;
  for (const auto& f : enumerate_features(48, 12)) {
    for (double s = 1.0; s < 12.0; s *= 1.1) {
      const int w = static_cast<int>(std::lround(48 * s)), h = static_cast<int>(std::lround(12 * s));
      const ScaledFeature sf = scale_feature(f, 48, 12, w, h);
      for (int k = 0; k < sf.count; ++k) {
        const RectI& c = sf.cells[static_cast<std::size_t>(k)];
        outside += c.x < 0 || c.y < 0 || c.x + c.w > w || c.y + c.h > h;
      }
    }
  }
  CHECK(outside == 0);
}

TEST_CASE("train_stump: separable pair") {
  const std::vector<double> v{-1.0, 1.0};
  const std::vector<std::uint8_t> y{0, 1};
  const std::vector<double> w{0.5, 0.5};
  const Stump s = train_stump(v, y, w);
  CHECK(s.error == 0.0);
  CHECK(s.polarity == 1);
  CHECK(s.threshold > -1.0);
  CHECK(s.threshold <= 1.0);
  CHECK(error_code_of([&] {
          const std::vector<std::uint8_t> same{1, 1};
          train_stump(v, same, w);
        }) == ErrorCode::SingleClass);
}

TEST_CASE("train_stump: heavy sample flips the split") {
  // Best unweighted split is t = 1.5; all weight on the positive at 0 forces a
  // split that accepts it.
  const std::vector<double> v{0.0, 1.0, 2.0, 3.0};
  const std::vector<std::uint8_t> y{1, 0, 1, 1};
  const std::vector<double> w{100.0, 1.0, 1.0, 1.0};
  const Stump s = train_stump(v, y, w);
  const bool accepts_heavy = s.polarity == 1 ? 0.0 >= s.threshold : 0.0 < s.threshold;
  CHECK(accepts_heavy);
  const Stump b = brute_stump({v.begin(), v.end()}, {y.begin(), y.end()}, {w.begin(), w.end()});
  CHECK(s.threshold == b.threshold);
  CHECK(s.polarity == b.polarity);
}

TEST_CASE("train_stump: equals exhaustive enumeration") {
  CounterRng rng(11);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(50), w(50);
    std::vector<std::uint8_t> y(50);
    for (int i = 0; i < 50; ++i) {
      v[static_cast<std::size_t>(i)] = static_cast<double>(rng.below(20));  // forces ties
      y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng.below(2));
      w[static_cast<std::size_t>(i)] = static_cast<double>(1 + rng.below(9));  // exact sums
    }
    y[0] = 0;
    y[1] = 1;
    const Stump s = train_stump(v, y, w);
    const Stump b = brute_stump(v, y, w);
    REQUIRE(s.error == b.error);
    REQUIRE(s.threshold == b.threshold);
    REQUIRE(s.polarity == b.polarity);
  }
}

TEST_CASE("train_stage: separable toy reaches zero error within 10 rounds") {
  std::vector<IntegralImage> pos, neg;
  toy_samples(pos, neg, 40, 1, 0.05);
  StageParams p;
  p.max_weak = 10;
  p.f_max = 1e-9;
  p.d_min = 1.0;
  p.feature_pool_size = 300;
  p.seed = 3;
  const StageResult r = train_stage(pos, neg, 24, 8, p);
  REQUIRE(!r.rounds.empty());
  CHECK(r.rounds.back().weighted_error == 0.0);
  CHECK(r.rounds.size() <= 10);
  CHECK(r.detection_rate == 1.0);
  CHECK(r.false_positive_rate == 0.0);
}

TEST_CASE("train_stage: exponential loss never increases") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    // Near-random data: many rounds before f_max is reached.
    CounterRng rng(s);
    std::vector<IntegralImage> pos, neg;
    for (int i = 0; i < 60; ++i) {
      GrayRaster img = random_raster(24, 8, rng);
      if (i < 30)
        for (int y = 0; y < 8; ++y) img.at(3, y) = std::min(1.0, img.at(3, y) + 0.1);
      (i < 30 ? pos : neg).emplace_back(img);
    }
    StageParams p;
    p.max_weak = 15;
    p.f_max = 1e-9;
    p.feature_pool_size = 200;
    p.seed = s;
    const StageResult r = train_stage(pos, neg, 24, 8, p);
    CHECK(r.rounds.size() > 1);
    for (std::size_t i = 1; i < r.rounds.size(); ++i) CHECK(r.rounds[i].exp_loss <= r.rounds[i - 1].exp_loss);
    for (const auto& round : r.rounds) CHECK(round.stump_error < 0.5);
  }
}

TEST_CASE("train_stage: reported rates equal direct classification") {
  std::vector<IntegralImage> pos, neg;
  toy_samples(pos, neg, 50, 9, 0.6);
  StageParams p;
  p.feature_pool_size = 300;
  p.seed = 2;
  const StageResult r = train_stage(pos, neg, 24, 8, p);
  CascadeModel m;
  m.window_w = 24;
  m.window_h = 8;
  m.stages = {r.stage};
  int d = 0, f = 0;
  for (const auto& ii : pos) d += classify_window(m, ii, {0, 0, 24, 8}).pass;
  for (const auto& ii : neg) f += classify_window(m, ii, {0, 0, 24, 8}).pass;
  CHECK(r.detection_rate == static_cast<double>(d) / 50.0);
  CHECK(r.false_positive_rate == static_cast<double>(f) / 50.0);
  CHECK(r.detection_rate >= p.d_min);
}

TEST_CASE("train_cascade: target 1 stops after one stage") {
  CounterRng rng(5);
  std::vector<GrayRaster> pos, neg;
  for (int i = 0; i < 20; ++i) {
    GrayRaster a(24, 8, 0.2), b(24, 8, 0.2);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 12; ++x) a.at(x, y) = 0.8 + 0.1 * rng.uniform();
    for (int y = 0; y < 8; ++y)
      for (int x = 12; x < 24; ++x) b.at(x, y) = 0.8 + 0.1 * rng.uniform();
    pos.push_back(a);
    neg.push_back(b);
  }
  CascadeParams p;
  p.target_fpr = 1.0;
  p.stage.feature_pool_size = 100;
  const auto r = train_cascade(pos, neg, p);
  CHECK(r.model.stages.size() == 1);
  CHECK(r.stop_reason == "target_fpr");
}

TEST_CASE("train_cascade: cumulative rates match direct evaluation") {
  CounterRng rng(6);
  std::vector<GrayRaster> pos, neg;
  for (int i = 0; i < 60; ++i) {
    GrayRaster a(24, 8), b(24, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 24; ++x) {
        a.at(x, y) = std::clamp((x < 12 ? 0.6 : 0.4) + 0.35 * rng.uniform(-1, 1), 0.0, 1.0);
        b.at(x, y) = rng.uniform();
      }
    pos.push_back(a);
    neg.push_back(b);
  }
  CascadeParams p;
  p.target_fpr = 0.001;
  p.max_stages = 4;
  p.stage.feature_pool_size = 200;
  p.stage.seed = 8;
  const auto r = train_cascade(pos, neg, p);
  REQUIRE(!r.model.stages.empty());
  CascadeModel partial = r.model;
  for (std::size_t k = 0; k < r.model.stages.size(); ++k) {
    partial.stages.assign(r.model.stages.begin(), r.model.stages.begin() + static_cast<std::ptrdiff_t>(k + 1));
    int d = 0, f = 0;
    for (const auto& g : pos) d += classify_window(partial, IntegralImage(g), {0, 0, 24, 8}).pass;
    for (const auto& g : neg) f += classify_window(partial, IntegralImage(g), {0, 0, 24, 8}).pass;
    CHECK(r.cumulative_detection[k] == static_cast<double>(d) / 60.0);
    CHECK(r.cumulative_fpr[k] == static_cast<double>(f) / 60.0);
    double prod = 1.0;
    for (std::size_t i = 0; i <= k; ++i) prod *= r.stages[i].false_positive_rate;
    CHECK(r.cumulative_fpr[k] <= prod + 1e-12);
  }
}

TEST_CASE("classify: compiled cascade equals stage-by-stage evaluation") {
  std::vector<IntegralImage> pos, neg;
  toy_samples(pos, neg, 30, 4, 0.5);
  StageParams sp;
  sp.feature_pool_size = 200;
  CascadeModel m;
  m.window_w = 24;
  m.window_h = 8;
  for (int k = 0; k < 2; ++k) {
    sp.seed = static_cast<std::uint64_t>(k);
    m.stages.push_back(train_stage(pos, neg, 24, 8, sp).stage);
  }
  CounterRng rng(12);
  const IntegralImage big(random_raster(80, 30, rng));
  const CompiledCascade cc(m, 24, 8);
  for (int i = 0; i < 10; ++i) {
    const int x = static_cast<int>(rng.below(56)), y = static_cast<int>(rng.below(22));
    // Manual evaluation.
    bool pass = true;
    int evaluated = 0;
    double score = 0.0;
    for (const auto& st : m.stages) {
      ++evaluated;
      double sum = 0.0;
      for (const auto& w : st.weak) sum += w.alpha * w.vote(eval_feature(big, w.feature, {x, y, 24, 8}, 24, 8));
      score = sum - st.stage_threshold;
      if (sum < st.stage_threshold) {
        pass = false;
        break;
      }
    }
    const ClassifyResult a = cc.classify(big, x, y);
    const ClassifyResult b = classify_window(m, big, {x, y, 24, 8});
    CHECK(a.pass == pass);
    CHECK(b.pass == pass);
    CHECK(a.stages_evaluated == evaluated);
    CHECK(a.score == doctest::Approx(score).epsilon(1e-12));
  }
  CHECK(error_code_of([&] { classify_window(m, big, {70, 0, 24, 8}); }) == ErrorCode::RectBounds);
}

TEST_CASE("cascade JSON round trip and errors") {
  std::vector<IntegralImage> pos, neg;
  toy_samples(pos, neg, 20, 2, 0.3);
  CascadeModel m;
  m.window_w = 24;
  m.window_h = 8;
  StageParams sp;
  sp.feature_pool_size = 100;
  m.stages.push_back(train_stage(pos, neg, 24, 8, sp).stage);
  m.metadata.seed = 0xFFFFFFFFFFFFFFFFULL;
  m.metadata.stage_detection_rates = {1.0};
  m.metadata.stage_false_positive_rates = {0.1 + 0.2};
  m.metadata.crop_dilation = 0.1;
  const std::string text = cascade_to_json(m);
  const CascadeModel back = cascade_from_json(text);
  CHECK(back == m);
  CHECK(cascade_to_json(back) == text);
  std::string wrong = text;
  wrong.replace(wrong.find("brickscan-cascade-v1"), 20, "brickscan-cascade-v9");
  CHECK(error_code_of([&] { cascade_from_json(wrong); }) == ErrorCode::FormatMismatch);
  CascadeModel empty = m;
  empty.stages.clear();
  CHECK(error_code_of([&] { validate(empty); }) == ErrorCode::InvalidArgument);
}
