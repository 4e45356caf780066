#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "brickscan/cascade.hpp"
#include "brickscan/detect.hpp"
#include "brickscan/parallel.hpp"
#include "brickscan/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace brickscan;

namespace {

/// All-pairs union-find clustering with the documented similarity rule.
std::vector<Detection> oracle_group(const std::vector<Detection>& in, int min_neighbors, double eps) {
  const std::size_t n = in.size();
  std::vector<std::size_t> root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = i;
  auto find = [&](std::size_t i) {
    while (root[i] != i) i = root[i];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Rect &a = in[i].rect, &b = in[j].rect;
      const double mw = 0.5 * (a.w + b.w), mh = 0.5 * (a.h + b.h);
      const bool sim = std::abs(a.x - b.x) <= eps * mw && std::abs(a.y - b.y) <= eps * mh &&
                       std::abs(a.w - b.w) <= eps * mw && std::abs(a.h - b.h) <= eps * mh;
      if (!sim) continue;
      const std::size_t ri = find(i), rj = find(j);
      if (ri != rj) root[std::max(ri, rj)] = std::min(ri, rj);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[find(i)].push_back(i);
  std::vector<Detection> out;
  for (const auto& [first, members] : clusters) {
    if (static_cast<int>(members.size()) < min_neighbors) continue;
    Detection d;
    double x = 0, y = 0, w = 0, h = 0;
    d.score = -INFINITY;
    for (auto i : members) {
      x += in[i].rect.x;
      y += in[i].rect.y;
      w += in[i].rect.w;
      h += in[i].rect.h;
      d.score = std::max(d.score, in[i].score);
    }
    const double c = static_cast<double>(members.size());
    d.rect = {x / c, y / c, w / c, h / c};
    d.neighbors = static_cast<int>(members.size());
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> random_candidates(CounterRng& rng, int n) {
  std::vector<Detection> out;
  // A few seeds with jittered copies, plus loners.
  for (int i = 0; i < n; ++i) {
    const double cx = 20.0 * static_cast<double>(rng.below(8)), cy = 10.0 * static_cast<double>(rng.below(6));
    const double s = 1.0 + 0.1 * static_cast<double>(rng.below(3));
    out.push_back({{cx + rng.uniform(-3, 3), cy + rng.uniform(-1, 1), 48 * s + rng.uniform(-2, 2),
                    12 * s + rng.uniform(-0.5, 0.5)},
                   rng.uniform(),
                   1,
                   "brick"});
  }
  return out;
}

}  // namespace

TEST_CASE("group_rectangles: identical rects") {
  const std::vector<Detection> ten(10, Detection{{5, 6, 48, 12}, 0.5, 1, "brick"});
  const auto g = group_rectangles(ten, 5);
  REQUIRE(g.size() == 1);
  CHECK(g[0].neighbors == 10);
  CHECK(g[0].rect == Rect{5, 6, 48, 12});
  CHECK(group_rectangles(ten, 11).empty());
  const auto raw = group_rectangles(ten, 0);
  CHECK(raw.size() == 10);
  CHECK(raw[3].neighbors == 1);
}

TEST_CASE("group_rectangles: equals brute-force union-find") {
  CounterRng rng(21);
  for (int k = 0; k < 50; ++k) {
    const auto cands = random_candidates(rng, 20 + static_cast<int>(rng.below(200)));
    for (double eps : {0.1, 0.2}) {
      int prev = static_cast<int>(cands.size()) + 1;
      for (int mn : {1, 2, 3, 5, 10}) {
        const auto got = group_rectangles(cands, mn, eps);
        const auto want = oracle_group(cands, mn, eps);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          REQUIRE(got[i].rect == want[i].rect);
          REQUIRE(got[i].neighbors == want[i].neighbors);
          REQUIRE(got[i].score == want[i].score);
        }
        CHECK(static_cast<int>(got.size()) <= prev);
        prev = static_cast<int>(got.size());
      }
    }
  }
}

TEST_CASE("to_face_rects: shrinks about the centre") {
  std::vector<Detection> d{{{10, 20, 55, 11}, 1.0, 3, "brick"}};
  to_face_rects(d, 0.1);
  CHECK(d[0].rect.w == doctest::Approx(50.0));
  CHECK(d[0].rect.h == doctest::Approx(10.0));
  CHECK(d[0].rect.cx() == doctest::Approx(37.5));
  CHECK(d[0].rect.cy() == doctest::Approx(25.5));
}

TEST_CASE("match_template_ncc: exact copies peak at 1") {
  CounterRng rng(2);
  GrayRaster tmpl(8, 4);
  for (auto& v : tmpl.values) v = rng.uniform();
  GrayRaster img(40, 20, 0.3);
  for (int k = 0; k < 3; ++k) {
    const int ox = 2 + 12 * k, oy = 3 + 5 * k;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 8; ++x) img.at(ox + x, oy + y) = tmpl.at(x, y);
  }
  const TemplateMatch m = match_template_ncc(img, tmpl, 0.99);
  REQUIRE(m.peaks.size() == 3);
  for (const auto& p : m.peaks) CHECK(p.score == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.scores.width == 33);
  CHECK(m.scores.height == 17);
  CHECK(error_code_of([&] { match_template_ncc(img, GrayRaster(8, 4, 0.5)); }) == ErrorCode::FlatTemplate);
  CHECK(error_code_of([&] { match_template_ncc(tmpl, img); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("match_template_ncc: direct oracle at sampled offsets") {
  CounterRng rng(3);
  GrayRaster img(30, 12), tmpl(6, 3);
  for (auto& v : img.values) v = rng.uniform();
  for (auto& v : tmpl.values) v = rng.uniform();
  const TemplateMatch m = match_template_ncc(img, tmpl, 2.0);
  CHECK(m.peaks.empty());
  for (int oy = 0; oy < m.scores.height; ++oy) {
    for (int ox = 0; ox < m.scores.width; ++ox) {
      double mi = 0, mt = 0;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 6; ++x) {
          mi += img.at(ox + x, oy + y);
          mt += tmpl.at(x, y);
        }
      mi /= 18;
      mt /= 18;
      double num = 0, di = 0, dt = 0;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 6; ++x) {
          const double a = img.at(ox + x, oy + y) - mi, b = tmpl.at(x, y) - mt;
          num += a * b;
          di += a * a;
          dt += b * b;
        }
      CHECK(m.scores.at(ox, oy) == doctest::Approx(num / std::sqrt(di * dt)).epsilon(1e-9));
    }
  }
}

TEST_CASE("detect_multiscale: min_neighbors 0 returns raw candidates, thread-count independent") {
  // One-stage model: a bright left half.
  CascadeModel m;
  m.window_w = 16;
  m.window_h = 8;
  WeakClassifier w;
  w.feature = {HaarKind::TwoRectH, {0, 0, 16, 8}};
  w.threshold = 0.5;
  w.polarity = 1;
  w.alpha = 1.0;
  m.stages.push_back({{w}, 0.5});
  CounterRng rng(7);
  GrayRaster img(80, 30);
  for (auto& v : img.values) v = rng.uniform();
  for (int y = 10; y < 20; ++y)
    for (int x = 20; x < 44; ++x) img.at(x, y) = x < 32 ? 0.95 : 0.05;
  DetectParams p;
  p.min_neighbors = 0;
  const auto cands = detect_candidates(img, m, p);
  const auto raw = detect_multiscale(img, m, p);
  CHECK(raw.size() == cands.size());
  REQUIRE(!cands.empty());
  set_thread_count(1);
  const auto one = detect_candidates(img, m, p);
  set_thread_count(4);
  const auto four = detect_candidates(img, m, p);
  set_thread_count(0);
  CHECK(one == four);
  CHECK(one == cands);
  int prev = static_cast<int>(cands.size());
  for (int mn : {1, 5, 25, 50}) {
    p.min_neighbors = mn;
    const int n = static_cast<int>(detect_multiscale(img, m, p).size());
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("detect_candidates: window sizes follow the scale factor") {
  CascadeModel m;
  m.window_w = 16;
  m.window_h = 8;
  WeakClassifier w;
  w.feature = {HaarKind::TwoRectH, {0, 0, 16, 8}};
  w.threshold = -100.0;  // accepts everything non-flat
  m.stages.push_back({{w}, 0.0});
  CounterRng rng(8);
  GrayRaster img(40, 16);
  for (auto& v : img.values) v = rng.uniform();
  DetectParams p;
  p.scale_factor = 1.5;
  p.min_neighbors = 0;
  std::vector<double> widths;
  for (const auto& d : detect_candidates(img, m, p))
    if (widths.empty() || widths.back() != d.rect.w) widths.push_back(d.rect.w);
  REQUIRE(widths.size() >= 2);
  CHECK(widths[0] == 16.0);
  CHECK(widths[1] == 24.0);
  // Stride max(1, round(step * scale)) at scale 1.5 is 2.
  p.max_w = 16;
  CHECK(detect_candidates(img, m, p).size() == static_cast<std::size_t>((40 - 16 + 1) * (16 - 8 + 1)));
}

TEST_CASE("DetectParams: paper preset") {
  const DetectParams p = DetectParams::paper_preset();
  CHECK(p.scale_factor == 10.0);
  CHECK(p.min_neighbors == 25);
}
