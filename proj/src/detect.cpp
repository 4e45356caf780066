#include "brickscan/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brickscan/integral.hpp"
#include "brickscan/parallel.hpp"

namespace brickscan {

DetectParams DetectParams::paper_preset() {
  DetectParams p;
  p.scale_factor = 10.0;
  p.min_neighbors = 25;
  return p;
}

namespace {

void check_params(const DetectParams& p) {
  if (!(p.scale_factor > 1.0)) throw Error(ErrorCode::InvalidArgument, "scale_factor must be > 1");
  if (!(p.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be > 0");
  if (!(p.group_eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "group eps must be > 0");
  if (p.min_neighbors < 0) throw Error(ErrorCode::InvalidArgument, "min_neighbors must be >= 0");
  if ((p.max_w > 0 && p.min_w > p.max_w) || (p.max_h > 0 && p.min_h > p.max_h)) {
    throw Error(ErrorCode::InvalidArgument, "min_size exceeds max_size");
  }
}

}  // namespace

std::vector<Detection> detect_candidates(const GrayRaster& img, const CascadeModel& model, const DetectParams& params) {
  check_params(params);
  validate(model);
  std::vector<Detection> out;
  if (img.width < model.window_w || img.height < model.window_h) return out;
  const IntegralImage ii(img);
  const int min_w = std::max(params.min_w, model.window_w), min_h = std::max(params.min_h, model.window_h);
  const int max_w = std::min(params.max_w > 0 ? params.max_w : img.width, img.width);
  const int max_h = std::min(params.max_h > 0 ? params.max_h : img.height, img.height);

  int last_w = -1, last_h = -1;
  for (int k = 0;; ++k) {
    const double s = std::pow(params.scale_factor, k);
    const int w = static_cast<int>(std::lround(model.window_w * s));
    const int h = static_cast<int>(std::lround(model.window_h * s));
    if (w > max_w || h > max_h) break;
    if (w < min_w || h < min_h || (w == last_w && h == last_h)) continue;
    last_w = w;
    last_h = h;
    const int stride = std::max(1, static_cast<int>(std::lround(params.step * s)));
    const CompiledCascade cascade(model, w, h);
    const int rows = (img.height - h) / stride + 1;
    const int cols = (img.width - w) / stride + 1;
    std::vector<std::vector<Detection>> per_row(static_cast<std::size_t>(rows));
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t r) {
      const int y = static_cast<int>(r) * stride;
      auto& found = per_row[r];
      for (int c = 0; c < cols; ++c) {
        const int x = c * stride;
        if (ii.window_flat(x, y, w, h)) continue;
        const auto res = cascade.classify(ii, x, y);
        if (res.pass) found.push_back({Rect{double(x), double(y), double(w), double(h)}, res.score, 1, "brick"});
      }
    });
    for (auto& row : per_row) out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<Detection> detect_multiscale(const GrayRaster& img, const CascadeModel& model,
                                         const DetectParams& params) {
  auto out = group_rectangles(detect_candidates(img, model, params), params.min_neighbors, params.group_eps);
  if (params.rotated_pass) {
    const auto turned = group_rectangles(detect_candidates(rotate90(img), model, params), params.min_neighbors,
                                         params.group_eps);
    // rotate90 sends (x, y) to (y, W-1-x).
    for (auto d : turned) {
      const Rect r = d.rect;
      d.rect = {img.width - r.y - r.h, r.x, r.h, r.w};
      out.push_back(std::move(d));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grouping

bool similar_rects(const Rect& a, const Rect& b, double eps) {
  const double mw = 0.5 * (a.w + b.w), mh = 0.5 * (a.h + b.h);
  return std::abs(a.x - b.x) <= eps * mw && std::abs(a.y - b.y) <= eps * mh && std::abs(a.w - b.w) <= eps * mw &&
         std::abs(a.h - b.h) <= eps * mh;
}

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

void to_face_rects(std::vector<Detection>& dets, double dilation) {
  if (!(dilation >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dilation must be >= 0");
  const double k = 1.0 / (1.0 + dilation);
  for (auto& d : dets) {
    Rect& r = d.rect;
    const double cx = r.x + 0.5 * r.w, cy = r.y + 0.5 * r.h;
    r.w *= k;
    r.h *= k;
    r.x = cx - 0.5 * r.w;
    r.y = cy - 0.5 * r.h;
  }
}

std::vector<Detection> group_rectangles(std::span<const Detection> rects, int min_neighbors, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "group eps must be > 0");
  if (min_neighbors <= 0) {
    std::vector<Detection> out(rects.begin(), rects.end());
    for (auto& d : out) d.neighbors = 1;
    return out;
  }
  const std::size_t n = rects.size();
  std::vector<std::size_t> by_x(n);
  std::iota(by_x.begin(), by_x.end(), 0u);
  std::sort(by_x.begin(), by_x.end(), [&](auto a, auto b) {
    return rects[a].rect.x < rects[b].rect.x || (rects[a].rect.x == rects[b].rect.x && a < b);
  });
  double max_w = 0.0;
  for (const auto& d : rects) max_w = std::max(max_w, d.rect.w);

  DisjointSet ds(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Rect& a = rects[by_x[i]].rect;
    // |dx| <= eps * (a.w + b.w) / 2 <= eps * (a.w + max_w) / 2
    const double reach = a.x + eps * 0.5 * (a.w + max_w);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Rect& b = rects[by_x[j]].rect;
      if (b.x > reach) break;
      if (similar_rects(a, b, eps)) ds.unite(by_x[i], by_x[j]);
    }
  }

  struct Acc {
    double x = 0, y = 0, w = 0, h = 0, score = -INFINITY;
    int count = 0;
  };
  std::vector<Acc> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = acc[ds.find(i)];
    const auto& r = rects[i].rect;
    a.x += r.x;
    a.y += r.y;
    a.w += r.w;
    a.h += r.h;
    a.score = std::max(a.score, rects[i].score);
    ++a.count;
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = acc[i];
    if (a.count == 0 || a.count < min_neighbors) continue;  // roots are their cluster's first member
    const double c = a.count;
    out.push_back({Rect{a.x / c, a.y / c, a.w / c, a.h / c}, a.score, a.count, rects[i].label});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Template matching

TemplateMatch match_template_ncc(const GrayRaster& img, const GrayRaster& tmpl, double threshold) {
  if (tmpl.width <= 0 || tmpl.height <= 0 || tmpl.width > img.width || tmpl.height > img.height) {
    throw Error(ErrorCode::InvalidArgument, "template must fit inside the image");
  }
  const std::size_t tn = tmpl.values.size();
  const double tmean = std::accumulate(tmpl.values.begin(), tmpl.values.end(), 0.0) / static_cast<double>(tn);
  std::vector<double> t(tn);
  double tnorm2 = 0.0;
  for (std::size_t i = 0; i < tn; ++i) {
    t[i] = tmpl.values[i] - tmean;
    tnorm2 += t[i] * t[i];
  }
  if (tnorm2 <= 1e-12 * static_cast<double>(tn)) throw Error(ErrorCode::FlatTemplate, "template has zero variance");
  const double tnorm = std::sqrt(tnorm2);

  TemplateMatch out;
  auto& map = out.scores;
  map.width = img.width - tmpl.width + 1;
  map.height = img.height - tmpl.height + 1;
  map.values.assign(static_cast<std::size_t>(map.width) * map.height, 0.0);
  parallel_for(static_cast<std::size_t>(map.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < map.width; ++x) {
      double mean = 0.0;
      for (int v = 0; v < tmpl.height; ++v) {
        for (int u = 0; u < tmpl.width; ++u) mean += img.at(x + u, y + v);
      }
      mean /= static_cast<double>(tn);
      double cross = 0.0, var = 0.0;
      std::size_t k = 0;
      for (int v = 0; v < tmpl.height; ++v) {
        for (int u = 0; u < tmpl.width; ++u, ++k) {
          const double d = img.at(x + u, y + v) - mean;
          cross += d * t[k];
          var += d * d;
        }
      }
      double s = 0.0;
      if (var > 1e-12 * static_cast<double>(tn)) s = std::clamp(cross / (std::sqrt(var) * tnorm), -1.0, 1.0);
      map.values[row * static_cast<std::size_t>(map.width) + static_cast<std::size_t>(x)] = s;
    }
  });

  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i] >= threshold) cand.push_back(i);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](auto a, auto b) { return map.values[a] > map.values[b]; });
  for (auto i : cand) {
    const int x = static_cast<int>(i % static_cast<std::size_t>(map.width));
    const int y = static_cast<int>(i / static_cast<std::size_t>(map.width));
    const bool suppressed = std::any_of(out.peaks.begin(), out.peaks.end(), [&](const TemplatePeak& p) {
      return std::abs(p.x - x) < tmpl.width && std::abs(p.y - y) < tmpl.height;
    });
    if (!suppressed) out.peaks.push_back({x, y, map.values[i]});
  }
  return out;
}

GrayRaster score_map_image(const ScoreMap& map) {
  GrayRaster out(map.width, map.height);
  for (std::size_t i = 0; i < map.values.size(); ++i) out.values[i] = std::clamp(0.5 * (map.values[i] + 1.0), 0.0, 1.0);
  return out;
}

}  // namespace brickscan
