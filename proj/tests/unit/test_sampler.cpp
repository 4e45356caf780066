#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "brickscan/sampler.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace brickscan;
using json = nlohmann::json;

namespace {

OrthoFrame test_frame(double w = 1000.0, double h = 400.0) {
  OrthoFrame f;
  f.width = w;
  f.height = h;
  f.pixel_size = 5.0;
  return f;
}

GrayRaster noise_map(const OrthoFrame& f, std::uint64_t seed) {
  GrayRaster m(f.cols(), f.rows());
  CounterRng rng(seed);
  for (auto& v : m.values) v = rng.uniform();
  return m;
}

std::vector<Annotation> brick_grid(const Rect& extent) {
  std::vector<Annotation> out;
  int id = 0;
  for (double y = extent.y + 20; y + 45 <= extent.bottom() - 20; y += 100) {
    for (double x = extent.x + 20; x + 225 <= extent.right() - 20; x += 300) {
      out.push_back({{x, y, 225, 45}, Orientation::H, BrickType::Standard, id++});
    }
  }
  return out;
}

Rect map_extent(const OrthoFrame& f) {
  return f.pixel_to_world({0.0, 0.0, static_cast<double>(f.cols()), static_cast<double>(f.rows())});
}

}  // namespace

TEST_CASE("generate_negatives: every crop stays below max_iou") {
  const OrthoFrame f = test_frame();
  const auto ann = brick_grid(map_extent(f));
  REQUIRE(ann.size() >= 6);
  const Dataset ds = generate_negatives(300, ann, noise_map(f, 1), f, NegativeParams{}, SampleRender{}, 5);
  REQUIRE(ds.images.size() == 300);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(ds.images[i].width == 48);
    CHECK(ds.images[i].height == 12);
    const auto& e = ds.manifest.entries[i];
    CHECK(e.label == SampleLabel::Negative);
    for (const auto& a : ann) CHECK(iou(e.provenance.source_rect, a.rect) < 0.2);
  }
}

TEST_CASE("generate_negatives: single-brick wall yields 4 crops") {
  const OrthoFrame f = test_frame(600, 200);
  const Rect ext = map_extent(f);
  const std::vector<Annotation> one{{{ext.x + 200, ext.y + 80, 225, 45}, Orientation::H, BrickType::Standard, 0}};
  const Dataset ds = generate_negatives(4, one, noise_map(f, 2), f, NegativeParams{}, SampleRender{}, 9);
  CHECK(ds.manifest.count(SampleLabel::Negative) == 4);
}

TEST_CASE("generate_negatives: all-mortar wall places crops uniformly") {
  const OrthoFrame f = test_frame();
  const Rect ext = map_extent(f);
  const int n = 1600;
  const Dataset ds = generate_negatives(n, {}, GrayRaster(f.cols(), f.rows(), 0.4), f, NegativeParams{}, SampleRender{}, 11);
  std::vector<int> hist(16, 0);
  for (const auto& e : ds.manifest.entries) {
    const Rect& r = e.provenance.source_rect;
    const double u = (r.x - ext.x) / (ext.w - r.w), v = (r.y - ext.y) / (ext.h - r.h);
    REQUIRE(u >= 0.0);
    REQUIRE(u <= 1.0);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
    ++hist[static_cast<std::size_t>(std::min(3, int(u * 4)) * 4 + std::min(3, int(v * 4)))];
  }
  double chi2 = 0.0;
  for (int c : hist) chi2 += (c - n / 16.0) * (c - n / 16.0) / (n / 16.0);
  CHECK(chi2 < 37.7);  // 15 dof, p = 0.001
}

TEST_CASE("generate_negatives: exhausted pools") {
  const OrthoFrame f = test_frame(300, 100);
  const Rect ext = map_extent(f);
  const std::vector<Annotation> full{{ext, Orientation::H, BrickType::Standard, 0}};
  NegativeParams p;
  p.scale_min = p.scale_max = 1.0;
  CHECK(error_code_of([&] { generate_negatives(2, full, noise_map(f, 3), f, p, SampleRender{}, 1); }) ==
        ErrorCode::NegativePoolExhausted);
  p.scale_min = p.scale_max = 2.0;
  CHECK(error_code_of([&] { generate_negatives(2, {}, noise_map(f, 3), f, p, SampleRender{}, 1); }) ==
        ErrorCode::NegativePoolExhausted);
}

TEST_CASE("generate_negatives: deterministic per seed") {
  const OrthoFrame f = test_frame();
  const auto ann = brick_grid(map_extent(f));
  const GrayRaster map = noise_map(f, 4);
  const Dataset a = generate_negatives(50, ann, map, f, NegativeParams{}, SampleRender{}, 3);
  const Dataset b = generate_negatives(50, ann, map, f, NegativeParams{}, SampleRender{}, 3);
  const Dataset c = generate_negatives(50, ann, map, f, NegativeParams{}, SampleRender{}, 4);
  CHECK(a.manifest == b.manifest);
  CHECK(a.images == b.images);
  CHECK(a.manifest != c.manifest);
}

TEST_CASE("ScanWindowSampler: windows avoid annotations") {
  const OrthoFrame f = test_frame();
  const auto ann = brick_grid(map_extent(f));
  const ScanWindowSampler s(ann, noise_map(f, 5), f, 0.4, 48, 12, 1.25, 1.0, 6);
  REQUIRE(s.size() > 100);
  for (std::size_t i = 0; i < s.size(); i += 7) {
    const RectI& w = s.window(i);
    const Rect mm = f.pixel_to_world({double(w.x), double(w.y), double(w.w), double(w.h)});
    for (const auto& a : ann) CHECK(iou(mm, a.rect) < 0.4);
  }
  const auto draw = s.as_draw();
  const auto first = draw(0);
  REQUIRE(first.has_value());
  CHECK(first->width == 48);
  CHECK(first->height == 12);
  CHECK(!draw(s.size()).has_value());
}

TEST_CASE("positive_crop_rect: dilation and aspect") {
  const Rect r = positive_crop_rect({0, 0, 200, 50}, 0.1, 48, 12, false);
  CHECK(r.w == doctest::Approx(220.0));
  CHECK(r.h == doctest::Approx(55.0));
  CHECK(r.cx() == doctest::Approx(100.0));
  CHECK(r.cy() == doctest::Approx(25.0));
  const Rect v = positive_crop_rect({0, 0, 50, 100}, 0.0, 48, 12, true);
  CHECK(v.w == doctest::Approx(50.0));
  CHECK(v.h == doctest::Approx(200.0));
}

TEST_CASE("generate_positives_in_situ: 400 distinct, deterministic, near the brick") {
  const OrthoFrame f = test_frame();
  const auto ann = brick_grid(map_extent(f));
  const GrayRaster map = noise_map(f, 6);
  const SampleRender render;
  const Dataset a = generate_positives_in_situ(400, ann, map, f, PositiveVariation{}, render, 12);
  const Dataset b = generate_positives_in_situ(400, ann, map, f, PositiveVariation{}, render, 12);
  CHECK(a.manifest == b.manifest);
  CHECK(a.images == b.images);
  std::set<std::vector<double>> distinct;
  for (const auto& img : a.images) distinct.insert(img.values);
  CHECK(distinct.size() == 400);
  for (const auto& e : a.manifest.entries) {
    CHECK(e.label == SampleLabel::Positive);
    CHECK(e.provenance.generator == "in-situ");
    double best = 0.0;
    for (const auto& an : ann) best = std::max(best, iou(e.provenance.source_rect, positive_crop_rect(an.rect, render.dilation, 48, 12, false)));
    CHECK(best >= 0.8);
  }
}

TEST_CASE("generate_positives: single-brick renders") {
  SampleRender render;
  render.bake.rays_per_pixel = 4;
  const Dataset a = generate_positives(6, BrickSpec{}, PositiveVariation{}, render, 1);
  const Dataset b = generate_positives(6, BrickSpec{}, PositiveVariation{}, render, 1);
  REQUIRE(a.images.size() == 6);
  CHECK(a.images == b.images);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i].width == 48);
    CHECK(a.images[i].height == 12);
    CHECK(a.manifest.entries[i].provenance.generator == "single-brick");
    CHECK(a.manifest.entries[i].provenance.params.count("scale") == 1);
  }
  CHECK(a.images[0] != a.images[1]);
}

TEST_CASE("manifest: JSON round trip and schema errors") {
  const OrthoFrame f = test_frame();
  const auto ann = brick_grid(map_extent(f));
  const GrayRaster map = noise_map(f, 7);
  Dataset ds = merge(generate_positives_in_situ(5, ann, map, f, PositiveVariation{}, SampleRender{}, 1),
                     generate_negatives(7, ann, map, f, NegativeParams{}, SampleRender{}, 2));
  for (std::size_t i = 0; i < ds.manifest.entries.size(); ++i) ds.manifest.entries[i].path = "s" + std::to_string(i) + ".png";
  const std::string text = manifest_to_json(ds.manifest);
  CHECK(manifest_from_json(text) == ds.manifest);
  CHECK(ds.manifest.count(SampleLabel::Positive) == 5);
  CHECK(ds.manifest.count(SampleLabel::Negative) == 7);

  auto mutated = [&](auto&& edit) {
    json j = json::parse(text);
    edit(j);
    return error_code_of([&] { manifest_from_json(j.dump()); });
  };
  CHECK(mutated([](json& j) { j["extra"] = 1; }) == ErrorCode::ManifestSchema);
  CHECK(mutated([](json& j) { j["entries"][0]["provenance"]["colour"] = "red"; }) == ErrorCode::ManifestSchema);
  CHECK(mutated([](json& j) { j.erase("seed"); }) == ErrorCode::ManifestSchema);
  CHECK(mutated([](json& j) { j["counts"]["positive"] = 6; }) == ErrorCode::ManifestSchema);
  CHECK(mutated([](json& j) { j["entries"][1]["path"] = j["entries"][0]["path"]; }) == ErrorCode::ManifestSchema);
  CHECK(mutated([](json& j) { j["entries"][0]["label"] = "maybe"; }) == ErrorCode::ManifestSchema);
  CHECK(mutated([](json& j) { j["format"] = "brickscan-dataset-v0"; }) == ErrorCode::FormatMismatch);
  CHECK(error_code_of([] { manifest_from_json("{"); }) == ErrorCode::ManifestSchema);
}

TEST_CASE("dataset: write and load are lossless at 16 bits") {
  const OrthoFrame f = test_frame();
  const auto ann = brick_grid(map_extent(f));
  const GrayRaster map = noise_map(f, 8);
  Dataset ds = merge(generate_positives_in_situ(3, ann, map, f, PositiveVariation{}, SampleRender{}, 1),
                     generate_negatives(4, ann, map, f, NegativeParams{}, SampleRender{}, 2));
  const auto dir = scratch_dir("dataset_roundtrip");
  write_dataset(ds, dir);
  const Dataset back = load_dataset(dir / "manifest.json");
  CHECK(back.manifest == ds.manifest);
  REQUIRE(back.images.size() == ds.images.size());
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    REQUIRE(back.images[i].values.size() == ds.images[i].values.size());
    for (std::size_t k = 0; k < ds.images[i].values.size(); ++k)
      CHECK(std::abs(back.images[i].values[k] - ds.images[i].values[k]) <= 0.5 / 65535.0 + 1e-12);
  }
}

TEST_CASE("modality names") {
  for (Modality m : {Modality::Height, Modality::NormalR, Modality::NormalG, Modality::AO, Modality::Curvature})
    CHECK(modality_from_string(to_string(m)) == m);
  CHECK(error_code_of([] { modality_from_string("colour"); }) == ErrorCode::InvalidArgument);
}
