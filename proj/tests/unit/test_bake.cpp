#include <cmath>
#include <numbers>
#include <vector>

#include "brickscan/bake.hpp"
#include "brickscan/raycast.hpp"
#include "brickscan/rng.hpp"
#include "brickscan/wall.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace brickscan;

namespace {

/// Square plane of side 2*half through the origin, tilted by theta about the
/// up axis, facing +z.
TriangleMesh tilted_plane(double half, double theta) {
  const double t = std::tan(theta);
  TriangleMesh m;
  m.vertices = {{-half, -half, half * t}, {half, -half, -half * t}, {half, half, -half * t}, {-half, half, half * t}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

TriangleMesh random_mesh(std::uint64_t seed, int n) {
  CounterRng rng(seed);
  TriangleMesh m;
  for (int i = 0; i < n; ++i) {
    const Vec3 c{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(-40, 0)};
    for (int k = 0; k < 3; ++k) {
      m.vertices.push_back(c + Vec3{rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(-10, 10)});
    }
    const auto b = static_cast<std::uint32_t>(3 * i);
    m.triangles.push_back({b, b + 1, b + 2});
  }
  return m;
}

/// Independent Moller-Trumbore test.
std::optional<double> moller_trumbore(const Ray& r, Vec3 a, Vec3 b, Vec3 c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = cross(r.dir, e2);
  const double det = dot(e1, p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = r.origin - a;
  const double u = dot(s, p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = cross(s, e1);
  const double v = dot(r.dir, q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = dot(e2, q) * inv;
  if (t < 0.0 || t > r.t_max) return std::nullopt;
  return t;
}

}  // namespace

TEST_CASE("frame_from_mesh: extents and margin") {
  const TriangleMesh box = make_box({0, 0, -1}, {1, 1, 0});
  const OrthoFrame f0 = frame_from_mesh(box, 0.1, 0.0);
  CHECK(f0.width == 1.0);
  CHECK(f0.height == 1.0);
  const OrthoFrame f10 = frame_from_mesh(box, 0.1, 10.0);
  CHECK(f10.width == doctest::Approx(f0.width + 20.0));
  CHECK(f10.height == doctest::Approx(f0.height + 20.0));
  CHECK(error_code_of([] { frame_from_mesh(TriangleMesh{}, 1.0, 0.0); }) == ErrorCode::EmptyMesh);
}

TEST_CASE("frame_from_mesh: raster dims of the held-out wall at 2 mm") {
  const WallModel w = generate_wall(parse_pattern_file(source_path("data/patterns/harput_44c.txt")), BrickSpec{}, 7);
  const Aabb b = bounds(w.mesh);
  const OrthoFrame f = frame_from_mesh(w.mesh, 2.0, 30.0);
  CHECK(f.cols() == static_cast<int>(std::ceil((b.hi.x - b.lo.x + 60.0) / 2.0 - 1e-9)));
  CHECK(f.rows() == static_cast<int>(std::ceil((b.hi.y - b.lo.y + 60.0) / 2.0 - 1e-9)));
}

TEST_CASE("OrthoFrame: pixel/world rect round trip, row 0 on top") {
  OrthoFrame f;
  f.origin = {-10, -20, 0};
  f.width = 100;
  f.height = 50;
  f.pixel_size = 2;
  const Rect mm{0, 0, 20, 10};
  const Rect px = f.world_to_pixel(mm);
  CHECK(px.x == doctest::Approx(5.0));
  CHECK(px.y == doctest::Approx(25.0 - 10.0 - 5.0));
  const Rect back = f.pixel_to_world(px);
  CHECK(back.x == doctest::Approx(mm.x));
  CHECK(back.y == doctest::Approx(mm.y));
  CHECK(back.w == doctest::Approx(mm.w));
  CHECK(back.h == doctest::Approx(mm.h));
}

TEST_CASE("RayCaster equals brute force on random meshes") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const TriangleMesh m = random_mesh(s, 200);
    const RayCaster caster(m);
    CounterRng rng(s + 100);
    for (int i = 0; i < 500; ++i) {
      const Ray r{{rng.uniform(-10, 110), rng.uniform(-10, 110), 20.0},
                  {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), -1.0}};
      const auto a = caster.nearest(r);
      const auto b = nearest_hit_brute_force(m, r);
      REQUIRE(a.has_value() == b.has_value());
      if (a) {
        CHECK(a->t == b->t);
        CHECK(a->triangle == b->triangle);
      }
    }
  }
}

TEST_CASE("watertight test agrees with Moller-Trumbore away from edges") {
  CounterRng rng(9);
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 0)};
    const Vec3 b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 0)};
    const Vec3 c{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 0)};
    const Ray r{{rng.uniform(-1, 1), rng.uniform(-1, 1), 1.0}, {0, 0, -1}};
    const auto w = WatertightRay(r).intersect(a, b, c);
    const auto mt = moller_trumbore(r, a, b, c);
    // Skip rays within 1e-9 of an edge, where either answer is valid.
    auto edge_dist = [&](Vec3 p, Vec3 q) {
      const double ex = q.x - p.x, ey = q.y - p.y;
      return std::abs(ex * (r.origin.y - p.y) - ey * (r.origin.x - p.x)) / std::hypot(ex, ey);
    };
    if (std::min({edge_dist(a, b), edge_dist(b, c), edge_dist(c, a)}) < 1e-9) continue;
    ++compared;
    REQUIRE(w.has_value() == mt.has_value());
    if (w) CHECK(*w == doctest::Approx(*mt).epsilon(1e-9));
  }
  CHECK(compared > 1900);
}

TEST_CASE("watertight: shared edge is hit exactly once or more, never missed") {
  // Two triangles sharing the diagonal of a square; rays on the diagonal.
  const Vec3 p0{0, 0, 0}, p1{1, 0, 0}, p2{1, 1, 0}, p3{0, 1, 0};
  for (int i = 1; i < 100; ++i) {
    const double u = i / 100.0;
    const Ray r{{u, u, 1.0}, {0, 0, -1}};
    const WatertightRay w(r);
    CHECK((w.intersect(p0, p1, p2).has_value() || w.intersect(p0, p2, p3).has_value()));
  }
}

TEST_CASE("bake_height: brick at 0, mortar at recess 12, range 60") {
  const WallModel w = generate_wall(parse_pattern("H H"), BrickSpec::ideal(), 0);
  const OrthoFrame f = frame_from_mesh(w.mesh, 5.0, 0.0);
  const GrayRaster h = bake_height(w.mesh, f, 60.0);
  for (const auto& a : w.annotations) {
    const Rect px = f.world_to_pixel(a.rect);
    CHECK(h.at(static_cast<int>(px.cx()), static_cast<int>(px.cy())) == doctest::Approx(1.0));
  }
  // Joint between the two bricks.
  const Rect joint = f.world_to_pixel({w.annotations[0].rect.right(), w.annotations[0].rect.y, 15.0, 45.0});
  CHECK(h.at(static_cast<int>(joint.cx()), static_cast<int>(joint.cy())) == doctest::Approx(0.8));
}

TEST_CASE("bake_height: overlapping boxes record the nearer one") {
  TriangleMesh m = make_box({0, 0, -30}, {60, 60, -20});
  m.append(make_box({20, 20, -10}, {40, 40, 0}));
  const OrthoFrame f = frame_from_mesh(m, 2.0, 4.0);
  const GrayRaster h = bake_height(m, f, 60.0);
  for (int row = 0; row < f.rows(); ++row) {
    for (int col = 0; col < f.cols(); ++col) {
      const auto hit = nearest_hit_brute_force(m, {f.pixel_center(col, row), -f.view(), INFINITY});
      const double want = hit ? std::clamp(1.0 - hit->t / 60.0, 0.0, 1.0) : 0.0;
      REQUIRE(h.at(col, row) == want);
    }
  }
  CHECK(h.at(f.cols() / 2, f.rows() / 2) == doctest::Approx(1.0));
}

TEST_CASE("flat plane: AO, curvature and normal") {
  const TriangleMesh plane = tilted_plane(50, 0.0);
  const OrthoFrame f = frame_from_mesh(plane, 2.0, 0.0);
  BakeParams p;
  p.rays_per_pixel = 32;
  p.seed = 5;
  const SurfaceMapSet maps = bake_map_set(plane, f, p);
  for (std::size_t i = 0; i < maps.ao.values.size(); ++i) {
    REQUIRE(std::abs(maps.ao.values[i] - 1.0) <= 1e-6);
    REQUIRE(maps.curvature.values[i] == 0.5);
    REQUIRE(std::abs(maps.normal.values[i][0] - 0.5) <= 1e-6);
    REQUIRE(std::abs(maps.normal.values[i][1] - 0.5) <= 1e-6);
    REQUIRE(std::abs(maps.normal.values[i][2] - 1.0) <= 1e-6);
  }
}

TEST_CASE("bake_normal: 45 degree ramp") {
  const double s = std::sqrt(0.5);
  for (double sign : {1.0, -1.0}) {
    const TriangleMesh m = tilted_plane(50, sign * std::numbers::pi / 4);
    const RgbRaster n = bake_normal(m, frame_from_mesh(m, 2.0, 0.0));
    const Rgb& c = n.at(n.width / 2, n.height / 2);
    CHECK(std::abs(c[0] - (0.5 + sign * 0.5 * s)) <= 1e-3);
    CHECK(std::abs(c[1] - 0.5) <= 1e-3);
    CHECK(std::abs(c[2] - (0.5 + 0.5 * s)) <= 1e-3);
  }
}

TEST_CASE("bake_normal: tilt recovery up to 30 degrees") {
  for (int deg = 0; deg <= 30; deg += 5) {
    const double theta = deg * std::numbers::pi / 180.0;
    const TriangleMesh m = tilted_plane(50, theta);
    const RgbRaster n = bake_normal(m, frame_from_mesh(m, 2.0, 0.0));
    const double nz = 2.0 * n.at(n.width / 2, n.height / 2)[2] - 1.0;
    CHECK(std::abs(std::acos(std::clamp(nz, -1.0, 1.0)) * 180.0 / std::numbers::pi - deg) <= 0.5);
  }
}

TEST_CASE("normal_from_height: constant and ramp") {
  GrayRaster flat(16, 16, 0.4);
  for (const auto& c : normal_from_height(flat, 1.0, 10.0).values) {
    CHECK(c[0] == 0.5);
    CHECK(c[1] == 0.5);
    CHECK(c[2] == 1.0);
  }
  // Height rises by 0.3 mm per mm along x (value 0.03 per px, depth_scale 10, px 1 mm).
  GrayRaster ramp(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) ramp.at(x, y) = 0.03 * x;
  const RgbRaster n = normal_from_height(ramp, 1.0, 10.0);
  const Vec3 want = normalized({-0.3, 0.0, 1.0});
  for (int y = 1; y < 15; ++y) {
    for (int x = 1; x < 15; ++x) {
      CHECK(std::abs(n.at(x, y)[0] - 0.5 * (want.x + 1)) <= 1e-6);
      CHECK(std::abs(n.at(x, y)[1] - 0.5) <= 1e-6);
      CHECK(std::abs(n.at(x, y)[2] - 0.5 * (want.z + 1)) <= 1e-6);
    }
  }
}

TEST_CASE("normal_from_height: mirror symmetry flips red") {
  GrayRaster h(21, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 21; ++x) h.at(x, y) = 0.5 + 0.4 * std::cos((x - 10) * 0.3);
  const RgbRaster n = normal_from_height(h, 1.0, 5.0);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 21; ++x) CHECK(n.at(x, y)[0] - 0.5 == doctest::Approx(0.5 - n.at(20 - x, y)[0]));
}

TEST_CASE("curvature_from_height: constant and hemisphere") {
  for (double v : curvature_from_height(GrayRaster(8, 8, 0.7), 1.0, 20.0, 0.05).values) CHECK(v == 0.5);

  // Height sqrt(R^2 - r^2); Laplacian at the centre is -2 / R.
  const double R = 200.0, ps = 1.0, depth = 400.0, gain = 2.0;
  GrayRaster h(41, 41);
  for (int y = 0; y < 41; ++y)
    for (int x = 0; x < 41; ++x) h.at(x, y) = std::sqrt(R * R - (x - 20.0) * (x - 20.0) - (y - 20.0) * (y - 20.0)) / depth;
  const GrayRaster c = curvature_from_height(h, ps, depth, gain);
  const double centre = 0.5 + gain * 2.0 / R;  // convex reads above 0.5
  CHECK(c.at(20, 20) == doctest::Approx(centre).epsilon(0.05));
  for (int y = 15; y <= 25; ++y)
    for (int x = 15; x <= 25; ++x) CHECK(std::abs(c.at(x, y) - c.at(20, 20)) <= 0.05 * (c.at(20, 20) - 0.5));
}

TEST_CASE("bake_ao: deeper well is darker at its floor") {
  auto well = [](double depth) {
    TriangleMesh m = make_box({-60, -60, -depth - 10}, {60, 60, -depth});
    m.append(make_box({-60, -60, -depth}, {-10, 60, 0}));
    m.append(make_box({10, -60, -depth}, {60, 60, 0}));
    m.append(make_box({-10, -60, -depth}, {10, -10, 0}));
    m.append(make_box({-10, 10, -depth}, {10, 60, 0}));
    return m;
  };
  const TriangleMesh deep = well(20.0), shallow = well(5.0);
  OrthoFrame f = frame_from_mesh(deep, 2.0, 0.0);
  const GrayRaster a_deep = bake_ao(deep, f, 128, 200.0, 1);
  f = frame_from_mesh(shallow, 2.0, 0.0);
  const GrayRaster a_shallow = bake_ao(shallow, f, 128, 200.0, 1);
  CHECK(a_deep.at(a_deep.width / 2, a_deep.height / 2) < a_shallow.at(a_shallow.width / 2, a_shallow.height / 2));
}

TEST_CASE("generated wall: joints darker in AO, bands flank brick edges in curvature") {
  const WallModel w = generate_wall(parse_pattern("H4 H4\nH4 H4"), BrickSpec::ideal(), 1);
  const OrthoFrame f = frame_from_mesh(w.mesh, 2.5, 0.0);
  BakeParams p;
  p.seed = 3;
  const SurfaceMapSet maps = bake_map_set(w.mesh, f, p);
  CHECK(maps.height.width == maps.ao.width);
  CHECK(maps.normal.width == maps.curvature.width);
  CHECK(maps.height.height == maps.ao.height);
  const Rect a = f.world_to_pixel(w.annotations[0].rect);
  const int cy = static_cast<int>(a.cy());
  const int face_x = static_cast<int>(a.cx());
  const int joint_x = static_cast<int>(a.right() + 1.5);
  CHECK(maps.ao.at(joint_x, cy) < maps.ao.at(face_x, cy));
  // Brick edge: convex rim inside, concave foot outside.
  const int edge_out = static_cast<int>(std::ceil(a.right() - 0.5)), edge_in = edge_out - 1;
  CHECK(maps.curvature.at(edge_in, cy) > 0.5);
  CHECK(maps.curvature.at(edge_out, cy) < 0.5);
  const SurfaceMapSet again = bake_map_set(w.mesh, f, p);
  CHECK(again.ao == maps.ao);
}

TEST_CASE("bake_map_set: baked and height-derived normals agree on a damage-free wall") {
  const WallModel w = generate_wall(parse_pattern("H4 H4 H4\nH2 H4 H4 H2"), BrickSpec::ideal(), 1);
  const OrthoFrame f = frame_from_mesh(w.mesh, 2.5, 0.0);
  BakeParams p;
  const SurfaceMapSet maps = bake_map_set(w.mesh, f, p);
  const RgbRaster derived = normal_from_height(maps.height, f.pixel_size, p.depth_range);
  // Away from silhouettes: pixels whose 3x3 neighbourhood has one height.
  double ss = 0.0;
  int n = 0;
  for (int y = 1; y + 1 < maps.height.height; ++y) {
    for (int x = 1; x + 1 < maps.height.width; ++x) {
      bool flat = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) flat = flat && maps.height.at(x + dx, y + dy) == maps.height.at(x, y);
      if (!flat) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = maps.normal.at(x, y)[static_cast<std::size_t>(c)] - derived.at(x, y)[static_cast<std::size_t>(c)];
        ss += d * d;
      }
      n += 3;
    }
  }
  REQUIRE(n > 0);
  CHECK(std::sqrt(ss / n) <= 0.02);
}
