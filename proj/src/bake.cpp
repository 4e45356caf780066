#include "brickscan/bake.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "brickscan/error.hpp"
#include "brickscan/parallel.hpp"
#include "brickscan/rng.hpp"

namespace brickscan {

int OrthoFrame::cols() const { return static_cast<int>(std::lround(width / pixel_size)); }
int OrthoFrame::rows() const { return static_cast<int>(std::lround(height / pixel_size)); }

Vec3 OrthoFrame::pixel_center(double col, double row) const {
  return origin + right * ((col + 0.5) * pixel_size) + up * (height - (row + 0.5) * pixel_size);
}

Rect OrthoFrame::pixel_to_world(const Rect& px) const {
  const double u0 = dot(origin, right);
  const double v0 = dot(origin, up);
  return {u0 + px.x * pixel_size, v0 + height - (px.y + px.h) * pixel_size, px.w * pixel_size, px.h * pixel_size};
}

Rect OrthoFrame::world_to_pixel(const Rect& mm) const {
  const double u0 = dot(origin, right);
  const double v0 = dot(origin, up);
  return {(mm.x - u0) / pixel_size, (v0 + height - (mm.y + mm.h)) / pixel_size, mm.w / pixel_size,
          mm.h / pixel_size};
}

void OrthoFrame::validate() const {
  if (std::abs(dot(right, up)) > 1e-9 || std::abs(length(right) - 1.0) > 1e-9 || std::abs(length(up) - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "frame axes must be orthonormal");
  }
  if (!(width > 0.0) || !(height > 0.0) || !(pixel_size > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "frame width, height and pixel_size must be > 0");
  }
  if (cols() < 1 || rows() < 1) throw Error(ErrorCode::InvalidArgument, "frame covers less than one pixel");
}

OrthoFrame frame_from_mesh(const TriangleMesh& mesh, double pixel_size, double margin) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "cannot frame an empty mesh");
  if (!(pixel_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel_size must be > 0");
  if (!(margin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "margin must be >= 0");
  const Aabb box = bounds(mesh);
  OrthoFrame frame;
  frame.origin = {box.lo.x - margin, box.lo.y - margin, box.hi.z};
  frame.width = box.hi.x - box.lo.x + 2.0 * margin;
  frame.height = box.hi.y - box.lo.y + 2.0 * margin;
  frame.pixel_size = pixel_size;
  frame.validate();
  return frame;
}

namespace {

Ray pixel_ray(const OrthoFrame& frame, int col, int row) {
  return {frame.pixel_center(col, row), -frame.view(), INFINITY};
}

/// Geometric normal flipped toward the viewer.
Vec3 facing_normal(const TriangleMesh& mesh, std::uint32_t tri, Vec3 view) {
  Vec3 n = triangle_normal(mesh, tri);
  if (dot(n, view) < 0.0) n = -n;
  return n;
}

Rgb encode_normal(Vec3 n, const OrthoFrame& frame) {
  auto enc = [](double c) { return std::clamp(0.5 * (c + 1.0), 0.0, 1.0); };
  return {enc(dot(n, frame.right)), enc(dot(n, frame.up)), enc(dot(n, frame.view()))};
}

template <typename Fn>
void for_each_row(int rows, Fn&& fn) {
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t r) { fn(static_cast<int>(r)); });
}

/// Van der Corput radical inverse in base 2.
double radical_inverse(std::uint32_t bits) {
  bits = (bits << 16u) | (bits >> 16u);
  bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
  bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
  bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
  bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
  return static_cast<double>(bits) * 0x1.0p-32;
}

/// Orthonormal basis around n (Duff et al. 2017).
void basis(Vec3 n, Vec3& t, Vec3& b) {
  const double sign = std::copysign(1.0, n.z);
  const double a = -1.0 / (sign + n.z);
  const double c = n.x * n.y * a;
  t = {1.0 + sign * n.x * n.x * a, sign * c, -sign * n.x};
  b = {c, sign + n.y * n.y * a, -n.y};
}

}  // namespace

GrayRaster bake_height(const RayCaster& caster, const OrthoFrame& frame, double depth_range) {
  frame.validate();
  if (!(depth_range > 0.0)) throw Error(ErrorCode::InvalidArgument, "depth_range must be > 0");
  GrayRaster out(frame.cols(), frame.rows(), 0.0);
  for_each_row(out.height, [&](int row) {
    for (int col = 0; col < out.width; ++col) {
      if (auto hit = caster.nearest(pixel_ray(frame, col, row))) {
        out.at(col, row) = std::clamp(1.0 - hit->t / depth_range, 0.0, 1.0);
      }
    }
  });
  return out;
}

GrayRaster bake_height(const TriangleMesh& mesh, const OrthoFrame& frame, double depth_range) {
  return bake_height(RayCaster(mesh), frame, depth_range);
}

RgbRaster bake_normal(const RayCaster& caster, const OrthoFrame& frame) {
  frame.validate();
  RgbRaster out(frame.cols(), frame.rows(), {0.5, 0.5, 1.0});
  const Vec3 view = frame.view();
  for_each_row(out.height, [&](int row) {
    for (int col = 0; col < out.width; ++col) {
      if (auto hit = caster.nearest(pixel_ray(frame, col, row))) {
        out.at(col, row) = encode_normal(facing_normal(caster.mesh(), hit->triangle, view), frame);
      }
    }
  });
  return out;
}

RgbRaster bake_normal(const TriangleMesh& mesh, const OrthoFrame& frame) { return bake_normal(RayCaster(mesh), frame); }

GrayRaster bake_ao(const RayCaster& caster, const OrthoFrame& frame, int rays_per_pixel, double max_dist,
                   std::uint64_t seed) {
  frame.validate();
  if (rays_per_pixel < 1) throw Error(ErrorCode::InvalidArgument, "rays_per_pixel must be >= 1");
  if (!(max_dist > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_dist must be > 0");
  GrayRaster out(frame.cols(), frame.rows(), 1.0);
  const Vec3 view = frame.view();
  const auto n_rays = static_cast<std::uint32_t>(rays_per_pixel);
  for_each_row(out.height, [&](int row) {
    for (int col = 0; col < out.width; ++col) {
      const Ray primary = pixel_ray(frame, col, row);
      const auto hit = caster.nearest(primary);
      if (!hit) continue;
      const Vec3 n = facing_normal(caster.mesh(), hit->triangle, view);
      const Vec3 p = primary.origin + primary.dir * hit->t + n * 1e-3;
      Vec3 t, b;
      basis(n, t, b);
      CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(row) * out.width + col));
      const double shift_u = rng.uniform();
      const double shift_v = rng.uniform();
      std::uint32_t open = 0;
      for (std::uint32_t k = 0; k < n_rays; ++k) {
        double u = (k + 0.5) / n_rays + shift_u;
        double v = radical_inverse(k) + shift_v;
        u -= std::floor(u);
        v -= std::floor(v);
        const double r = std::sqrt(u);
        const double phi = 2.0 * std::numbers::pi * v;
        const Vec3 dir = t * (r * std::cos(phi)) + b * (r * std::sin(phi)) + n * std::sqrt(std::max(0.0, 1.0 - u));
        if (!caster.occluded({p, dir, max_dist})) ++open;
      }
      out.at(col, row) = static_cast<double>(open) / n_rays;
    }
  });
  return out;
}

GrayRaster bake_ao(const TriangleMesh& mesh, const OrthoFrame& frame, int rays_per_pixel, double max_dist,
                   std::uint64_t seed) {
  return bake_ao(RayCaster(mesh), frame, rays_per_pixel, max_dist, seed);
}

RgbRaster normal_from_height(const GrayRaster& height, double pixel_size, double depth_scale) {
  if (!(pixel_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel_size must be > 0");
  RgbRaster out(height.width, height.height, {0.5, 0.5, 1.0});
  const double k = depth_scale / pixel_size;
  auto diff = [](double lo, double hi, int span) { return (hi - lo) / span; };
  for (int y = 0; y < height.height; ++y) {
    for (int x = 0; x < height.width; ++x) {
      double gx = 0.0, gy_down = 0.0;
      if (height.width > 1) {
        const int x0 = std::max(0, x - 1), x1 = std::min(height.width - 1, x + 1);
        gx = diff(height.at(x0, y), height.at(x1, y), x1 - x0);
      }
      if (height.height > 1) {
        const int y0 = std::max(0, y - 1), y1 = std::min(height.height - 1, y + 1);
        gy_down = diff(height.at(x, y0), height.at(x, y1), y1 - y0);
      }
      const double gy = -gy_down;  // rows grow downward, the up axis does not
      const Vec3 n = normalized({-gx * k, -gy * k, 1.0});
      out.at(x, y) = {std::clamp(0.5 * (n.x + 1.0), 0.0, 1.0), std::clamp(0.5 * (n.y + 1.0), 0.0, 1.0),
                      std::clamp(0.5 * (n.z + 1.0), 0.0, 1.0)};
    }
  }
  return out;
}

double default_curvature_gain(double pixel_size) { return 0.025 * pixel_size * pixel_size; }

GrayRaster curvature_from_height(const GrayRaster& height, double pixel_size, double depth_scale, double gain) {
  if (!(pixel_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel_size must be > 0");
  GrayRaster out(height.width, height.height, 0.5);
  const double scale = depth_scale / (pixel_size * pixel_size);
  auto h = [&](int x, int y) {
    return height.at(std::clamp(x, 0, height.width - 1), std::clamp(y, 0, height.height - 1));
  };
  for (int y = 0; y < height.height; ++y) {
    for (int x = 0; x < height.width; ++x) {
      const double stencil = h(x - 1, y) + h(x + 1, y) + h(x, y - 1) + h(x, y + 1) - 4.0 * h(x, y);
      out.at(x, y) = std::clamp(0.5 - gain * stencil * scale, 0.0, 1.0);
    }
  }
  return out;
}

SurfaceMapSet bake_map_set(const TriangleMesh& mesh, const OrthoFrame& frame, const BakeParams& params) {
  const RayCaster caster(mesh);
  SurfaceMapSet maps;
  maps.frame = frame;
  maps.params = params;
  if (maps.params.gain < 0.0) maps.params.gain = default_curvature_gain(frame.pixel_size);
  maps.height = bake_height(caster, frame, params.depth_range);
  maps.normal = bake_normal(caster, frame);
  maps.ao = bake_ao(caster, frame, params.rays_per_pixel, params.max_dist, params.seed);
  maps.curvature = curvature_from_height(maps.height, frame.pixel_size, params.depth_range, maps.params.gain);
  return maps;
}

}  // namespace brickscan
