#pragma once

#include <cstdint>

#include "brickscan/geometry.hpp"
#include "brickscan/mesh.hpp"
#include "brickscan/raster.hpp"
#include "brickscan/raycast.hpp"

namespace brickscan {

/// Orthographic projection frame. `origin` is the lower-left corner of the
/// projection plane; pixel row 0 is the top edge. Rays start on the plane
/// and travel along -view().
struct OrthoFrame {
  Vec3 origin;
  Vec3 right{1.0, 0.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  double width = 0.0;   // mm
  double height = 0.0;  // mm
  double pixel_size = 1.0;

  Vec3 view() const { return cross(right, up); }
  int cols() const;
  int rows() const;

  /// Point on the projection plane under the centre of pixel (col, row).
  Vec3 pixel_center(double col, double row) const;

  /// Pixel rect <-> plane rect in (right, up) millimetres, measured from the
  /// world origin projected on those axes (wall-front coordinates for the
  /// default axes).
  Rect pixel_to_world(const Rect& px) const;
  Rect world_to_pixel(const Rect& mm) const;

  /// Throws InvalidArgument on non-orthonormal axes or non-positive sizes.
  void validate() const;
  friend bool operator==(const OrthoFrame&, const OrthoFrame&) = default;
};

/// Front-facing frame (looking down -Z) over the XY bounds of the mesh plus
/// `margin` on every side; the plane sits at the mesh's maximum z.
OrthoFrame frame_from_mesh(const TriangleMesh& mesh, double pixel_size, double margin);

/// clamp(1 - distance / depth_range, 0, 1); misses are 0.
GrayRaster bake_height(const RayCaster& caster, const OrthoFrame& frame, double depth_range);
GrayRaster bake_height(const TriangleMesh& mesh, const OrthoFrame& frame, double depth_range);

/// Viewer-facing geometric normal encoded (n + 1) / 2 in the frame basis;
/// misses are (0.5, 0.5, 1.0).
RgbRaster bake_normal(const RayCaster& caster, const OrthoFrame& frame);
RgbRaster bake_normal(const TriangleMesh& mesh, const OrthoFrame& frame);

/// Fraction of cosine-weighted hemisphere rays that escape within max_dist.
/// Misses are 1.0. Each pixel uses a Hammersley set rotated by a per-pixel
/// hash of `seed`.
GrayRaster bake_ao(const RayCaster& caster, const OrthoFrame& frame, int rays_per_pixel, double max_dist,
                   std::uint64_t seed);
GrayRaster bake_ao(const TriangleMesh& mesh, const OrthoFrame& frame, int rays_per_pixel, double max_dist,
                   std::uint64_t seed);

/// Normals from central differences of the metric height field.
RgbRaster normal_from_height(const GrayRaster& height, double pixel_size, double depth_scale);

/// 0.5 - gain * Laplacian(value * depth_scale), clamped. Convex toward the
/// viewer reads above 0.5.
GrayRaster curvature_from_height(const GrayRaster& height, double pixel_size, double depth_scale, double gain);

/// Default curvature gain for a pixel size: 0.025 * pixel_size^2 (mm).
double default_curvature_gain(double pixel_size);

struct BakeParams {
  double depth_range = 60.0;
  int rays_per_pixel = 16;
  double max_dist = 60.0;
  double gain = -1.0;  // < 0 picks default_curvature_gain
  std::uint64_t seed = 0;
};

struct SurfaceMapSet {
  OrthoFrame frame;
  GrayRaster height;
  RgbRaster normal;
  GrayRaster ao;
  GrayRaster curvature;
  BakeParams params;  // with the resolved gain
};

SurfaceMapSet bake_map_set(const TriangleMesh& mesh, const OrthoFrame& frame, const BakeParams& params);

}  // namespace brickscan
