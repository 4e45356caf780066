#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "brickscan/geometry.hpp"
#include "brickscan/mesh.hpp"

namespace brickscan {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // need not be unit; t is measured in multiples of dir
  double t_max = INFINITY;
};

struct Hit {
  double t = INFINITY;
  std::uint32_t triangle = 0;
};

/// Per-ray constants of the watertight test (Woop, Benthin, Wald 2013).
class WatertightRay {
 public:
  explicit WatertightRay(const Ray& ray);

  /// Hit parameter in [0, t_max] or nullopt. Edges are inclusive.
  std::optional<double> intersect(Vec3 a, Vec3 b, Vec3 c) const;

  const Ray& ray() const { return ray_; }

 private:
  Ray ray_;
  int kx_ = 0, ky_ = 1, kz_ = 2;
  double sx_ = 0.0, sy_ = 0.0, sz_ = 1.0;
};

/// Nearest hit over every triangle; ties go to the lower triangle index.
/// Test oracle for the accelerated path.
std::optional<Hit> nearest_hit_brute_force(const TriangleMesh& mesh, const Ray& ray);

/// Bounding-volume hierarchy over a mesh. Returns exactly the brute-force
/// answer: both use the same primitive test and tie-breaking.
class RayCaster {
 public:
  explicit RayCaster(const TriangleMesh& mesh);

  std::optional<Hit> nearest(const Ray& ray) const;
  bool occluded(const Ray& ray) const;

  const TriangleMesh& mesh() const { return *mesh_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first primitive; inner: right child
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Aabb>& boxes, std::vector<Vec3>& centroids);

  const TriangleMesh* mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

}  // namespace brickscan
