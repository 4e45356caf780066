#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "brickscan/geometry.hpp"

namespace brickscan {

/// Indexed triangle geometry in millimetres.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;  // empty, or one unit normal per vertex
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }

  /// Appends `other`, re-indexing its triangles. Normals are kept only if
  /// both meshes carry them.
  void append(const TriangleMesh& other);
  void translate(Vec3 offset);
};

Aabb bounds(const TriangleMesh& mesh);
double triangle_area(const TriangleMesh& mesh, std::size_t tri);
Vec3 triangle_normal(const TriangleMesh& mesh, std::size_t tri);

/// Throws InvalidArgument on an index >= vertex count, a triangle with area
/// <= 1e-9 mm^2, or a stored normal whose length is off by more than 1e-6.
void validate(const TriangleMesh& mesh);

/// ASCII OBJ subset: `v`, `vn`, triangular `f` with 1-based indices.
/// Coordinates are written in shortest round-trip form.
std::string write_obj(const TriangleMesh& mesh);
TriangleMesh read_obj(std::string_view text);

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh load_obj(const std::filesystem::path& path);

}  // namespace brickscan
