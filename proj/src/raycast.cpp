#include "brickscan/raycast.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace brickscan {

WatertightRay::WatertightRay(const Ray& ray) : ray_(ray) {
  const Vec3 d = ray.dir;
  const std::array<double, 3> ad{std::abs(d.x), std::abs(d.y), std::abs(d.z)};
  kz_ = static_cast<int>(std::max_element(ad.begin(), ad.end()) - ad.begin());
  kx_ = (kz_ + 1) % 3;
  ky_ = (kx_ + 1) % 3;
  if (d[kz_] < 0.0) std::swap(kx_, ky_);  // keep winding independent of direction
  sx_ = d[kx_] / d[kz_];
  sy_ = d[ky_] / d[kz_];
  sz_ = 1.0 / d[kz_];
}

std::optional<double> WatertightRay::intersect(Vec3 a, Vec3 b, Vec3 c) const {
  const Vec3 o = ray_.origin;
  const Vec3 A = a - o, B = b - o, C = c - o;
  const double ax = A[kx_] - sx_ * A[kz_], ay = A[ky_] - sy_ * A[kz_];
  const double bx = B[kx_] - sx_ * B[kz_], by = B[ky_] - sy_ * B[kz_];
  const double cx = C[kx_] - sx_ * C[kz_], cy = C[ky_] - sy_ * C[kz_];
  const double u = cx * by - cy * bx;
  const double v = ax * cy - ay * cx;
  const double w = bx * ay - by * ax;
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return std::nullopt;
  const double det = u + v + w;
  if (det == 0.0) return std::nullopt;
  const double az = sz_ * A[kz_], bz = sz_ * B[kz_], cz = sz_ * C[kz_];
  const double t_scaled = u * az + v * bz + w * cz;
  const double t = t_scaled / det;
  if (!(t >= 0.0) || t > ray_.t_max) return std::nullopt;
  return t;
}

namespace {

bool better(double t, std::uint32_t tri, const Hit& best) {
  return t < best.t || (t == best.t && tri < best.triangle);
}

/// Slab test; boxes are padded at build time so this stays conservative.
bool box_hit(const Aabb& box, const Ray& ray, const Vec3& inv, double t_limit) {
  double t0 = 0.0, t1 = t_limit;
  for (int a = 0; a < 3; ++a) {
    if (ray.dir[a] == 0.0) {
      if (ray.origin[a] < box.lo[a] || ray.origin[a] > box.hi[a]) return false;
      continue;
    }
    double tn = (box.lo[a] - ray.origin[a]) * inv[a];
    double tf = (box.hi[a] - ray.origin[a]) * inv[a];
    if (tn > tf) std::swap(tn, tf);
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

std::optional<Hit> nearest_hit_brute_force(const TriangleMesh& mesh, const Ray& ray) {
  const WatertightRay wr(ray);
  Hit best;
  bool found = false;
  for (std::uint32_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    if (auto hit = wr.intersect(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])) {
      if (!found || better(*hit, i, best)) {
        best = {*hit, i};
        found = true;
      }
    }
  }
  return found ? std::optional<Hit>(best) : std::nullopt;
}

RayCaster::RayCaster(const TriangleMesh& mesh) : mesh_(&mesh) {
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (auto v : mesh.triangles[i]) boxes[i].expand(mesh.vertices[v]);
    centroids[i] = boxes[i].center();
  }
  if (n > 0) {
    nodes_.reserve(2 * n);
    build(0, n, boxes, centroids);
  }
}

std::uint32_t RayCaster::build(std::uint32_t begin, std::uint32_t end, std::vector<Aabb>& boxes,
                               std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Aabb box, cbox;
  for (auto i = begin; i < end; ++i) {
    box.expand(boxes[order_[i]]);
    cbox.expand(centroids[order_[i]]);
  }
  // Relative padding keeps the slab test conservative under rounding.
  const Vec3 ext = box.extent();
  const double pad = 1e-9 * (1.0 + std::max({std::abs(box.lo.x), std::abs(box.lo.y), std::abs(box.lo.z),
                                             std::abs(box.hi.x), std::abs(box.hi.y), std::abs(box.hi.z),
                                             ext.x, ext.y, ext.z}));
  box.lo = box.lo - Vec3{pad, pad, pad};
  box.hi = box.hi + Vec3{pad, pad, pad};
  nodes_[index].box = box;

  const std::uint32_t count = end - begin;
  const Vec3 cext = cbox.extent();
  const int axis = (cext.x >= cext.y && cext.x >= cext.z) ? 0 : (cext.y >= cext.z ? 1 : 2);
  if (count <= 4 || cext[axis] <= 0.0) {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  }
  const std::uint32_t mid = begin + count / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis], cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  build(begin, mid, boxes, centroids);
  const std::uint32_t right = build(mid, end, boxes, centroids);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

std::optional<Hit> RayCaster::nearest(const Ray& ray) const {
  if (nodes_.empty()) return std::nullopt;
  const WatertightRay wr(ray);
  const Vec3 inv{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
  Hit best;
  bool found = false;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!box_hit(node.box, ray, inv, found ? best.t : ray.t_max)) continue;
    if (node.count > 0) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
        const std::uint32_t tri = order_[k];
        const auto& t = mesh_->triangles[tri];
        if (auto hit = wr.intersect(mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]])) {
          if (!found || better(*hit, tri, best)) {
            best = {*hit, tri};
            found = true;
          }
        }
      }
    } else {
      const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
      stack[top++] = node.first;
      stack[top++] = self + 1;
    }
  }
  return found ? std::optional<Hit>(best) : std::nullopt;
}

bool RayCaster::occluded(const Ray& ray) const {
  if (nodes_.empty()) return false;
  const WatertightRay wr(ray);
  const Vec3 inv{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!box_hit(node.box, ray, inv, ray.t_max)) continue;
    if (node.count > 0) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
        const auto& t = mesh_->triangles[order_[k]];
        if (wr.intersect(mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]])) return true;
      }
    } else {
      const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
      stack[top++] = node.first;
      stack[top++] = self + 1;
    }
  }
  return false;
}

}  // namespace brickscan
