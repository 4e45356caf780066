#include "brickscan/mesh.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "brickscan/error.hpp"
#include "brickscan/io.hpp"

namespace brickscan {

void TriangleMesh::append(const TriangleMesh& other) {
  const bool keep_normals = (normals.size() == vertices.size() || vertices.empty()) &&
                            other.normals.size() == other.vertices.size() && !other.vertices.empty();
  const auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  if (keep_normals) {
    normals.insert(normals.end(), other.normals.begin(), other.normals.end());
  } else {
    normals.clear();
  }
  triangles.reserve(triangles.size() + other.triangles.size());
  for (const auto& t : other.triangles) triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

void TriangleMesh::translate(Vec3 offset) {
  for (auto& v : vertices) v = v + offset;
}

Aabb bounds(const TriangleMesh& mesh) {
  Aabb box;
  for (const auto& v : mesh.vertices) box.expand(v);
  return box;
}

double triangle_area(const TriangleMesh& mesh, std::size_t tri) {
  const auto& t = mesh.triangles[tri];
  const Vec3 a = mesh.vertices[t[0]];
  return 0.5 * length(cross(mesh.vertices[t[1]] - a, mesh.vertices[t[2]] - a));
}

Vec3 triangle_normal(const TriangleMesh& mesh, std::size_t tri) {
  const auto& t = mesh.triangles[tri];
  const Vec3 a = mesh.vertices[t[0]];
  return normalized(cross(mesh.vertices[t[1]] - a, mesh.vertices[t[2]] - a));
}

void validate(const TriangleMesh& mesh) {
  const auto n = mesh.vertices.size();
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (auto idx : mesh.triangles[i]) {
      if (idx >= n) {
        throw Error(ErrorCode::InvalidArgument, "triangle " + std::to_string(i) + " index out of range");
      }
    }
    if (!(triangle_area(mesh, i) > 1e-9)) {
      throw Error(ErrorCode::InvalidArgument, "triangle " + std::to_string(i) + " is degenerate");
    }
  }
  if (!mesh.normals.empty()) {
    if (mesh.normals.size() != n) throw Error(ErrorCode::InvalidArgument, "normal count != vertex count");
    for (const auto& nv : mesh.normals) {
      if (std::abs(length(nv) - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "normal not unit length");
    }
  }
}

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) parts.push_back(s.substr(start, i - start));
  }
  return parts;
}

double parse_double(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::ObjSyntax, "line " + std::to_string(line_no) + ": bad number '" + std::string(token) + "'");
  }
  return value;
}

long parse_index(std::string_view token, std::size_t line_no) {
  // v, v/vt, v//vn, v/vt/vn: only the position index matters.
  const auto slash = token.find('/');
  const auto head = token.substr(0, slash);
  long value = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc{} || ptr != head.data() + head.size() || head.empty()) {
    throw Error(ErrorCode::ObjSyntax, "line " + std::to_string(line_no) + ": bad face index '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

std::string write_obj(const TriangleMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  out += "# brickscan mesh\n";
  for (const auto& v : mesh.vertices) {
    out += "v ";
    append_number(out, v.x);
    out += ' ';
    append_number(out, v.y);
    out += ' ';
    append_number(out, v.z);
    out += '\n';
  }
  const bool with_normals = !mesh.normals.empty() && mesh.normals.size() == mesh.vertices.size();
  if (with_normals) {
    for (const auto& n : mesh.normals) {
      out += "vn ";
      append_number(out, n.x);
      out += ' ';
      append_number(out, n.y);
      out += ' ';
      append_number(out, n.z);
      out += '\n';
    }
  }
  for (const auto& t : mesh.triangles) {
    out += 'f';
    for (auto idx : t) {
      out += ' ';
      const auto s = std::to_string(idx + 1);
      out += s;
      if (with_normals) {
        out += "//";
        out += s;
      }
    }
    out += '\n';
  }
  return out;
}

TriangleMesh read_obj(std::string_view text) {
  TriangleMesh mesh;
  std::vector<Vec3> normals;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto line = trim(text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto parts = split_ws(line);
    const auto tag = parts.front();
    if (tag == "v" || tag == "vn") {
      // A trailing w / colour component is tolerated on `v` lines.
      if (parts.size() < 4 || (tag == "vn" && parts.size() != 4) || parts.size() > 7) {
        throw Error(ErrorCode::ObjSyntax, "line " + std::to_string(line_no) + ": expected 3 coordinates");
      }
      const Vec3 p{parse_double(parts[1], line_no), parse_double(parts[2], line_no), parse_double(parts[3], line_no)};
      (tag == "v" ? mesh.vertices : normals).push_back(p);
    } else if (tag == "f") {
      if (parts.size() != 4) {
        throw Error(ErrorCode::ObjFace, "line " + std::to_string(line_no) + ": face with " +
                                            std::to_string(parts.size() - 1) + " vertices");
      }
      std::array<std::uint32_t, 3> tri{};
      for (int k = 0; k < 3; ++k) {
        const long idx = parse_index(parts[k + 1], line_no);
        if (idx < 1 || static_cast<std::size_t>(idx) > mesh.vertices.size()) {
          throw Error(ErrorCode::ObjIndex, "line " + std::to_string(line_no) + ": index " + std::to_string(idx));
        }
        tri[k] = static_cast<std::uint32_t>(idx - 1);
      }
      mesh.triangles.push_back(tri);
    } else if (tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" || tag == "mtllib" ||
               tag == "l" || tag == "vp") {
      continue;
    } else {
      throw Error(ErrorCode::ObjSyntax, "line " + std::to_string(line_no) + ": unknown record '" + std::string(tag) + "'");
    }
  }
  if (normals.size() == mesh.vertices.size()) mesh.normals = std::move(normals);
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  write_text_file(path, write_obj(mesh));
}

TriangleMesh load_obj(const std::filesystem::path& path) { return read_obj(read_text_file(path)); }

}  // namespace brickscan
