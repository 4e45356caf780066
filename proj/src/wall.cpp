#include "brickscan/wall.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "brickscan/error.hpp"
#include "brickscan/io.hpp"
#include "brickscan/rng.hpp"

namespace brickscan {

std::string_view to_string(Orientation o) { return o == Orientation::H ? "H" : "V"; }
std::string_view to_string(BrickType t) { return t == BrickType::Standard ? "STANDARD" : "LONG"; }

Orientation orientation_from_string(std::string_view s) {
  if (s == "H") return Orientation::H;
  if (s == "V") return Orientation::V;
  throw Error(ErrorCode::InvalidArgument, "orientation must be H or V, got '" + std::string(s) + "'");
}

BrickType brick_type_from_string(std::string_view s) {
  if (s == "STANDARD") return BrickType::Standard;
  if (s == "LONG") return BrickType::Long;
  throw Error(ErrorCode::InvalidArgument, "brick type must be STANDARD or LONG, got '" + std::string(s) + "'");
}

BrickSpec BrickSpec::ideal() {
  BrickSpec spec;
  spec.length_jitter_sd = spec.height_jitter_sd = spec.depth_jitter_sd = 0.0;
  spec.damage_amplitude = 0.0;
  return spec;
}

void BrickSpec::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, std::string("BrickSpec: ") + what);
  };
  require(face_length > 0 && face_height > 0 && depth > 0, "nominal dimensions must be > 0");
  require(length_jitter_sd >= 0 && length_jitter_sd < face_length / 4, "length_jitter_sd out of [0, face_length/4)");
  require(height_jitter_sd >= 0 && height_jitter_sd < face_height / 4, "height_jitter_sd out of [0, face_height/4)");
  require(depth_jitter_sd >= 0 && depth_jitter_sd < depth / 4, "depth_jitter_sd out of [0, depth/4)");
  require(damage_amplitude >= 0, "damage_amplitude must be >= 0");
  require(damage_frequency > 0, "damage_frequency must be > 0");
  require(chip_probability >= 0 && chip_probability <= 1, "chip_probability out of [0, 1]");
  require(long_length_factor > 0 && long_depth_factor > 0, "LONG factors must be > 0");
}

CellKind WallPattern::kind_at(int row, int col) const {
  const int idx = placement_at(row, col);
  return idx < 0 ? CellKind::Empty : placements[static_cast<std::size_t>(idx)].kind;
}

// ---------------------------------------------------------------------------
// Pattern DSL

namespace {

std::vector<std::string_view> tokens_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const auto start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double directive_value(std::string_view token, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !(v >= 0.0)) {
    throw Error(ErrorCode::PatternToken, "line " + std::to_string(line_no) + ": bad directive value '" +
                                             std::string(token) + "'");
  }
  return v;
}

struct Token {
  CellKind kind = CellKind::Empty;
  int span = 1;
};

Token parse_token(std::string_view tok, std::size_t line_no) {
  auto bad = [&] {
    return Error(ErrorCode::PatternToken, "line " + std::to_string(line_no) + ": unknown token '" + std::string(tok) + "'");
  };
  if (tok == ".") return {CellKind::Empty, 1};
  Token t;
  switch (tok.front()) {
    case 'H': t.kind = CellKind::H; break;
    case 'V': t.kind = CellKind::V; break;
    case 'L': t.kind = CellKind::L; break;
    default: throw bad();
  }
  if (tok.size() > 1) {
    const auto digits = tok.substr(1);
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) throw bad();
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), t.span);
    if (ec != std::errc{} || t.span < 1) throw bad();
  }
  return t;
}

}  // namespace

WallPattern parse_pattern(std::string_view text) {
  WallPattern pattern;
  std::vector<std::vector<Token>> rows;
  std::vector<std::size_t> row_lines;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    const auto toks = tokens_of(line);
    if (toks.empty() || toks.front().front() == '#') continue;
    if (toks.front().front() == '@') {
      if (toks.size() != 2) {
        throw Error(ErrorCode::PatternToken, "line " + std::to_string(line_no) + ": directive needs one value");
      }
      const double v = directive_value(toks[1], line_no);
      if (toks[0] == "@cell_unit") {
        pattern.cell_unit = v;
      } else if (toks[0] == "@joint") {
        pattern.joint = v;
      } else if (toks[0] == "@recess") {
        pattern.recess = v;
      } else {
        throw Error(ErrorCode::PatternToken, "line " + std::to_string(line_no) + ": unknown directive '" +
                                                 std::string(toks[0]) + "'");
      }
      continue;
    }
    std::vector<Token> row;
    for (const auto tok : toks) {
      if (tok.front() == '#') break;  // trailing comment
      row.push_back(parse_token(tok, line_no));
    }
    rows.push_back(std::move(row));
    row_lines.push_back(line_no);
  }

  if (rows.empty()) throw Error(ErrorCode::PatternShape, "pattern has no rows");
  if (!(pattern.joint > 0.0)) throw Error(ErrorCode::PatternShape, "joint must be > 0");
  if (!(pattern.cell_unit > pattern.joint)) throw Error(ErrorCode::PatternShape, "cell_unit must exceed joint");

  auto width_of = [](const std::vector<Token>& row) {
    int w = 0;
    for (const auto& t : row) w += (t.kind == CellKind::H || t.kind == CellKind::L) ? t.span : 1;
    return w;
  };
  pattern.rows = static_cast<int>(rows.size());
  pattern.cols = width_of(rows.front());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (width_of(rows[r]) != pattern.cols) {
      throw Error(ErrorCode::PatternShape, "line " + std::to_string(row_lines[r]) + ": row has " +
                                               std::to_string(width_of(rows[r])) + " cells, expected " +
                                               std::to_string(pattern.cols));
    }
  }
  if (pattern.cols == 0) throw Error(ErrorCode::PatternShape, "pattern has no columns");

  pattern.occupancy.assign(static_cast<std::size_t>(pattern.rows * pattern.cols), -1);
  auto claim = [&](int r, int c, int id, std::size_t line) {
    auto& cell = pattern.occupancy[static_cast<std::size_t>(r * pattern.cols + c)];
    if (cell >= 0) {
      throw Error(ErrorCode::PatternOverlap, "line " + std::to_string(line) + ": cell (" + std::to_string(r) + ", " +
                                                 std::to_string(c) + ") already occupied by brick " +
                                                 std::to_string(cell));
    }
    cell = id;
  };

  for (int r = 0; r < pattern.rows; ++r) {
    int c = 0;
    for (const auto& t : rows[static_cast<std::size_t>(r)]) {
      if (t.kind == CellKind::Empty) {
        ++c;
        continue;
      }
      const int id = static_cast<int>(pattern.placements.size());
      const auto line = row_lines[static_cast<std::size_t>(r)];
      if (t.kind == CellKind::V) {
        if (r + t.span > pattern.rows) {
          throw Error(ErrorCode::PatternShape, "line " + std::to_string(line) + ": V" + std::to_string(t.span) +
                                                   " runs past the last row");
        }
        for (int k = 0; k < t.span; ++k) claim(r + k, c, id, line);
        pattern.placements.push_back({r, c, t.kind, t.span});
        ++c;
      } else {
        for (int k = 0; k < t.span; ++k) claim(r, c + k, id, line);
        pattern.placements.push_back({r, c, t.kind, t.span});
        c += t.span;
      }
    }
  }
  return pattern;
}

WallPattern parse_pattern_file(const std::string& path) { return parse_pattern(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Geometry

TriangleMesh make_box(Vec3 lo, Vec3 hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back({(i & 1) ? hi.x : lo.x, (i & 2) ? hi.y : lo.y, (i & 4) ? hi.z : lo.z});
  }
  // Quads wound counter-clockwise seen from outside.
  const std::array<std::array<std::uint32_t, 4>, 6> quads{{
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
  }};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

namespace {

double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint64_t key) {
  std::uint64_t h = key;
  h = mix64(h ^ (static_cast<std::uint64_t>(ix) * 0x8CB92BA72F3D8DD7ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(iy) * 0xA24BAED4963EE407ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(iz) * 0x9FB21C651E98DF25ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

/// Trilinear value noise with smoothstep weights, range [-1, 1].
double value_noise(Vec3 p, std::uint64_t key) {
  const double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy), iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(p.x - fx), ty = smooth(p.y - fy), tz = smooth(p.z - fz);
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
    acc += w * lattice_value(ix + dx, iy + dy, iz + dz, key);
  }
  return acc;
}

double clamped_jitter(CounterRng& rng, double sd) {
  const double g = rng.gaussian();
  return sd * std::clamp(g, -3.0, 3.0);
}

/// Surface lattice of a box with (nx, ny, nz) segments per axis, shared
/// vertices along edges so the result is closed.
TriangleMesh lattice_box(Vec3 lo, Vec3 hi, std::array<int, 3> n, std::vector<std::array<int, 3>>& lattice_ids) {
  TriangleMesh m;
  const int sx = n[0] + 1, sy = n[1] + 1, sz = n[2] + 1;
  std::vector<std::int32_t> index(static_cast<std::size_t>(sx * sy * sz), -1);
  auto vid = [&](int i, int j, int k) -> std::uint32_t {
    auto& slot = index[static_cast<std::size_t>((k * sy + j) * sx + i)];
    if (slot < 0) {
      slot = static_cast<std::int32_t>(m.vertices.size());
      m.vertices.push_back({lo.x + (hi.x - lo.x) * i / n[0], lo.y + (hi.y - lo.y) * j / n[1],
                            lo.z + (hi.z - lo.z) * k / n[2]});
      lattice_ids.push_back({i, j, k});
    }
    return static_cast<std::uint32_t>(slot);
  };
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int fixed = side ? n[axis] : 0;
      for (int a = 0; a < n[u]; ++a) {
        for (int b = 0; b < n[v]; ++b) {
          auto corner = [&](int da, int db) {
            std::array<int, 3> ijk{};
            ijk[axis] = fixed;
            ijk[u] = a + da;
            ijk[v] = b + db;
            return vid(ijk[0], ijk[1], ijk[2]);
          };
          const auto p00 = corner(0, 0), p10 = corner(1, 0), p11 = corner(1, 1), p01 = corner(0, 1);
          if (side) {
            m.triangles.push_back({p00, p10, p11});
            m.triangles.push_back({p00, p11, p01});
          } else {
            m.triangles.push_back({p00, p11, p10});
            m.triangles.push_back({p00, p01, p11});
          }
        }
      }
    }
  }
  return m;
}

bool mesh_is_sound(const TriangleMesh& m, const std::vector<Vec3>& reference_normals) {
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    if (!(triangle_area(m, t) > 1e-9)) return false;
    if (dot(triangle_normal(m, t), reference_normals[t]) <= 0.0) return false;
  }
  return true;
}

}  // namespace

TriangleMesh generate_brick(const BrickSpec& spec, double length, double height, double depth, bool vertical,
                            std::uint64_t seed) {
  spec.validate();
  CounterRng rng(seed);
  const double len = length + clamped_jitter(rng, spec.length_jitter_sd);
  const double hgt = height + clamped_jitter(rng, spec.height_jitter_sd);
  const double dep = depth + clamped_jitter(rng, spec.depth_jitter_sd);
  const std::uint64_t noise_key = rng.next_u64();
  const bool damaged = spec.damage_amplitude > 0.0;

  std::array<int, 3> segments{1, 1, 1};
  if (damaged) {
    const std::array<double, 3> dims{len, hgt, dep};
    for (int a = 0; a < 3; ++a) {
      segments[a] = std::max(1, static_cast<int>(std::ceil(dims[a] * spec.damage_frequency - 1e-9)));
    }
  }
  const Vec3 lo{-0.5 * len, -0.5 * hgt, -dep};
  const Vec3 hi{0.5 * len, 0.5 * hgt, 0.0};
  std::vector<std::array<int, 3>> ids;
  TriangleMesh mesh = lattice_box(lo, hi, segments, ids);

  if (damaged) {
    std::vector<Vec3> reference(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) reference[t] = triangle_normal(mesh, t);

    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      Vec3 dir{};
      for (int a = 0; a < 3; ++a) {
        if (ids[i][a] == 0) dir[a] = -1.0;
        if (ids[i][a] == segments[a]) dir[a] = 1.0;
      }
      const Vec3 p = mesh.vertices[i];
      const double d = spec.damage_amplitude * value_noise(p * spec.damage_frequency, noise_key);
      mesh.vertices[i] = p + normalized(dir) * d;
    }

    if (rng.uniform() < spec.chip_probability) {
      // Cut a tetrahedron off one front corner: vertices inside the plane
      // a/sx + b/sy + c/sz = 1 (corner-local inward distances) move onto it.
      const auto corner = rng.below(4);
      const Vec3 origin{(corner & 1) ? hi.x : lo.x, (corner & 2) ? hi.y : lo.y, 0.0};
      const Vec3 inward{(corner & 1) ? -1.0 : 1.0, (corner & 2) ? -1.0 : 1.0, -1.0};
      const double base = 0.4 * std::min({len, hgt, dep});
      const Vec3 size{base * rng.uniform(0.5, 1.0), base * rng.uniform(0.5, 1.0), base * rng.uniform(0.5, 1.0)};
      const Vec3 inv{1.0 / size.x, 1.0 / size.y, 1.0 / size.z};
      TriangleMesh chipped = mesh;
      for (auto& vtx : chipped.vertices) {
        const Vec3 local{(vtx.x - origin.x) * inward.x, (vtx.y - origin.y) * inward.y, (vtx.z - origin.z) * inward.z};
        const double s = dot(local, inv);
        const double slack = -spec.damage_amplitude - 1e-9;
        if (s < 1.0 && local.x >= slack && local.y >= slack && local.z >= slack) {
          const double t = (1.0 - s) / dot(inv, inv);
          const Vec3 moved = local + inv * t;
          vtx = {origin.x + moved.x * inward.x, origin.y + moved.y * inward.y, origin.z + moved.z * inward.z};
        }
      }
      // A chip that would fold or collapse a triangle is skipped.
      if (mesh_is_sound(chipped, reference)) mesh = std::move(chipped);
    }
  }

  if (vertical) {
    for (auto& v : mesh.vertices) v = {-v.y, v.x, v.z};
  }
  return mesh;
}

TriangleMesh generate_brick(const BrickSpec& spec, std::uint64_t seed) {
  return generate_brick(spec, spec.face_length, spec.face_height, spec.depth, false, seed);
}

WallModel generate_wall(const WallPattern& pattern, const BrickSpec& brick, std::uint64_t seed) {
  brick.validate();
  const double pitch = brick.face_height + pattern.joint;
  if (std::abs(pattern.cell_unit - pitch) > 1e-9 * std::max(1.0, pitch)) {
    std::ostringstream msg;
    msg << "pattern cell_unit " << pattern.cell_unit << " mm != face_height + joint = " << pitch << " mm";
    throw Error(ErrorCode::GridPitchMismatch, msg.str());
  }

  WallModel wall;
  wall.pattern = pattern;
  wall.seed = seed;
  const double p = pattern.cell_unit;
  const double half_joint = 0.5 * pattern.joint;

  for (std::size_t id = 0; id < pattern.placements.size(); ++id) {
    const auto& pl = pattern.placements[id];
    const double long_side = pl.span * p - pattern.joint;
    const double short_side = p - pattern.joint;
    Annotation ann;
    ann.brick_id = static_cast<int>(id);
    ann.brick_type = pl.kind == CellKind::L ? BrickType::Long : BrickType::Standard;
    if (pl.kind == CellKind::V) {
      ann.orientation = Orientation::V;
      ann.rect = {pl.col * p + half_joint, (pattern.rows - pl.row - pl.span) * p + half_joint, short_side, long_side};
    } else {
      ann.orientation = Orientation::H;
      ann.rect = {pl.col * p + half_joint, (pattern.rows - pl.row - 1) * p + half_joint, long_side, short_side};
    }
    const double depth = brick.depth * (pl.kind == CellKind::L ? brick.long_depth_factor : 1.0);
    TriangleMesh b = generate_brick(brick, long_side, short_side, depth, pl.kind == CellKind::V,
                                    derive_seed(seed, id));
    b.translate({ann.rect.cx(), ann.rect.cy(), 0.0});
    wall.mesh.append(b);
    wall.annotations.push_back(ann);
  }

  const double slab_back = -pattern.recess - brick.depth;
  wall.mesh.append(make_box({0.0, 0.0, slab_back}, {pattern.width_mm(), pattern.height_mm(), -pattern.recess}));
  return wall;
}

}  // namespace brickscan
