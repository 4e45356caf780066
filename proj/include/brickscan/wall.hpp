#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "brickscan/geometry.hpp"
#include "brickscan/mesh.hpp"

namespace brickscan {

enum class CellKind : std::uint8_t { Empty, H, V, L };
enum class Orientation : std::uint8_t { H, V };
enum class BrickType : std::uint8_t { Standard, Long };

std::string_view to_string(Orientation o);
std::string_view to_string(BrickType t);
Orientation orientation_from_string(std::string_view s);
BrickType brick_type_from_string(std::string_view s);

/// Brick dimensions and the variation knobs of the generator (millimetres).
struct BrickSpec {
  double face_length = 240.0;
  double face_height = 45.0;
  double depth = 240.0;
  double length_jitter_sd = 2.0;
  double height_jitter_sd = 1.0;
  double depth_jitter_sd = 2.0;
  double damage_amplitude = 1.0;    // max displacement along face normals
  double damage_frequency = 0.05;   // 1/mm
  double chip_probability = 0.1;    // corner chip, only when damage_amplitude > 0
  double long_length_factor = 1.5;  // LONG class
  double long_depth_factor = 1.5;

  /// Zero jitter and zero damage.
  static BrickSpec ideal();
  void validate() const;
};

/// One brick in the pattern grid. H and L extend `span` cells to the right,
/// V extends `span` cells downward.
struct Placement {
  int row = 0;
  int col = 0;
  CellKind kind = CellKind::H;
  int span = 1;
};

struct WallPattern {
  int rows = 0;
  int cols = 0;
  double cell_unit = 60.0;  // grid pitch, face_height + joint
  double joint = 15.0;
  double recess = 12.0;
  std::vector<Placement> placements;  // reading order of their tokens
  std::vector<int> occupancy;         // rows * cols, placement index or -1

  int placement_at(int row, int col) const { return occupancy[static_cast<std::size_t>(row * cols + col)]; }
  CellKind kind_at(int row, int col) const;
  double width_mm() const { return cols * cell_unit; }
  double height_mm() const { return rows * cell_unit; }
};

/// Parses the pattern DSL.
///
/// One grid row per line; tokens are `H`, `Hn`, `V`, `Vn`, `L`, `Ln` and `.`
/// separated by whitespace, where n >= 1 is the span (1 when omitted). H/L
/// tokens count n cells of their row; every other token counts one. Cells
/// covered by a V from an earlier row must be written as `.`. Lines starting
/// with `#` are comments. `@cell_unit`, `@joint` and `@recess` lines set the
/// grid geometry in millimetres.
///
/// Errors: PatternToken (unknown token), PatternShape (ragged rows, empty
/// grid, V running off the bottom), PatternOverlap (a brick starting on a
/// covered cell).
WallPattern parse_pattern(std::string_view text);
WallPattern parse_pattern_file(const std::string& path);

struct Annotation {
  Rect rect;  // wall-front millimetres, y up
  Orientation orientation = Orientation::H;
  BrickType brick_type = BrickType::Standard;
  int brick_id = 0;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct WallModel {
  TriangleMesh mesh;
  std::vector<Annotation> annotations;
  WallPattern pattern;
  std::uint64_t seed = 0;
};

/// A closed box brick, front face at z = 0, centred on the x/y origin, long
/// axis along x. Dimensions are nominal plus clamped Gaussian jitter; with
/// damage enabled every face is subdivided and displaced along its normal by
/// value noise, and a front corner may be chipped off.
TriangleMesh generate_brick(const BrickSpec& spec, std::uint64_t seed);

/// Brick of explicit nominal dimensions; `vertical` rotates it 90 degrees in
/// the wall plane so the long axis runs along y.
TriangleMesh generate_brick(const BrickSpec& spec, double length, double height, double depth, bool vertical,
                            std::uint64_t seed);

/// Builds the wall: one brick per placement (seeded by derive_seed(seed,
/// brick_id)) with fronts at z = 0 and a mortar slab behind them at
/// z = -recess. Throws GridPitchMismatch if the pattern pitch differs from
/// face_height + joint.
WallModel generate_wall(const WallPattern& pattern, const BrickSpec& brick, std::uint64_t seed);

/// Axis-aligned box mesh between two corners, outward-facing, 12 triangles.
TriangleMesh make_box(Vec3 lo, Vec3 hi);

}  // namespace brickscan
