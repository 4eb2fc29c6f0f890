#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "streamscene/categories.hpp"
#include "streamscene/geometry.hpp"

namespace streamscene {

// Scene descriptions are line-oriented:
//
//   line  := ident "=" ctor "(" args ")"
//   ctor  := "Wall" | "Door" | "Window" | "Bbox"
//   args  := value ("," value)*
//   value := number | bare-word
//
// Field order follows the detector's reference dataclasses:
//   Wall(ax, ay, az, bx, by, bz, height, thickness)
//   Door(wall_id, position_x, position_y, position_z, width, height)
//   Window(wall_id, position_x, position_y, position_z, width, height)
//   Bbox(class, position_x, position_y, position_z, angle_z, scale_x, scale_y, scale_z)
//
// Numeric fields are stored as written; UnitConfig says how many meters (or
// radians) one written unit is worth.

struct UnitConfig {
  double meters_per_unit = 1.0;
  double radians_per_unit = 1.0;

  static UnitConfig meters_radians() { return {}; }
  static UnitConfig centimeters_degrees();
  static UnitConfig centimeters_radians() { return {0.01, 1.0}; }
  static UnitConfig meters_degrees();
  bool operator==(const UnitConfig&) const = default;
};

struct WallRec {
  std::string id;
  double ax = 0, ay = 0, az = 0, bx = 0, by = 0, bz = 0;
  double height = 0, thickness = 0;
  bool operator==(const WallRec&) const = default;
};

struct DoorRec {
  std::string id;
  std::string wall_id;
  double position_x = 0, position_y = 0, position_z = 0;
  double width = 0, height = 0;
  bool operator==(const DoorRec&) const = default;
};

struct WindowRec {
  std::string id;
  std::string wall_id;
  double position_x = 0, position_y = 0, position_z = 0;
  double width = 0, height = 0;
  bool operator==(const WindowRec&) const = default;
};

struct BboxRec {
  std::string id;
  std::string label;
  double position_x = 0, position_y = 0, position_z = 0;
  double angle_z = 0;
  double scale_x = 0, scale_y = 0, scale_z = 0;
  bool operator==(const BboxRec&) const = default;
};

using SceneRecord = std::variant<WallRec, DoorRec, WindowRec, BboxRec>;

const std::string& record_id(const SceneRecord& rec);

struct SceneDescription {
  std::vector<SceneRecord> records;
  UnitConfig units;

  std::size_t bbox_count() const;
};

struct ParseDiagnostic {
  std::size_t line = 0;    // 1-based
  std::size_t column = 0;  // 1-based
  std::string message;
};

struct ParseOptions {
  UnitConfig units;
  // Strict: throw ParseError on the first bad line and require door/window
  // wall ids to reference a wall defined earlier.
  bool strict = false;
};

struct ParseResult {
  SceneDescription description;
  std::vector<ParseDiagnostic> diagnostics;
  std::size_t nonblank_lines = 0;
};

ParseResult parse_scene_description(std::string_view text, const ParseOptions& options = {});

// Canonical text: one record per line in stored order, numbers with six
// decimals, LF line endings, trailing newline after each record.
std::string serialize(const SceneDescription& desc);

// The description as it reads back after serialization (numbers rounded to
// six decimals).
SceneDescription normalize(const SceneDescription& desc);

struct BoxConversion {
  std::vector<OrientedBox3> boxes;
  std::size_t dropped = 0;  // Bbox records whose label is not in the set
};

// Converts Bbox records whose label is in `categories` (case-insensitive) to
// meters/radians. Labels are emitted in the vocabulary's canonical spelling.
BoxConversion to_boxes(const SceneDescription& desc, const CategoryVocabulary& categories);

// Inverse of to_boxes for detector output: boxes become Bbox records named
// bbox_0, bbox_1, ... in meters/radians.
SceneDescription boxes_to_description(std::span<const OrientedBox3> boxes);

}  // namespace streamscene
