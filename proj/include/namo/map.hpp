#pragma once

#include <string>
#include <vector>

#include "namo/physics.hpp"

namespace namo {

struct Rect {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  bool contains(const Vec2& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
};

struct ChallengingPose {
  Pose2D pose;
  double radius = 0.25;  // positional perturbation radius
};

struct Passage {
  Vec2 center;
  double width = 0.0;
};

struct MapLayout {
  std::string id;  // one of a..i
  Rect room_bounds;
  std::vector<WallSegment> walls;
  Rect robot_spawn_region;
  Rect goal_spawn_region;
  std::vector<ChallengingPose> challenging_poses;
  std::vector<Passage> passages;
};

struct MapValidationError : std::runtime_error {
  std::string field_path;
  MapValidationError(const std::string& path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), field_path(path) {}
};

// Parses and validates a map document (see assets/maps/*.json for the
// schema). Checks the schema, passage widths in [1,2] m, and spawn/goal
// connectivity: the empty map must connect the two regions, and blocking all
// passages must disconnect them.
MapLayout load_map_from_json(const std::string& json_text);
MapLayout load_map_file(const std::string& path);

// The nine maps shipped with the project. a-h are training layouts, i is the
// held-out test layout.
const std::vector<std::string>& builtin_map_ids();
const MapLayout& builtin_map(const std::string& id);

// Cell coverage rule shared by the semantic grid and the validation raster.
bool wall_covers_cell(const WallSegment& w, const Vec2& cell_center, double cell_size);

// Flood-fill helper shared with failure classification: is there a free-cell
// 4-connected path between the two points, with walls (and optionally boxes)
// as obstacles?
bool regions_connected(const MapLayout& map, const Vec2& from, const Vec2& to,
                       const std::vector<RigidBody2D>* boxes = nullptr,
                       const std::vector<uint8_t>* box_present = nullptr,
                       const std::vector<Vec2>* extra_blocks = nullptr,
                       double block_radius = 0.0);

}  // namespace namo
