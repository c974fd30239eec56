#include "namo/map.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace namo {

using nlohmann::json;

namespace {

constexpr int kGrid = 48;

struct BuiltinDoc {
  const char* id;
  const char* text;
};

const BuiltinDoc kBuiltinDocs[] = {
#include "builtin_maps.inc"
};

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw MapValidationError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw MapValidationError(path, "non-finite value");
  return v;
}

Rect parse_rect(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) {
    throw MapValidationError(path, "expected [xmin, ymin, xmax, ymax]");
  }
  Rect r{require_number(j[0], path + "[0]"), require_number(j[1], path + "[1]"),
         require_number(j[2], path + "[2]"), require_number(j[3], path + "[3]")};
  if (r.xmax <= r.xmin || r.ymax <= r.ymin) {
    throw MapValidationError(path, "degenerate rectangle");
  }
  return r;
}

struct Raster {
  Rect bounds;
  double cell;
  std::array<uint8_t, kGrid * kGrid> blocked{};

  int index_of(const Vec2& p) const {
    int ix = static_cast<int>((p.x - bounds.xmin) / cell);
    int iy = static_cast<int>((p.y - bounds.ymin) / cell);
    ix = std::min(std::max(ix, 0), kGrid - 1);
    iy = std::min(std::max(iy, 0), kGrid - 1);
    return iy * kGrid + ix;
  }
  Vec2 center(int ix, int iy) const {
    return {bounds.xmin + (ix + 0.5) * cell, bounds.ymin + (iy + 0.5) * cell};
  }
};

Raster rasterize_obstacles(const MapLayout& map,
                           const std::vector<RigidBody2D>* boxes,
                           const std::vector<uint8_t>* box_present,
                           const std::vector<Vec2>* blocks, double block_half) {
  Raster r;
  r.bounds = map.room_bounds;
  r.cell = map.room_bounds.width() / kGrid;
  for (int iy = 0; iy < kGrid; ++iy) {
    for (int ix = 0; ix < kGrid; ++ix) {
      Vec2 c = r.center(ix, iy);
      bool hit = false;
      for (const WallSegment& w : map.walls) {
        if (wall_covers_cell(w, c, r.cell)) {
          hit = true;
          break;
        }
      }
      if (!hit && boxes) {
        for (size_t b = 0; b < boxes->size(); ++b) {
          if (box_present && !(*box_present)[b]) continue;
          if (point_in_body((*boxes)[b], c)) {
            hit = true;
            break;
          }
        }
      }
      if (!hit && blocks) {
        for (const Vec2& q : *blocks) {
          if (std::abs(c.x - q.x) <= block_half && std::abs(c.y - q.y) <= block_half) {
            hit = true;
            break;
          }
        }
      }
      r.blocked[iy * kGrid + ix] = hit ? 1 : 0;
    }
  }
  return r;
}

bool flood_reaches(const Raster& r, int from, int to) {
  if (r.blocked[to]) return false;
  std::array<uint8_t, kGrid* kGrid> seen{};
  std::deque<int> queue{from};
  seen[from] = 1;
  while (!queue.empty()) {
    int cur = queue.front();
    queue.pop_front();
    if (cur == to) return true;
    int ix = cur % kGrid, iy = cur / kGrid;
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      int nx = ix + dx[d], ny = iy + dy[d];
      if (nx < 0 || ny < 0 || nx >= kGrid || ny >= kGrid) continue;
      int n = ny * kGrid + nx;
      if (!seen[n] && !r.blocked[n]) {
        seen[n] = 1;
        queue.push_back(n);
      }
    }
  }
  return false;
}

void validate(const MapLayout& map) {
  const Rect& b = map.room_bounds;
  if (b.width() < 5.0 || b.width() > 7.0 || b.height() < 5.0 || b.height() > 7.0) {
    throw MapValidationError("bounds", "room must be about 6x6 m");
  }
  auto check_inside = [&](const Vec2& p, const std::string& path) {
    if (!b.contains(p)) throw MapValidationError(path, "outside room bounds");
  };
  for (size_t i = 0; i < map.walls.size(); ++i) {
    std::string path = "walls[" + std::to_string(i) + "]";
    check_inside(map.walls[i].a, path);
    check_inside(map.walls[i].b, path);
    if ((map.walls[i].b - map.walls[i].a).norm() < 1e-6) {
      throw MapValidationError(path, "zero-length segment");
    }
  }
  auto check_region = [&](const Rect& r, const std::string& path) {
    check_inside({r.xmin, r.ymin}, path);
    check_inside({r.xmax, r.ymax}, path);
  };
  check_region(map.robot_spawn_region, "robot_spawn");
  check_region(map.goal_spawn_region, "goal_spawn");
  for (size_t i = 0; i < map.challenging_poses.size(); ++i) {
    std::string path = "challenging_poses[" + std::to_string(i) + "]";
    check_inside(map.challenging_poses[i].pose.position(), path);
    if (map.challenging_poses[i].radius < 0.0) {
      throw MapValidationError(path + "[3]", "negative perturbation radius");
    }
  }
  if (map.passages.empty()) {
    throw MapValidationError("passages", "at least one passage required");
  }
  for (size_t i = 0; i < map.passages.size(); ++i) {
    std::string path = "passages[" + std::to_string(i) + "]";
    check_inside(map.passages[i].center, path);
    if (map.passages[i].width < 1.0 || map.passages[i].width > 2.0) {
      throw MapValidationError(path + "[2]", "passage width must lie in [1, 2] m");
    }
  }

  Vec2 robot_center{0.5 * (map.robot_spawn_region.xmin + map.robot_spawn_region.xmax),
                    0.5 * (map.robot_spawn_region.ymin + map.robot_spawn_region.ymax)};
  Vec2 goal_center{0.5 * (map.goal_spawn_region.xmin + map.goal_spawn_region.xmax),
                   0.5 * (map.goal_spawn_region.ymin + map.goal_spawn_region.ymax)};
  if (!regions_connected(map, robot_center, goal_center)) {
    throw MapValidationError("robot_spawn", "disconnected from goal_spawn on the empty map");
  }
  // Opposite-sides check: sealing every passage must separate the regions.
  std::vector<Vec2> blocks;
  double widest = 0.0;
  for (const Passage& p : map.passages) {
    blocks.push_back(p.center);
    widest = std::max(widest, p.width);
  }
  if (regions_connected(map, robot_center, goal_center, nullptr, nullptr, &blocks,
                        0.5 * widest + 0.2)) {
    throw MapValidationError("passages", "spawn regions stay connected with all passages blocked");
  }
}

}  // namespace

bool wall_covers_cell(const WallSegment& w, const Vec2& cell_center, double cell_size) {
  double inflate = w.radius() + cell_size * 0.70710678;
  return segment_point_distance(w.a, w.b, cell_center) <= inflate;
}

MapLayout load_map_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw MapValidationError("(document)", e.what());
  }
  if (!doc.is_object()) throw MapValidationError("(document)", "expected an object");

  static const std::array<const char*, 7> allowed = {
      "id", "bounds", "walls", "robot_spawn", "goal_spawn", "challenging_poses", "passages"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known |= it.key() == k;
    if (!known) throw MapValidationError(it.key(), "unknown key");
  }
  for (const char* k : allowed) {
    if (!doc.contains(k)) throw MapValidationError(k, "missing key");
  }

  MapLayout map;
  if (!doc["id"].is_string()) throw MapValidationError("id", "expected a string");
  map.id = doc["id"].get<std::string>();
  if (map.id.empty()) throw MapValidationError("id", "empty id");
  map.room_bounds = parse_rect(doc["bounds"], "bounds");

  if (!doc["walls"].is_array()) throw MapValidationError("walls", "expected an array");
  for (size_t i = 0; i < doc["walls"].size(); ++i) {
    const json& w = doc["walls"][i];
    std::string path = "walls[" + std::to_string(i) + "]";
    if (!w.is_array() || w.size() != 4) {
      throw MapValidationError(path, "expected [x1, y1, x2, y2]");
    }
    WallSegment seg;
    seg.a = {require_number(w[0], path + "[0]"), require_number(w[1], path + "[1]")};
    seg.b = {require_number(w[2], path + "[2]"), require_number(w[3], path + "[3]")};
    map.walls.push_back(seg);
  }

  map.robot_spawn_region = parse_rect(doc["robot_spawn"], "robot_spawn");
  map.goal_spawn_region = parse_rect(doc["goal_spawn"], "goal_spawn");

  if (!doc["challenging_poses"].is_array()) {
    throw MapValidationError("challenging_poses", "expected an array");
  }
  for (size_t i = 0; i < doc["challenging_poses"].size(); ++i) {
    const json& c = doc["challenging_poses"][i];
    std::string path = "challenging_poses[" + std::to_string(i) + "]";
    if (!c.is_array() || c.size() != 4) {
      throw MapValidationError(path, "expected [x, y, theta, radius]");
    }
    ChallengingPose cp;
    cp.pose = {require_number(c[0], path + "[0]"), require_number(c[1], path + "[1]"),
               wrap_angle(require_number(c[2], path + "[2]"))};
    cp.radius = require_number(c[3], path + "[3]");
    map.challenging_poses.push_back(cp);
  }

  if (!doc["passages"].is_array()) throw MapValidationError("passages", "expected an array");
  for (size_t i = 0; i < doc["passages"].size(); ++i) {
    const json& p = doc["passages"][i];
    std::string path = "passages[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 3) {
      throw MapValidationError(path, "expected [cx, cy, width]");
    }
    Passage pass;
    pass.center = {require_number(p[0], path + "[0]"), require_number(p[1], path + "[1]")};
    pass.width = require_number(p[2], path + "[2]");
    map.passages.push_back(pass);
  }

  validate(map);
  return map;
}

MapLayout load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MapValidationError("(document)", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_map_from_json(ss.str());
}

const std::vector<std::string>& builtin_map_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const BuiltinDoc& d : kBuiltinDocs) v.push_back(d.id);
    return v;
  }();
  return ids;
}

const MapLayout& builtin_map(const std::string& id) {
  static const std::map<std::string, MapLayout> maps = [] {
    std::map<std::string, MapLayout> m;
    for (const BuiltinDoc& d : kBuiltinDocs) m[d.id] = load_map_from_json(d.text);
    return m;
  }();
  auto it = maps.find(id);
  if (it == maps.end()) throw ContractViolation("unknown map id: " + id);
  return it->second;
}

bool regions_connected(const MapLayout& map, const Vec2& from, const Vec2& to,
                       const std::vector<RigidBody2D>* boxes,
                       const std::vector<uint8_t>* box_present,
                       const std::vector<Vec2>* extra_blocks, double block_radius) {
  Raster r = rasterize_obstacles(map, boxes, box_present, extra_blocks, block_radius);
  int start = r.index_of(from);
  r.blocked[start] = 0;  // the querying body stands here
  return flood_reaches(r, start, r.index_of(to));
}

}  // namespace namo
