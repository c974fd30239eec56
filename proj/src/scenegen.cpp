#include "namo/scenegen.hpp"

#include <algorithm>
#include <cmath>

namespace namo {
namespace {

constexpr int kBoxAttempts = 50;
constexpr int kRobotAttempts = 200;
constexpr double kSpawnMargin = 0.01;
constexpr double kChallengingRotJitter = kPi / 6.0;  // +-30 deg

bool placement_free(const RigidBody2D& candidate, const WorldState& world,
                    bool against_robot) {
  for (const WallSegment& w : world.walls) {
    if (body_wall_overlap(candidate, w, kSpawnMargin)) return false;
  }
  for (size_t i = 0; i < world.boxes.size(); ++i) {
    if (!world.box_present[i]) continue;
    if (bodies_overlap(candidate, world.boxes[i], kSpawnMargin)) return false;
  }
  if (against_robot && bodies_overlap(candidate, world.robot, kSpawnMargin)) return false;
  return true;
}

Pose2D random_pose_in(const Rect& r, double margin, Rng& rng) {
  return {rng.uniform(r.xmin + margin, r.xmax - margin),
          rng.uniform(r.ymin + margin, r.ymax - margin),
          wrap_angle(rng.uniform(-kPi, kPi))};
}

Pose2D perturbed_challenging(const ChallengingPose& cp, Rng& rng) {
  double ang = rng.uniform(0.0, 2.0 * kPi);
  double rad = cp.radius * std::sqrt(rng.uniform());
  return {cp.pose.x + rad * std::cos(ang), cp.pose.y + rad * std::sin(ang),
          wrap_angle(cp.pose.theta + rng.uniform(-kChallengingRotJitter, kChallengingRotJitter))};
}

}  // namespace

void validate_spawn_config(const SpawnConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) {
    throw ContractViolation("SpawnConfig.lambda must lie in [0, 1]");
  }
  if (cfg.max_boxes < 0 || cfg.max_boxes > kMaxBoxes) {
    throw ContractViolation("SpawnConfig.max_boxes must lie in [0, 5]");
  }
  for (double pi : cfg.p) {
    if (pi < 0.2 || pi > 0.6) {
      throw ContractViolation("SpawnConfig.p entries must lie in [0.2, 0.6]");
    }
  }
  if (cfg.robot_anywhere_prob < 0.0 || cfg.robot_anywhere_prob > 1.0) {
    throw ContractViolation("SpawnConfig.robot_anywhere_prob must lie in [0, 1]");
  }
}

Scene generate_scene(const MapLayout& map, const SpawnConfig& cfg,
                     const PhysicsParams& phys, Rng& rng) {
  validate_spawn_config(cfg);

  Scene scene;
  scene.map_id = map.id;
  WorldState& world = scene.world;
  world.walls = map.walls;
  world.boxes.assign(kMaxBoxes, make_box_body(phys, {}));
  world.box_present.assign(kMaxBoxes, 0);

  double box_margin = 0.5 * phys.box_size * std::sqrt(2.0) + 0.05;

  for (int slot = 0; slot < cfg.max_boxes; ++slot) {
    double u = rng.uniform();
    SpawnBranch branch = SpawnBranch::absent;
    if (u < cfg.lambda * cfg.p[slot]) {
      branch = SpawnBranch::random_pose;
    } else if (u < cfg.lambda) {
      branch = SpawnBranch::challenging;
    }
    scene.spawn_branch[slot] = branch;
    if (branch == SpawnBranch::absent) continue;

    for (int attempt = 0; attempt < kBoxAttempts; ++attempt) {
      Pose2D pose;
      if (branch == SpawnBranch::random_pose) {
        pose = random_pose_in(map.room_bounds, box_margin, rng);
      } else {
        const ChallengingPose& cp =
            map.challenging_poses[rng.uniform_int(static_cast<int>(map.challenging_poses.size()))];
        pose = perturbed_challenging(cp, rng);
      }
      RigidBody2D candidate = make_box_body(phys, pose);
      if (placement_free(candidate, world, false)) {
        world.boxes[slot] = candidate;
        world.box_present[slot] = 1;
        break;
      }
    }
    // All attempts collided: the slot stays absent, which is what makes the
    // realized box count sub-proportional to lambda on crowded maps.
  }

  double robot_margin = 0.5 * std::hypot(phys.robot_length, phys.robot_width) + 0.05;
  bool placed = false;
  for (int attempt = 0; attempt < kRobotAttempts && !placed; ++attempt) {
    bool anywhere = rng.uniform() < cfg.robot_anywhere_prob;
    Pose2D pose = anywhere ? random_pose_in(map.room_bounds, robot_margin, rng)
                           : random_pose_in(map.robot_spawn_region, 0.0, rng);
    RigidBody2D candidate = make_robot_body(phys, pose);
    if (placement_free(candidate, world, false)) {
      world.robot = candidate;
      placed = true;
    }
  }
  if (!placed) {
    throw SceneGenerationError("no collision-free robot pose after 200 attempts on map " + map.id);
  }

  scene.goal = {rng.uniform(map.goal_spawn_region.xmin, map.goal_spawn_region.xmax),
                rng.uniform(map.goal_spawn_region.ymin, map.goal_spawn_region.ymax)};
  return scene;
}

double CurriculumState::lambda_of(const std::string& map_id) const {
  auto it = per_map.find(map_id);
  if (it == per_map.end()) throw ContractViolation("curriculum: unknown map " + map_id);
  return it->second.lambda();
}

CurriculumState make_curriculum(const std::vector<std::string>& map_ids,
                                int window_capacity, int initial_level) {
  CurriculumState st;
  st.window_capacity = window_capacity;
  for (const std::string& id : map_ids) {
    CurriculumState::Track t;
    t.level = initial_level;
    t.window.assign(window_capacity, 0);
    st.per_map[id] = t;
  }
  return st;
}

void curriculum_update(CurriculumState& state, const std::string& map_id,
                       bool episode_success) {
  auto it = state.per_map.find(map_id);
  if (it == state.per_map.end()) throw ContractViolation("curriculum: unknown map " + map_id);
  CurriculumState::Track& t = it->second;

  t.window[t.next] = episode_success ? 1 : 0;
  t.next = (t.next + 1) % state.window_capacity;
  t.filled = std::min(t.filled + 1, state.window_capacity);

  if (t.filled < state.window_capacity) return;
  int wins = 0;
  for (uint8_t w : t.window) wins += w;
  double rate = static_cast<double>(wins) / state.window_capacity;
  if (rate >= state.threshold && t.level < 5) {
    ++t.level;
    std::fill(t.window.begin(), t.window.end(), 0);
    t.next = 0;
    t.filled = 0;
  }
}

}  // namespace namo
