#pragma once

#include <array>
#include <map>
#include <string>

#include "namo/map.hpp"
#include "namo/rng.hpp"

namespace namo {

struct SpawnConfig {
  double lambda = 0.2;
  std::array<double, kMaxBoxes> p{0.2, 0.3, 0.4, 0.5, 0.6};
  int max_boxes = kMaxBoxes;
  double robot_anywhere_prob = 0.05;
};

void validate_spawn_config(const SpawnConfig& cfg);

struct SceneGenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Which branch of the lambda*p_i / lambda*(1-p_i) / 1-lambda split a slot
// drew, before collision rejection.
enum class SpawnBranch : uint8_t { absent = 0, random_pose = 1, challenging = 2 };

struct Scene {
  std::string map_id;
  WorldState world;
  Vec2 goal;
  std::array<SpawnBranch, kMaxBoxes> spawn_branch{};
};

// Places boxes, robot, and goal per the spawn distribution. Boxes failing
// collision rejection (50 attempts) are left absent; a robot pose failing
// 200 attempts raises SceneGenerationError.
Scene generate_scene(const MapLayout& map, const SpawnConfig& cfg,
                     const PhysicsParams& phys, Rng& rng);

// Per-map difficulty tracker. lambda rises by 0.2 whenever the completion
// window fills at >= 90%, capped at 1.0.
struct CurriculumState {
  struct Track {
    int level = 1;  // lambda = level * 0.2
    std::vector<uint8_t> window;
    int next = 0;
    int filled = 0;

    double lambda() const { return level * 0.2; }
  };
  std::map<std::string, Track> per_map;
  int window_capacity = 200;
  double threshold = 0.9;

  double lambda_of(const std::string& map_id) const;
};

CurriculumState make_curriculum(const std::vector<std::string>& map_ids,
                                int window_capacity = 200, int initial_level = 1);

void curriculum_update(CurriculumState& state, const std::string& map_id,
                       bool episode_success);

}  // namespace namo
