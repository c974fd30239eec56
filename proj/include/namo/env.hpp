#pragma once

#include <array>
#include <vector>

#include "namo/scenegen.hpp"

namespace namo {

enum class CellLabel : uint8_t { free = 0, wall = 1, box = 2, robot = 3, goal = 4 };

struct SemanticGrid {
  static constexpr int kSize = 48;
  static constexpr int kCells = kSize * kSize;
  std::array<uint8_t, kCells> labels{};

  CellLabel at(int ix, int iy) const {
    return static_cast<CellLabel>(labels[iy * kSize + ix]);
  }
  // Scalar encoding fed to the network: free 0, wall -1, box 0.5,
  // robot -0.5, goal 1.
  static float encode(CellLabel label);
  void encode_to(float* out) const;
};

constexpr int kVectorSize = 242;
constexpr int kHistoryFrames = 5;
constexpr double kGoalRadius = 0.3;
constexpr int kPhysicsStepsPerPolicyStep = 20;
constexpr int kMaxPolicySteps = 135;  // 45 s at 3 policy steps / s

struct RobotFrame {
  Vec2 pos;
  Vec2 vel;
  double rot = 0.0;
  double ang_vel = 0.0;
};

struct BoxVertexFrame {
  std::array<std::array<Vec2, 4>, kMaxBoxes> vertices{};
  std::array<uint8_t, kMaxBoxes> present{};
};

struct Observation {
  std::array<float, kVectorSize> vec{};
  std::array<float, SemanticGrid::kCells> grid{};
  SemanticGrid grid_labels;  // pre-noise labels, for diagnostics/rendering
};

// Table II, with the row weights baked in.
struct RewardBreakdown {
  double goal = 0.0;
  double progress = 0.0;
  double dist = 0.0;
  double wall_collision = 0.0;
  double box_collision = 0.0;
  double vel_effort = 0.0;
  double rot_effort = 0.0;
  double vel_offset = 0.0;
  double rot_offset = 0.0;
  double time = 0.0;
  double total = 0.0;
};

enum class Outcome : uint8_t { running = 0, success = 1, timeout = 2 };

struct EpisodeStatus {
  int steps_elapsed = 0;
  bool done = false;
  Outcome outcome = Outcome::running;
};

struct NoiseConfig {
  double sigma_vector = 0.01;
  double sigma_grid = 0.02;
  double sigma_action = 0.05;
};

SemanticGrid rasterize_grid(const WorldState& world, const Vec2& goal, const Rect& bounds);

std::array<float, kVectorSize> build_vector(
    const Vec2& goal, const std::array<RobotFrame, kHistoryFrames>& robot_frames,
    const std::array<BoxVertexFrame, kHistoryFrames>& box_frames,
    const std::array<Action, kHistoryFrames>& action_frames, const Rect& bounds,
    const PhysicsParams& phys);

RewardBreakdown compute_reward(const WorldState& prev, const WorldState& next,
                               const Action& action, const ContactReport& contacts,
                               const Vec2& goal, const Rect& bounds,
                               const PhysicsParams& phys, const StepFeedback& feedback,
                               bool success);

void apply_vector_noise(std::array<float, kVectorSize>& vec, double sigma, Rng& rng);
void apply_grid_noise(std::array<float, SemanticGrid::kCells>& grid, double sigma, Rng& rng);
Action apply_action_noise(const Action& action, double sigma, Rng& rng,
                          const PhysicsParams& phys);

class Environment {
 public:
  Environment(const MapLayout* map, const SpawnConfig& spawn, const NoiseConfig& noise,
              const PhysicsParams& phys, uint64_t seed_base, uint64_t seed_space,
              uint64_t env_id = 0);

  const Observation& reset();

  struct StepResult {
    const Observation* observation = nullptr;
    RewardBreakdown reward;
    EpisodeStatus status;
    ContactReport contacts;       // aggregated over the physics sub-steps
    Action applied_action;        // post-noise action handed to physics
    StepFeedback feedback;        // sub-step averaged actuals
  };
  StepResult step(const Action& action);

  const MapLayout& map() const { return *map_; }
  const WorldState& world() const { return world_; }
  const Scene& initial_scene() const { return initial_scene_; }
  const Vec2& goal() const { return goal_; }
  const EpisodeStatus& status() const { return status_; }
  const Observation& observation() const { return observation_; }
  double episode_reward() const { return episode_reward_; }
  void set_lambda(double lambda) { spawn_.lambda = lambda; }
  const SpawnConfig& spawn_config() const { return spawn_; }

 private:
  void push_history_frame(const Action& action);
  void emit_observation();

  const MapLayout* map_;
  SpawnConfig spawn_;
  NoiseConfig noise_;
  PhysicsParams phys_;
  uint64_t seed_base_;
  uint64_t seed_space_;
  uint64_t env_id_;
  uint64_t episode_counter_ = 0;

  Rng rng_;
  Scene initial_scene_;
  WorldState world_;
  Vec2 goal_;
  EpisodeStatus status_;
  Observation observation_;
  double episode_reward_ = 0.0;

  std::array<RobotFrame, kHistoryFrames> robot_frames_{};
  std::array<BoxVertexFrame, kHistoryFrames> box_frames_{};
  std::array<Action, kHistoryFrames> action_frames_{};
};

}  // namespace namo
