#pragma once

#include <array>
#include <vector>

#include "namo/common.hpp"

namespace namo {

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // wrapped to (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

struct RigidBody2D {
  Pose2D pose;
  Vec2 linear_velocity;
  double angular_velocity = 0.0;
  Vec2 half_extents;  // oriented rectangle
  double mass = 0.0;
  double inertia = 0.0;
  bool movable = false;

  double inv_mass() const { return movable ? 1.0 / mass : 0.0; }
  double inv_inertia() const { return movable ? 1.0 / inertia : 0.0; }
};

struct Action {
  double v_x = 0.0;          // target forward velocity, m/s
  double theta_dot_z = 0.0;  // target yaw rate, rad/s
};

// Wall: a segment thickened into a capsule.
struct WallSegment {
  Vec2 a;
  Vec2 b;
  double thickness = 0.1;

  double radius() const { return 0.5 * thickness; }
};

struct ContactReport {
  bool robot_wall_contact = false;
  std::vector<int> robot_box_contacts;  // sorted box indices
  std::vector<int> box_wall_contacts;   // sorted box indices
  double max_penetration = 0.0;
};

constexpr int kMaxBoxes = 5;

// Accumulated contact impulses carried across steps (warm starting); without
// them 8 solver iterations cannot hold a squeeze through a light box.
struct CachedContact {
  int64_t key = 0;     // encodes the body/wall pair
  Vec2 local_point;    // contact point in body A's frame at cache time
  double impulse_n = 0.0;
  double impulse_t = 0.0;
};

struct WorldState {
  RigidBody2D robot;
  std::vector<RigidBody2D> boxes;     // fixed slots, <= kMaxBoxes
  std::vector<uint8_t> box_present;   // parallel to boxes
  std::vector<WallSegment> walls;
  double time = 0.0;

  // Drive controller state: the commanded velocity being slewed toward the
  // action target under the acceleration caps.
  double cmd_speed = 0.0;
  double cmd_yaw_rate = 0.0;

  std::vector<CachedContact> contact_cache;
};

struct PhysicsParams {
  double dt = 1.0 / 60.0;

  double robot_length = 0.7;
  double robot_width = 0.4;
  double robot_mass = 30.0;

  double box_size = 0.6;
  double box_mass = 5.0;

  double floor_friction = 0.35;    // box vs floor (Coulomb)
  double contact_friction = 0.3;   // body vs body tangential
  double gravity = 9.81;

  // Action envelope.
  double v_min = -0.5;
  double v_max = 1.0;
  double omega_max = 1.5;
  double accel_limit = 2.0;        // m/s^2, slew on commanded speed
  double yaw_accel_limit = 6.0;    // rad/s^2

  // Drive force/torque caps. Sized so one box is pushable against floor
  // friction but two in series stall (box friction load ~17 N each).
  double drive_force_max = 26.0;
  double drive_torque_max = 12.0;

  int velocity_iterations = 8;
  int position_iterations = 4;
  double penetration_slop = 0.005;
  double baumgarte = 0.5;

  double robot_inertia() const {
    return robot_mass * (robot_length * robot_length + robot_width * robot_width) / 12.0;
  }
  double box_inertia() const {
    return box_mass * (2.0 * box_size * box_size) / 12.0;
  }
};

RigidBody2D make_robot_body(const PhysicsParams& p, const Pose2D& pose);
RigidBody2D make_box_body(const PhysicsParams& p, const Pose2D& pose);

// Corners in world frame, counter-clockwise starting at body-frame (+x, +y).
std::array<Vec2, 4> body_vertices(const RigidBody2D& body);

// Free-space kinematic update: slews velocity toward the action target under
// the acceleration caps, then integrates the pose. Rejects non-finite actions.
RigidBody2D integrate_unicycle(const RigidBody2D& robot, const Action& action,
                               double dt, const PhysicsParams& params);

// Per-step averages of what the robot actually did, for the offset rewards.
struct StepFeedback {
  double actual_speed = 0.0;     // body-frame forward velocity
  double actual_yaw_rate = 0.0;
};

// One dt of simulation: drive, floor friction, impulse contact resolution,
// integration, positional correction.
ContactReport step_world(WorldState& world, const Action& action,
                         const PhysicsParams& params,
                         StepFeedback* feedback = nullptr);

// Narrowphase queries, exposed for rasterization and validation.
bool point_in_body(const RigidBody2D& body, const Vec2& p);
double segment_point_distance(const Vec2& a, const Vec2& b, const Vec2& p);

// Overlap probes with an inflation margin, for spawn rejection.
bool bodies_overlap(const RigidBody2D& a, const RigidBody2D& b, double margin);
bool body_wall_overlap(const RigidBody2D& a, const WallSegment& w, double margin);

// Residual penetration across all pairs of the current state (0 if separated).
double max_world_penetration(const WorldState& world);

}  // namespace namo
