#include "namo/env.hpp"

#include <algorithm>
#include <cmath>

namespace namo {

float SemanticGrid::encode(CellLabel label) {
  switch (label) {
    case CellLabel::free: return 0.0f;
    case CellLabel::wall: return -1.0f;
    case CellLabel::box: return 0.5f;
    case CellLabel::robot: return -0.5f;
    case CellLabel::goal: return 1.0f;
  }
  return 0.0f;
}

void SemanticGrid::encode_to(float* out) const {
  for (int i = 0; i < kCells; ++i) out[i] = encode(static_cast<CellLabel>(labels[i]));
}

SemanticGrid rasterize_grid(const WorldState& world, const Vec2& goal, const Rect& bounds) {
  SemanticGrid grid;
  double cell = bounds.width() / SemanticGrid::kSize;

  auto cell_center = [&](int ix, int iy) -> Vec2 {
    return {bounds.xmin + (ix + 0.5) * cell, bounds.ymin + (iy + 0.5) * cell};
  };
  auto cell_range = [&](const Vec2& lo, const Vec2& hi, int* x0, int* y0, int* x1, int* y1) {
    *x0 = std::max(0, static_cast<int>((lo.x - bounds.xmin) / cell) - 1);
    *y0 = std::max(0, static_cast<int>((lo.y - bounds.ymin) / cell) - 1);
    *x1 = std::min(SemanticGrid::kSize - 1, static_cast<int>((hi.x - bounds.xmin) / cell) + 1);
    *y1 = std::min(SemanticGrid::kSize - 1, static_cast<int>((hi.y - bounds.ymin) / cell) + 1);
  };
  auto paint_body = [&](const RigidBody2D& body, CellLabel label) {
    double reach = body.half_extents.norm();
    Vec2 c = body.pose.position();
    int x0, y0, x1, y1;
    cell_range(c - Vec2{reach, reach}, c + Vec2{reach, reach}, &x0, &y0, &x1, &y1);
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        if (point_in_body(body, cell_center(ix, iy))) {
          grid.labels[iy * SemanticGrid::kSize + ix] = static_cast<uint8_t>(label);
        }
      }
    }
  };

  // Priority free < goal < wall < box < robot, painted in that order.
  {
    int x0, y0, x1, y1;
    cell_range(goal - Vec2{kGoalRadius, kGoalRadius}, goal + Vec2{kGoalRadius, kGoalRadius},
               &x0, &y0, &x1, &y1);
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        if ((cell_center(ix, iy) - goal).norm() <= kGoalRadius) {
          grid.labels[iy * SemanticGrid::kSize + ix] = static_cast<uint8_t>(CellLabel::goal);
        }
      }
    }
  }
  for (const WallSegment& w : world.walls) {
    Vec2 lo{std::min(w.a.x, w.b.x), std::min(w.a.y, w.b.y)};
    Vec2 hi{std::max(w.a.x, w.b.x), std::max(w.a.y, w.b.y)};
    double pad = w.radius() + cell;
    int x0, y0, x1, y1;
    cell_range(lo - Vec2{pad, pad}, hi + Vec2{pad, pad}, &x0, &y0, &x1, &y1);
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        if (wall_covers_cell(w, cell_center(ix, iy), cell)) {
          grid.labels[iy * SemanticGrid::kSize + ix] = static_cast<uint8_t>(CellLabel::wall);
        }
      }
    }
  }
  for (size_t i = 0; i < world.boxes.size(); ++i) {
    if (world.box_present[i]) paint_body(world.boxes[i], CellLabel::box);
  }
  paint_body(world.robot, CellLabel::robot);
  return grid;
}

std::array<float, kVectorSize> build_vector(
    const Vec2& goal, const std::array<RobotFrame, kHistoryFrames>& robot_frames,
    const std::array<BoxVertexFrame, kHistoryFrames>& box_frames,
    const std::array<Action, kHistoryFrames>& action_frames, const Rect& bounds,
    const PhysicsParams& phys) {
  std::array<float, kVectorSize> out{};
  Vec2 center{0.5 * (bounds.xmin + bounds.xmax), 0.5 * (bounds.ymin + bounds.ymax)};
  double half = 0.5 * std::max(bounds.width(), bounds.height());
  double v_norm = std::max(std::abs(phys.v_min), phys.v_max);
  double w_norm = phys.omega_max;

  auto push = [&out](int& i, double v) {
    out[i++] = static_cast<float>(clamp(v, -1.0, 1.0));
  };

  int i = 0;
  push(i, (goal.x - center.x) / half);
  push(i, (goal.y - center.y) / half);
  for (const RobotFrame& f : robot_frames) {
    push(i, (f.pos.x - center.x) / half);
    push(i, (f.pos.y - center.y) / half);
    push(i, f.vel.x / v_norm);
    push(i, f.vel.y / v_norm);
    push(i, f.rot / kPi);
    push(i, f.ang_vel / w_norm);
  }
  for (const BoxVertexFrame& f : box_frames) {
    for (int b = 0; b < kMaxBoxes; ++b) {
      for (int v = 0; v < 4; ++v) {
        if (f.present[b]) {
          push(i, (f.vertices[b][v].x - center.x) / half);
          push(i, (f.vertices[b][v].y - center.y) / half);
        } else {
          i += 2;  // absent boxes are exact zeros
        }
      }
    }
  }
  for (const Action& a : action_frames) {
    push(i, a.v_x / v_norm);
    push(i, a.theta_dot_z / w_norm);
  }
  if (i != kVectorSize) throw ContractViolation("observation vector layout mismatch");
  return out;
}

RewardBreakdown compute_reward(const WorldState& prev, const WorldState& next,
                               const Action& action, const ContactReport& contacts,
                               const Vec2& goal, const Rect& bounds,
                               const PhysicsParams& phys, const StepFeedback& feedback,
                               bool success) {
  RewardBreakdown r;
  double policy_dt = kPhysicsStepsPerPolicyStep * phys.dt;
  double v_norm = std::max(std::abs(phys.v_min), phys.v_max);
  double diag = std::hypot(bounds.width(), bounds.height());

  r.goal = success ? 10.0 : 0.0;

  Vec2 to_goal = goal - prev.robot.pose.position();
  Vec2 avg_vel = (next.robot.pose.position() - prev.robot.pose.position()) * (1.0 / policy_dt);
  double toward = to_goal.norm() > 1e-9 ? avg_vel.dot(to_goal.normalized()) : 0.0;
  r.progress = clamp(toward / v_norm, -1.0, 1.0) * 1.0;

  double d = (goal - next.robot.pose.position()).norm();
  r.dist = (1.0 - clamp(d / diag, 0.0, 1.0)) * 0.1;

  r.wall_collision = contacts.robot_wall_contact ? -0.2 : 0.0;
  r.box_collision = contacts.robot_box_contacts.empty() ? 0.0 : -0.1;

  double v_target = clamp(action.v_x, phys.v_min, phys.v_max);
  double w_target = clamp(action.theta_dot_z, -phys.omega_max, phys.omega_max);
  r.vel_effort = -std::abs(v_target) / v_norm * 0.05;
  r.rot_effort = -std::abs(w_target) / phys.omega_max * 0.1;
  r.vel_offset = -clamp(std::abs(feedback.actual_speed - v_target) / v_norm, 0.0, 1.0) * 0.2;
  r.rot_offset = -clamp(std::abs(feedback.actual_yaw_rate - w_target) / phys.omega_max, 0.0, 1.0) * 0.1;

  r.time = -1.0;

  r.total = r.goal + r.progress + r.dist + r.wall_collision + r.box_collision +
            r.vel_effort + r.rot_effort + r.vel_offset + r.rot_offset + r.time;
  return r;
}

void apply_vector_noise(std::array<float, kVectorSize>& vec, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (float& v : vec) {
    v = static_cast<float>(clamp(v + sigma * rng.normal(), -1.0, 1.0));
  }
}

void apply_grid_noise(std::array<float, SemanticGrid::kCells>& grid, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (float& v : grid) {
    v = static_cast<float>(clamp(v + sigma * rng.normal(), -1.0, 1.0));
  }
}

Action apply_action_noise(const Action& action, double sigma, Rng& rng,
                          const PhysicsParams& phys) {
  if (sigma <= 0.0) return action;
  double v_norm = std::max(std::abs(phys.v_min), phys.v_max);
  Action out;
  out.v_x = clamp(action.v_x + sigma * v_norm * rng.normal(), phys.v_min, phys.v_max);
  out.theta_dot_z = clamp(action.theta_dot_z + sigma * phys.omega_max * rng.normal(),
                          -phys.omega_max, phys.omega_max);
  return out;
}

Environment::Environment(const MapLayout* map, const SpawnConfig& spawn,
                         const NoiseConfig& noise, const PhysicsParams& phys,
                         uint64_t seed_base, uint64_t seed_space, uint64_t env_id)
    : map_(map), spawn_(spawn), noise_(noise), phys_(phys), seed_base_(seed_base),
      seed_space_(seed_space), env_id_(env_id) {
  validate_spawn_config(spawn_);
}

const Observation& Environment::reset() {
  uint64_t episode_key = (env_id_ << 24) ^ episode_counter_;
  rng_.reseed(derive_seed(seed_base_, seed_space_, episode_key), env_id_);
  ++episode_counter_;

  initial_scene_ = generate_scene(*map_, spawn_, phys_, rng_);
  world_ = initial_scene_.world;
  goal_ = initial_scene_.goal;
  status_ = {};
  episode_reward_ = 0.0;

  RobotFrame frame;
  frame.pos = world_.robot.pose.position();
  frame.vel = world_.robot.linear_velocity;
  frame.rot = world_.robot.pose.theta;
  frame.ang_vel = world_.robot.angular_velocity;
  BoxVertexFrame boxes;
  for (int b = 0; b < kMaxBoxes; ++b) {
    boxes.present[b] = world_.box_present[b];
    if (boxes.present[b]) boxes.vertices[b] = body_vertices(world_.boxes[b]);
  }
  robot_frames_.fill(frame);
  box_frames_.fill(boxes);
  action_frames_.fill(Action{});

  emit_observation();
  return observation_;
}

void Environment::push_history_frame(const Action& action) {
  for (int i = 0; i + 1 < kHistoryFrames; ++i) {
    robot_frames_[i] = robot_frames_[i + 1];
    box_frames_[i] = box_frames_[i + 1];
    action_frames_[i] = action_frames_[i + 1];
  }
  RobotFrame frame;
  frame.pos = world_.robot.pose.position();
  frame.vel = world_.robot.linear_velocity;
  frame.rot = world_.robot.pose.theta;
  frame.ang_vel = world_.robot.angular_velocity;
  robot_frames_[kHistoryFrames - 1] = frame;
  BoxVertexFrame boxes;
  for (int b = 0; b < kMaxBoxes; ++b) {
    boxes.present[b] = world_.box_present[b];
    if (boxes.present[b]) boxes.vertices[b] = body_vertices(world_.boxes[b]);
  }
  box_frames_[kHistoryFrames - 1] = boxes;
  action_frames_[kHistoryFrames - 1] = action;
}

void Environment::emit_observation() {
  observation_.grid_labels = rasterize_grid(world_, goal_, map_->room_bounds);
  observation_.grid_labels.encode_to(observation_.grid.data());
  observation_.vec = build_vector(goal_, robot_frames_, box_frames_, action_frames_,
                                  map_->room_bounds, phys_);
  apply_vector_noise(observation_.vec, noise_.sigma_vector, rng_);
  apply_grid_noise(observation_.grid, noise_.sigma_grid, rng_);
}

Environment::StepResult Environment::step(const Action& action) {
  if (status_.done) {
    throw ContractViolation("Environment::step called on a finished episode");
  }
  if (!std::isfinite(action.v_x) || !std::isfinite(action.theta_dot_z)) {
    throw InvalidActionError("non-finite action");
  }

  Action commanded{clamp(action.v_x, phys_.v_min, phys_.v_max),
                   clamp(action.theta_dot_z, -phys_.omega_max, phys_.omega_max)};
  Action applied = apply_action_noise(commanded, noise_.sigma_action, rng_, phys_);

  WorldState prev = world_;
  ContactReport aggregate;
  StepFeedback mean_feedback;
  for (int s = 0; s < kPhysicsStepsPerPolicyStep; ++s) {
    StepFeedback fb;
    ContactReport rep = step_world(world_, applied, phys_, &fb);
    aggregate.robot_wall_contact |= rep.robot_wall_contact;
    aggregate.robot_box_contacts.insert(aggregate.robot_box_contacts.end(),
                                        rep.robot_box_contacts.begin(),
                                        rep.robot_box_contacts.end());
    aggregate.box_wall_contacts.insert(aggregate.box_wall_contacts.end(),
                                       rep.box_wall_contacts.begin(),
                                       rep.box_wall_contacts.end());
    aggregate.max_penetration = std::max(aggregate.max_penetration, rep.max_penetration);
    mean_feedback.actual_speed += fb.actual_speed / kPhysicsStepsPerPolicyStep;
    mean_feedback.actual_yaw_rate += fb.actual_yaw_rate / kPhysicsStepsPerPolicyStep;
  }
  auto dedupe = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(aggregate.robot_box_contacts);
  dedupe(aggregate.box_wall_contacts);

  ++status_.steps_elapsed;
  bool success = (goal_ - world_.robot.pose.position()).norm() <= kGoalRadius;
  if (success) {
    status_.done = true;
    status_.outcome = Outcome::success;
  } else if (status_.steps_elapsed >= kMaxPolicySteps) {
    status_.done = true;
    status_.outcome = Outcome::timeout;
  }

  StepResult result;
  result.reward = compute_reward(prev, world_, commanded, aggregate, goal_,
                                 map_->room_bounds, phys_, mean_feedback, success);
  episode_reward_ += result.reward.total;

  push_history_frame(commanded);
  emit_observation();

  result.observation = &observation_;
  result.status = status_;
  result.contacts = std::move(aggregate);
  result.applied_action = applied;
  result.feedback = mean_feedback;
  return result;
}

}  // namespace namo
