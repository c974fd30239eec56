#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace namo {

constexpr double kPi = 3.14159265358979323846;

// Raised when a caller breaks a documented precondition.
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

struct InvalidActionError : std::runtime_error {
  explicit InvalidActionError(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm_sq() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm_sq()); }
  Vec2 perp() const { return {-y, x}; }

  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Rot2 {
  double c = 1.0;
  double s = 0.0;

  static Rot2 from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }
  Vec2 rotate(const Vec2& v) const { return {c * v.x - s * v.y, s * v.x + c * v.y}; }
  // Inverse rotation (world -> body).
  Vec2 unrotate(const Vec2& v) const { return {c * v.x + s * v.y, -s * v.x + c * v.y}; }
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a = kPi;
  return a;
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Moves `v` toward `target` by at most `max_step` (>= 0).
inline double move_toward(double v, double target, double max_step) {
  double d = target - v;
  if (d > max_step) d = max_step;
  if (d < -max_step) d = -max_step;
  return v + d;
}

// Fixed-size-chunk parallel loop over [0, n). Worker writes must be disjoint;
// results are then independent of scheduling and thread count. Thread count
// comes from the NAMO_THREADS environment variable (default: hardware).
void parallel_for(int n, const std::function<void(int)>& fn);
void parallel_chunks(int n, const std::function<void(int, int)>& fn);
int worker_count();
void force_single_thread(bool on);

}  // namespace namo
