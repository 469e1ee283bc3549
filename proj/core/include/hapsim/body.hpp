#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "hapsim/math.hpp"

namespace hapsim {

using BodyId = std::uint32_t;
inline constexpr BodyId kInvalidBody = UINT32_MAX;

// Surface/bulk parameters.  Density is in g/cm^3; a body's mass is
// density * shape volume.  When two materials meet, the contact uses the
// smaller friction coefficient of the pair, so an object's coefficients
// govern against a high-friction fingertip.
struct Material {
  double mu_static = 0.5;
  double mu_dynamic = 0.4;
  double density = 1.0;     // g/cm^3
  double restitution = 0.0; // unused by the penalty solver at default 0

  bool valid() const {
    return mu_dynamic >= 0.0 && mu_dynamic <= mu_static && density > 0.0 &&
           restitution >= 0.0 && restitution <= 1.0;
  }
};

struct BoxShape { Vec3 half_extents; };
struct SphereShape { double radius = 0.0; };
// Points with dot(normal, p) - offset < 0 are inside the solid.
struct HalfSpaceShape { Vec3 normal{0, 1, 0}; double offset = 0.0; };

using Shape = std::variant<BoxShape, SphereShape, HalfSpaceShape>;

double shape_volume(const Shape& s);
// Body-frame diagonal inertia for a solid of the given mass.
Vec3 shape_inertia(const Shape& s, double mass);

struct Pose {
  Vec3 position;
  Quat orientation;
};

struct RigidBody {
  BodyId id = kInvalidBody;
  std::string name;
  Pose pose;
  Vec3 linear_velocity;
  Vec3 angular_velocity;   // rad/s, world frame
  double mass = 1.0;       // kg; ignored when kinematic
  Vec3 inertia{1, 1, 1};   // kg*m^2, diagonal, body frame
  Shape shape = SphereShape{0.01};
  Material material;
  bool kinematic = false;  // pose driven externally, infinite mass

  double inv_mass() const { return kinematic ? 0.0 : 1.0 / mass; }
  Mat3 inv_inertia_world() const {
    if (kinematic) return Mat3::diag({0, 0, 0});
    return rotated_diag(pose.orientation, {1.0 / inertia.x, 1.0 / inertia.y, 1.0 / inertia.z});
  }
  Vec3 velocity_at(const Vec3& point) const {
    return linear_velocity + angular_velocity.cross(point - pose.position);
  }
};

enum class FrictionState : std::uint8_t { None = 0, Static = 1, Dynamic = 2 };

const char* to_string(FrictionState s);

struct Contact {
  BodyId body_a = kInvalidBody;
  BodyId body_b = kInvalidBody;
  Vec3 point;              // world, m
  Vec3 normal;             // unit, points from b toward a
  double depth = 0.0;      // m, > 0 while penetrating
  double normal_force = 0.0;      // N, along +normal on a
  Vec3 tangential_force;          // N, acting on a
  FrictionState friction_state = FrictionState::None;
  Vec3 relative_velocity;  // of a w.r.t. b at the contact point, m/s

  double separating_speed() const { return relative_velocity.dot(normal); }
  Vec3 tangential_velocity() const {
    return relative_velocity - normal * separating_speed();
  }
};

}  // namespace hapsim
