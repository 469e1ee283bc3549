#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "hapsim/body.hpp"

namespace hapsim {

// Penalty-contact gains.  normal_force = max(0, k_n * depth - c_n * v_n)
// with v_n the separating normal speed.
struct ContactGains {
  double k_n = 1e4;   // N/m
  double c_n = 50.0;  // N*s/m
};

// Slip speed below which a dynamic contact may re-stick.
inline constexpr double kStickVelocity = 1e-3;  // m/s
// Fraction of a stuck pair's anchor error removed per substep.  1 would be
// deadbeat; half is robust to the cross-pair forces the per-pair solve
// cannot see.
inline constexpr double kStickAnchorGain = 0.5;

using BodyPair = std::pair<BodyId, BodyId>;
inline BodyPair make_pair_key(BodyId a, BodyId b) {
  return a < b ? BodyPair{a, b} : BodyPair{b, a};
}

// Per-pair friction memory carried across steps.
// Where a stuck pair first grabbed, in each body's local frame.  True
// stiction resists displacement, not just velocity: without an anchor the
// per-substep arrest leaves a tiny residual under any sustained tangential
// load (each pair is resolved against the others' last-step forces), and
// that residual integrates into steady creep -- held objects slowly screw
// themselves out of alignment.  The anchor turns the residual into a bounded
// micro-displacement instead.
struct PairAnchor {
  Vec3 local_a;  // stick point in the frame of the lower-id body
  Vec3 local_b;  // stick point in the frame of the higher-id body
};

struct FrictionMemory {
  std::map<BodyPair, FrictionState> state;
  std::map<BodyPair, PairAnchor> anchor;

  FrictionState previous(BodyId a, BodyId b) const {
    auto it = state.find(make_pair_key(a, b));
    return it == state.end() ? FrictionState::None : it->second;
  }
};

struct World {
  std::vector<RigidBody> bodies;
  Vec3 gravity{0.0, -9.81, 0.0};
  double dt = 0.01;             // s, public step
  int substeps = 50;            // internal integrator subdivisions per step
  std::uint64_t step_index = 0;
  ContactGains gains;
  std::set<BodyPair> excluded_pairs;  // pairs skipped by collision detection

  std::vector<Contact> contacts;  // refreshed by step(); end-of-step state
  FrictionMemory friction_memory;
  // Last time each pair entered Dynamic friction, at substep resolution.
  // Kept for latency measurements against event timestamps.
  std::map<BodyPair, double> slip_transition_time;

  BodyId add_body(RigidBody body);
  RigidBody& body(BodyId id) { return bodies[id]; }
  const RigidBody& body(BodyId id) const { return bodies[id]; }
  const RigidBody* find_body(const std::string& name) const;

  void exclude_collision(BodyId a, BodyId b) { excluded_pairs.insert(make_pair_key(a, b)); }

  double time() const { return static_cast<double>(step_index) * dt; }

  // Force accumulators, valid during step(); force elements call these.
  void add_force(BodyId id, const Vec3& f) { force_acc[id] += f; }
  void add_torque(BodyId id, const Vec3& t) { torque_acc[id] += t; }
  void add_force_at(BodyId id, const Vec3& f, const Vec3& point) {
    force_acc[id] += f;
    torque_acc[id] += (point - bodies[id].pose.position).cross(f);
  }

  // One-shot wrenches applied over the whole of the next step() call.
  struct AppliedWrench { BodyId body; Vec3 force; Vec3 torque; };
  std::vector<AppliedWrench> applied;

  std::vector<Vec3> force_acc, torque_acc;
};

// Geometry-only narrow phase over all non-excluded pairs (pairs of two
// kinematic bodies are skipped); returned contacts all have depth > 0 and
// carry the relative velocity at the contact point.  Throws
// UnsupportedShapePair for any candidate pair outside the supported set
// (box/box, box/sphere, box/half-space, sphere/half-space).
std::vector<Contact> detect_contacts(const World& world);

// Fills normal_force, tangential_force and friction_state on each contact.
// The normal force follows the spring-damper law above; friction is decided
// per pair through friction_update, with the stick trial force chosen to
// cancel the pair's predicted tangential velocity over `horizon` seconds.
// `memory` supplies previous friction states and is updated in place.
void resolve_contact_forces(std::vector<Contact>& contacts, const World& world,
                            const ContactGains& gains, FrictionMemory& memory,
                            double horizon);

// Two-state Coulomb decision for one contact.  `trial` is the tangential
// force that would hold the surfaces static.  Returns the new state and the
// tangential force acting on body a.
std::pair<FrictionState, Vec3> friction_update(const Contact& contact, const Vec3& trial,
                                               FrictionState prev_state,
                                               double mu_static, double mu_dynamic);

// A persistent force element evaluated once per substep (couplings, joints).
class ForceElement {
 public:
  virtual ~ForceElement() = default;
  virtual void apply(World& world, double time) = 0;
};

// Advances the world by one dt: gravity, one-shot wrenches, force elements
// and contact forces, integrated with semi-implicit Euler over `substeps`
// internal subdivisions.  Deterministic for identical inputs.  Throws
// NumericalDivergence when any body exceeds 1e3 m/s.
void step(World& world, const std::vector<ForceElement*>& elements = {});

}  // namespace hapsim
