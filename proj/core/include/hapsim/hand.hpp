#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hapsim/world.hpp"

namespace hapsim {

enum class Finger { Thumb = 0, Index, Middle, Ring, Pinky };
enum class Phalanx { Proximal = 0, Middle, Distal };

inline constexpr int kFingerCount = 5;
inline constexpr int kPhalanxCount = 3;

const char* to_string(Finger f);
const char* to_string(Phalanx p);
Finger finger_from_string(const std::string& s);    // throws ParseError
Phalanx phalanx_from_string(const std::string& s);  // throws ParseError

// Device channel assigned to a finger's fingertip actuator.
inline int channel_for(Finger f) { return static_cast<int>(f); }

// Fingertip sphere proxy radius and bone half-lengths (bone along local x,
// joints at the +-x ends); scripted reach trajectories build chains from
// these.
inline constexpr double kDistalRadius = 0.008;  // m
double phalanx_half_length(Phalanx p);

// Tracked target poses for one instant; absent entries are untracked.
struct TrackedHandPose {
  double timestamp = 0.0;
  std::array<std::array<std::optional<Pose>, kPhalanxCount>, kFingerCount> targets;

  const std::optional<Pose>& target(Finger f, Phalanx p) const {
    return targets[static_cast<int>(f)][static_cast<int>(p)];
  }
  std::optional<Pose>& target(Finger f, Phalanx p) {
    return targets[static_cast<int>(f)][static_cast<int>(p)];
  }
};

// Virtual-coupling gains tying each phalanx body to its tracked target.
struct CouplingParams {
  double k_lin = 500.0;   // N/m
  double c_lin = 5.0;     // N*s/m
  double k_ang = 0.5;     // N*m/rad
  double c_ang = 0.005;   // N*m*s/rad
  double max_force = 20.0;  // N, clamp on the linear coupling force
};

// Penalty ball joint between two phalanx bodies; anchors in body frames.
struct BallJoint {
  BodyId body_a = kInvalidBody;
  BodyId body_b = kInvalidBody;
  Vec3 anchor_a;  // body a frame
  Vec3 anchor_b;  // body b frame
};

// Effective mass at an anchor includes the rotational compliance
// (1/m + r^2/I), so the stable stiffness range is far below what the
// phalanx masses alone would suggest.  k = 5e3 keeps the chain's worst
// transverse mode critically damped at the default substep.
struct JointGains {
  double k = 5e3;  // N/m
  double c = 5.0;  // N*s/m
};

struct SimHand {
  // kInvalidBody where the phalanx does not exist in the simulation.
  std::array<std::array<BodyId, kPhalanxCount>, kFingerCount> bodies;
  std::vector<BallJoint> joints;
  CouplingParams coupling;
  JointGains joint_gains;

  SimHand() {
    for (auto& f : bodies) f.fill(kInvalidBody);
  }
  BodyId body(Finger f, Phalanx p) const {
    return bodies[static_cast<int>(f)][static_cast<int>(p)];
  }
  bool has(Finger f, Phalanx p) const { return body(f, p) != kInvalidBody; }
};

// Builds phalanx bodies at the poses present in `initial` (5 fingers, up to
// 3 phalanges each), links adjacent phalanges with ball joints anchored so
// their separation starts at zero, and excludes all hand-internal collision
// pairs.  Distal phalanges carry an 8 mm sphere collision proxy; the other
// phalanges are slender boxes.  Hand surfaces get a very high friction
// coefficient so the object's material governs each pairing.
SimHand make_hand(World& world, const TrackedHandPose& initial,
                  const CouplingParams& coupling = {});

struct PhalanxWrench {
  BodyId body = kInvalidBody;
  Vec3 force;
  Vec3 torque;
};

// Spring-damper wrench pulling each phalanx toward its tracked target:
// F = clamp(k_lin*(x_t - x) - c_lin*v, max_force), torque analogously from
// the axis-angle orientation error.  Phalanges without a target get none.
std::vector<PhalanxWrench> apply_coupling(const World& world, const SimHand& hand,
                                          const TrackedHandPose& target,
                                          const CouplingParams& params);

struct JointForce {
  BodyId body_a = kInvalidBody;
  BodyId body_b = kInvalidBody;
  Vec3 point_a;  // world anchor on a, where +force acts on a
  Vec3 point_b;  // world anchor on b, where -force acts on b
  Vec3 force;
};

// Penalty restoring forces keeping ball-joint anchors coincident.  Forces
// act at the anchors, so no torque is transmitted about the joint point.
std::vector<JointForce> enforce_ball_joints(const World& world, const SimHand& hand);

// Per-finger aggregation of every contact on the distal phalanx body.
struct ContactSummary {
  bool in_contact = false;
  double total_normal_force = 0.0;  // N, sum over contacts
  FrictionState friction_state = FrictionState::None;  // Dynamic > Static > None
  double slip_speed = 0.0;             // m/s, max over contacts
  double normal_relative_speed = 0.0;  // m/s, signed, from the deepest contact
};

ContactSummary fingertip_contact_summary(const World& world, const SimHand& hand,
                                         Finger finger);

// Force element driving a SimHand from a time-dependent target source.
class HandCouplingElement : public ForceElement {
 public:
  using TargetFn = std::function<TrackedHandPose(double)>;
  HandCouplingElement(SimHand* hand, TargetFn targets)
      : hand_(hand), targets_(std::move(targets)) {}

  void apply(World& world, double time) override;

  // Most recent targets used, for inspection.
  const TrackedHandPose& current_targets() const { return current_; }

 private:
  SimHand* hand_;
  TargetFn targets_;
  TrackedHandPose current_;
};

}  // namespace hapsim
