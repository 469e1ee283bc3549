#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "hapsim/events.hpp"
#include "hapsim/hand.hpp"

namespace hapsim {

// Scripted stand-ins for human participants.  Two information channels are
// modeled:
//   - proprioception/vision: fingertip contact forces and the object pose,
//     always available (continuous grip regulation and reach scripts need
//     no rendered feedback to function),
//   - haptic feedback: the masked event stream, the only trigger for the
//     discrete reactions under study (the slide controller's re-grasp).
struct ControlInput {
  double time = 0.0;
  std::array<ContactSummary, kChannelCount> touch{};  // per-channel fingertip state
  Pose object;                                        // held object, from vision
  Vec3 object_velocity;
  std::vector<HapticEvent> events;  // masked feedback since the last update
};

class HandController {
 public:
  virtual ~HandController() = default;
  // Called once per sim step at time t; targets() then covers (t, t+dt].
  virtual void update(const ControlInput& in, double dt) = 0;
  virtual const TrackedHandPose& targets() const = 0;
  virtual bool finished() const = 0;
  // The runner resets the object after a break or an out-of-bounds fall.
  virtual void on_object_reset(double /*time*/) {}
};

// Thumb (-x side) and index (+x side) pinch with full three-phalanx chains
// pointing away from the grip point, so tips touch first and the proximal
// links stay clear of the object.
struct PinchRig {
  double tip_standoff = 0.033;  // m, tip center to grip point at zero push

  TrackedHandPose pose(const Vec3& grip_point, double push_thumb,
                       double push_index, double time) const;
};

// Integral regulator turning a grip-force command into target push depth.
// dpush/dt = ki * (grip - N); through the coupling and contact stiffness
// in series this settles with no steady-state force error.
struct GripRegulator {
  double ki = 0.08;        // m per (N s)
  double push_min = -0.010;  // m, retreat allowance for clean release
  double push_max = 0.050;
  // A pinch force loop has a free common mode: each finger's force target is
  // satisfied anywhere along the grip axis, so independent integrators can
  // walk the pair sideways while chasing a moving load.  Symmetric mode runs
  // one integrator off the mean normal force, pinning the squeeze midpoint to
  // the scripted pinch point -- required when the task needs the grip centered
  // (insertion), optional when it only needs force (lift and hold).
  bool symmetric = false;
  std::array<double, 2> push{0.0, 0.0};  // thumb, index

  void regulate(double grip, const ControlInput& in, double dt);
  void release() { push = {push_min, push_min}; }
};

struct GraspParams {
  double approach_time = 0.6;  // s, standoff to surface
  double lift_height = 0.05;   // m, carry the cube clear of the ground
  double lift_time = 1.0;      // s
  double start_grip = 0.5;     // N, first staircase level
  double decrement = 0.95;     // multiplicative staircase step
  double dwell = 2.0;          // s per level
  double drop_threshold = 0.005;  // m, drop within a dwell that counts as lost
  // Optional piecewise-linear grip profile [(t, N)...] replacing the
  // staircase (t relative to profile start); used for break tests.
  std::vector<std::pair<double, double>> profile;
};

// Descending-staircase hunt for the smallest holding grip: dwell at each
// level, watch the cube height, stop at the first level that drops.
class GraspController : public HandController {
 public:
  GraspController(const GraspParams& params, const Vec3& cube_start,
                  double tip_standoff);

  void update(const ControlInput& in, double dt) override;
  const TrackedHandPose& targets() const override { return targets_; }
  bool finished() const override { return phase_ == Phase::Done; }
  void on_object_reset(double time) override;

  // Mean thumb normal force over the tail of the last dwell that held.
  double min_hold_force() const { return min_hold_; }
  bool ever_held() const { return held_levels_ > 0; }

 private:
  enum class Phase { Approach, Lift, Dwell, Profile, Done };

  double profile_grip(double t_rel) const;

  GraspParams params_;
  PinchRig rig_;
  GripRegulator reg_;
  Vec3 grip_point_;
  double ground_y_;
  Phase phase_ = Phase::Approach;
  double phase_start_ = 0.0;
  double grip_ = 0.0;
  int level_ = 0;
  int held_levels_ = 0;
  double dwell_start_y_ = 0.0;
  double tail_sum_ = 0.0;
  int tail_count_ = 0;
  double last_level_avg_ = std::nan("");
  double min_hold_ = std::nan("");
  TrackedHandPose targets_;
};

struct SlideParams {
  double approach_time = 0.6;
  double settle_time = 0.5;    // s squeezing to hold_force before any motion
  double lift_height = 0.125;  // m, air below the box before the ramp
  double lift_time = 1.2;      // s
  // Per-finger force while carrying.  Must clear mg/(2*mu_d) = 18.4 N, not
  // just the static bound: a carry only survives transient micro-slips if
  // sliding friction alone can still beat the box's weight and re-stick.
  double hold_force = 25.0;
  double hold_time = 1.0;      // s before the ramp starts
  double ramp_rate = 3.0;      // N/s grip decrease
  double grip_floor = 0.5;     // N, ramp stops here
  double regrasp_force = 35.0;  // N commanded on reaction
  // Delay between SlipOnset feedback and the re-grasp command.  The box sheds
  // grip support as it falls (mu_d is well below mu_s), so past ~100 ms the
  // arrest distance alone exceeds the drop budget; 50 ms leaves margin while
  // still dominating the feedback pipeline it exercises.
  double reaction_delay = 0.05;
  double post_hold = 1.0;      // s at regrasp force before finishing
  double no_slip_grace = 3.0;  // s at the floor before giving up

  // When the grip-relax ramp begins, measured from the trial start.
  double ramp_start() const {
    return approach_time + settle_time + lift_time + hold_time;
  }
};

// Squeezes the box to the hold force, lifts it, relaxes the grip linearly
// until it slips, and re-grasps a fixed delay after the SlipOnset feedback
// arrives.  Slip feedback only arms the reaction during the ramp; earlier
// transients are part of establishing the hold, not the probed response.
// Fingertip height follows the object down so the catch happens in contact.
class SlideController : public HandController {
 public:
  SlideController(const SlideParams& params, const Vec3& box_start,
                  double tip_standoff);

  void update(const ControlInput& in, double dt) override;
  const TrackedHandPose& targets() const override { return targets_; }
  bool finished() const override { return phase_ == Phase::Done; }

  // NaN until the re-grasp command has been issued.
  double regrasp_time() const { return regrasp_time_; }

 private:
  enum class Phase { Approach, Settle, Lift, Hold, Ramp, Regrasp, Done };

  SlideParams params_;
  PinchRig rig_;
  GripRegulator reg_;
  Vec3 grip_point_;
  double start_y_ = 0.0;
  Phase phase_ = Phase::Approach;
  double phase_start_ = 0.0;
  double grip_ = 0.0;
  double floor_since_ = std::nan("");
  double regrasp_at_ = std::nan("");   // scheduled command time
  double regrasp_time_ = std::nan("");  // T1, when the command was issued
  TrackedHandPose targets_;
};

struct PegParams {
  double grip = 2.5;            // N pinch on the peg
  // Pinch height above the peg's center of mass.  Point contacts cannot
  // resist spin about the grip axis, so a tall peg held at its center is a
  // free rotor; pinching above the center lets gravity right it like a
  // pendulum.  Kept small enough that the tips stay below the platform at
  // full insertion depth.
  double grip_above = 0.015;
  double approach_time = 0.6;
  double settle_time = 0.4;
  double carry_height = 0.14;   // m, peg center during the carry
  double lift_time = 1.0;
  double translate_time = 1.5;
  // Commanded insertion speed.  Kept gentle: the kick when a misaligned peg
  // meets the platform scales with approach speed, and a hard knock breaks
  // the fingertip stick and heels the peg over before the grip can recover.
  double ascend_speed = 0.02;
  // Target lead over the actual peg height.  Sets the drive force on a
  // blocked peg (roughly coupling stiffness times lead, per finger): enough
  // to push through hole-wall rub, small enough that a jammed edge is not
  // ground hard into the platform -- the grind heels the peg over and the
  // pinch cannot resist the twist it leaves behind.
  double ascend_lead = 0.002;
  double lateral_offset = 0.0;  // m, deliberate aim error at the hole
  bool correct = false;  // back off and re-center after correct_after
  // Seconds into the ascent before the correction dip.  Long enough that a
  // blocked peg visibly fails first, short enough that it does not grind
  // against the platform edge: the grip cannot resist twist about the
  // vertical, so every grinding second feeds yaw the hole tolerance must
  // then absorb.
  double correct_after = 1.5;
  double correct_move_time = 0.5;
  double correct_clear_height = 0.17;  // m, peg center below the platform
  // Pause after re-centering before the retry.  The peg hangs below the
  // pinch line, and the dip-and-shift swings it like a pendulum; pushing up
  // while it still swings would present the top face off-angle and catch
  // the hole edge all over again.  Kept short: a hanging peg also slowly
  // screws itself around the vertical (two point contacts amplify any
  // twist), so time spent waiting trades swing for yaw.
  double correct_settle_time = 0.6;
  bool drop_outside = false;    // carry past the table edge and let go first
  double drop_x = 0.30;         // m, release point for the drop variant
};

// Pinches the peg, carries it under the hole, and pushes it up through.
// The ascent target never leads the actual peg height by more than
// ascend_lead, so a blocked peg is pressed gently instead of winding up
// the coupling.  The optional correction dips below the platform,
// re-centers, and retries; the drop variant releases the peg off the table
// first and restarts the script once the runner resets it.
class PegController : public HandController {
 public:
  PegController(const PegParams& params, const Vec3& peg_start,
                double tip_standoff);

  void update(const ControlInput& in, double dt) override;
  const TrackedHandPose& targets() const override { return targets_; }
  bool finished() const override { return false; }  // the runner ends the task
  void on_object_reset(double time) override;

  bool corrected() const { return corrected_; }

 private:
  Vec3 pinch_point() const;

  enum class Phase {
    Approach, Settle, Lift, Translate, Ascend,
    CorrectDown, CorrectCenter, CorrectSettle,
    DropCarry, DropRelease, DropWait,
    ReturnUp, ReturnOver, ReturnDown,
  };

  void enter(Phase next, double time, const Vec3& from);

  PegParams params_;
  PinchRig rig_;
  GripRegulator reg_;
  Vec3 peg_start_;
  Phase phase_ = Phase::Approach;
  double phase_start_ = 0.0;
  Vec3 seg_from_;    // grip point at phase entry
  Vec3 grip_point_;  // current scripted grip point
  double ascend_base_ = 0.0;  // script height at ascent start
  bool corrected_ = false;
  bool dropped_ = false;
  TrackedHandPose targets_;
};

}  // namespace hapsim
