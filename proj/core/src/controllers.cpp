#include "hapsim/controllers.hpp"

#include <algorithm>

#include "hapsim/errors.hpp"

namespace hapsim {
namespace {

constexpr double kApproachStandoff = 0.03;  // m beyond the contact point

double lerp(double a, double b, double s) { return a + (b - a) * s; }

// 0..1 progress through a phase of the given length.
double progress(double t, double start, double length) {
  if (length <= 0.0) return 1.0;
  return std::clamp((t - start) / length, 0.0, 1.0);
}

// Zero-velocity endpoints for carried objects: a step change in carry
// speed would spike the tangential load on the fingertips and can break
// an otherwise sound grip.
double ease(double s) { return s * s * (3.0 - 2.0 * s); }

bool slip_onset_on_grip_fingers(const std::vector<HapticEvent>& events,
                                double* time) {
  for (const HapticEvent& e : events) {
    if (e.channel != channel_for(Finger::Thumb) &&
        e.channel != channel_for(Finger::Index))
      continue;
    if (std::holds_alternative<SlipOnset>(e.kind)) {
      *time = e.time;
      return true;
    }
  }
  return false;
}

}  // namespace

TrackedHandPose PinchRig::pose(const Vec3& grip_point, double push_thumb,
                               double push_index, double time) const {
  const double d_mid = phalanx_half_length(Phalanx::Distal) +
                       phalanx_half_length(Phalanx::Middle);
  const double d_prox = phalanx_half_length(Phalanx::Middle) +
                        phalanx_half_length(Phalanx::Proximal);

  TrackedHandPose pose;
  pose.timestamp = time;

  // Thumb from -x, bone +x aimed at the grip point, chain extending -x.
  {
    const Quat q;  // identity
    const double tip_x = grip_point.x - (tip_standoff - push_thumb);
    Vec3 tip{tip_x, grip_point.y, grip_point.z};
    pose.target(Finger::Thumb, Phalanx::Distal) = Pose{tip, q};
    Vec3 mid = tip - Vec3{d_mid, 0.0, 0.0};
    pose.target(Finger::Thumb, Phalanx::Middle) = Pose{mid, q};
    Vec3 prox = mid - Vec3{d_prox, 0.0, 0.0};
    pose.target(Finger::Thumb, Phalanx::Proximal) = Pose{prox, q};
  }

  // Index from +x, turned half around so its bone also aims at the grip
  // point, chain extending +x.
  {
    const Quat q{0.0, 0.0, 1.0, 0.0};  // 180 degrees about y
    const double tip_x = grip_point.x + (tip_standoff - push_index);
    Vec3 tip{tip_x, grip_point.y, grip_point.z};
    pose.target(Finger::Index, Phalanx::Distal) = Pose{tip, q};
    Vec3 mid = tip + Vec3{d_mid, 0.0, 0.0};
    pose.target(Finger::Index, Phalanx::Middle) = Pose{mid, q};
    Vec3 prox = mid + Vec3{d_prox, 0.0, 0.0};
    pose.target(Finger::Index, Phalanx::Proximal) = Pose{prox, q};
  }
  return pose;
}

void GripRegulator::regulate(double grip, const ControlInput& in, double dt) {
  const double n[2] = {
      in.touch[channel_for(Finger::Thumb)].total_normal_force,
      in.touch[channel_for(Finger::Index)].total_normal_force,
  };
  if (symmetric) {
    const double step = ki * (grip - 0.5 * (n[0] + n[1])) * dt;
    const double common =
        std::clamp(0.5 * (push[0] + push[1]) + step, push_min, push_max);
    push = {common, common};
    return;
  }
  for (int i = 0; i < 2; ++i) {
    push[i] += ki * (grip - n[i]) * dt;
    push[i] = std::clamp(push[i], push_min, push_max);
  }
}

GraspController::GraspController(const GraspParams& params,
                                 const Vec3& cube_start, double tip_standoff)
    : params_(params), grip_point_(cube_start), ground_y_(cube_start.y) {
  rig_.tip_standoff = tip_standoff;
  reg_.push = {-kApproachStandoff, -kApproachStandoff};
  grip_ = params_.start_grip;
  targets_ = rig_.pose(grip_point_, reg_.push[0], reg_.push[1], 0.0);
}

double GraspController::profile_grip(double t_rel) const {
  const auto& p = params_.profile;
  if (t_rel <= p.front().first) return p.front().second;
  for (size_t i = 1; i < p.size(); ++i) {
    if (t_rel <= p[i].first) {
      const double s =
          (t_rel - p[i - 1].first) / (p[i].first - p[i - 1].first);
      return lerp(p[i - 1].second, p[i].second, s);
    }
  }
  return p.back().second;
}

void GraspController::update(const ControlInput& in, double dt) {
  const double t = in.time;
  switch (phase_) {
    case Phase::Approach: {
      const double s = progress(t, phase_start_, params_.approach_time);
      reg_.push = {-kApproachStandoff * (1.0 - s), -kApproachStandoff * (1.0 - s)};
      if (s >= 1.0) {
        phase_ = Phase::Lift;
        phase_start_ = t;
      }
      break;
    }
    case Phase::Lift: {
      const double s = progress(t, phase_start_, params_.lift_time);
      grip_point_.y = ground_y_ + params_.lift_height * ease(s);
      reg_.regulate(grip_, in, dt);
      if (s >= 1.0) {
        phase_start_ = t;
        if (!params_.profile.empty()) {
          phase_ = Phase::Profile;
        } else {
          phase_ = Phase::Dwell;
          dwell_start_y_ = in.object.position.y;
          tail_sum_ = 0.0;
          tail_count_ = 0;
        }
      }
      break;
    }
    case Phase::Dwell: {
      reg_.regulate(grip_, in, dt);
      if (dwell_start_y_ - in.object.position.y > params_.drop_threshold) {
        if (held_levels_ == 0)
          throw ControllerNeverHeld("cube dropped at the first staircase level (" +
                                    std::to_string(grip_) + " N)");
        min_hold_ = last_level_avg_;
        phase_ = Phase::Done;
        break;
      }
      if (t - phase_start_ >= 0.75 * params_.dwell) {
        tail_sum_ += in.touch[channel_for(Finger::Thumb)].total_normal_force;
        ++tail_count_;
      }
      if (t - phase_start_ >= params_.dwell) {
        last_level_avg_ = tail_count_ > 0 ? tail_sum_ / tail_count_ : grip_;
        ++held_levels_;
        ++level_;
        grip_ *= params_.decrement;
        phase_start_ = t;
        dwell_start_y_ = in.object.position.y;
        tail_sum_ = 0.0;
        tail_count_ = 0;
      }
      break;
    }
    case Phase::Profile: {
      grip_ = profile_grip(t - phase_start_);
      reg_.regulate(grip_, in, dt);
      if (t - phase_start_ >= params_.profile.back().first)
        phase_ = Phase::Done;
      break;
    }
    case Phase::Done:
      reg_.release();
      break;
  }
  targets_ = rig_.pose(grip_point_, reg_.push[0], reg_.push[1], t);
}

void GraspController::on_object_reset(double) {
  // A snapped string ends the trial.
  phase_ = Phase::Done;
}

SlideController::SlideController(const SlideParams& params,
                                 const Vec3& box_start, double tip_standoff)
    : params_(params), grip_point_(box_start), start_y_(box_start.y) {
  rig_.tip_standoff = tip_standoff;
  // The slide rig is stiff, so the force integrator needs a lower gain to
  // stay smooth, and less depth buys the same force.  The depth clamp stays
  // 2 mm short of the standoff: winding past it would cross the tip targets
  // through each other whenever contact is lost mid-squeeze.
  reg_.ki = 0.02;
  reg_.push_max = tip_standoff - 0.002;
  reg_.push = {-kApproachStandoff, -kApproachStandoff};
  grip_ = params_.hold_force;
  targets_ = rig_.pose(grip_point_, reg_.push[0], reg_.push[1], 0.0);
}

void SlideController::update(const ControlInput& in, double dt) {
  const double t = in.time;

  // Haptic feedback is the only slip trigger; schedule the re-grasp a
  // fixed reaction delay after the first SlipOnset of the ramp.
  double slip_time = 0.0;
  if (phase_ == Phase::Ramp && std::isnan(regrasp_at_) &&
      slip_onset_on_grip_fingers(in.events, &slip_time))
    regrasp_at_ = slip_time + params_.reaction_delay;

  switch (phase_) {
    case Phase::Approach: {
      const double s = progress(t, phase_start_, params_.approach_time);
      reg_.push = {-kApproachStandoff * (1.0 - s), -kApproachStandoff * (1.0 - s)};
      if (s >= 1.0) {
        phase_ = Phase::Settle;
        phase_start_ = t;
      }
      break;
    }
    case Phase::Settle: {
      grip_ = params_.hold_force;
      reg_.regulate(grip_, in, dt);
      if (t - phase_start_ >= params_.settle_time) {
        phase_ = Phase::Lift;
        phase_start_ = t;
      }
      break;
    }
    case Phase::Lift: {
      const double s = progress(t, phase_start_, params_.lift_time);
      grip_point_.y = start_y_ + params_.lift_height * ease(s);
      grip_ = params_.hold_force;
      reg_.regulate(grip_, in, dt);
      if (s >= 1.0) {
        phase_ = Phase::Hold;
        phase_start_ = t;
      }
      break;
    }
    case Phase::Hold: {
      grip_ = params_.hold_force;
      reg_.regulate(grip_, in, dt);
      if (t - phase_start_ >= params_.hold_time) {
        phase_ = Phase::Ramp;
        phase_start_ = t;
      }
      break;
    }
    case Phase::Ramp: {
      grip_ = std::max(params_.grip_floor,
                       params_.hold_force - params_.ramp_rate * (t - phase_start_));
      if (grip_ <= params_.grip_floor && std::isnan(floor_since_))
        floor_since_ = t;
      if (!std::isnan(floor_since_) && std::isnan(regrasp_at_) &&
          t - floor_since_ > params_.no_slip_grace)
        throw NoSlipOccurred("grip ramped to " + std::to_string(params_.grip_floor) +
                             " N without a slip onset");
      // The hand holds its pose through the ramp and the reaction window:
      // the box hangs from friction alone, and tracking it down would feed
      // its elastic sag back into the grip height and walk the whole
      // assembly to the floor without ever breaking the contact.
      reg_.regulate(grip_, in, dt);
      if (!std::isnan(regrasp_at_) && t >= regrasp_at_ - 1e-9) {
        grip_ = params_.regrasp_force;
        regrasp_time_ = t;
        phase_ = Phase::Regrasp;
        phase_start_ = t;
        reg_.regulate(grip_, in, dt);
      }
      break;
    }
    case Phase::Regrasp: {
      // The catch is a squeeze from a stationary hand: sliding friction at
      // the higher grip hauls the box to rest against the fingers.  Chasing
      // the box downward instead would carry the grip along with the fall
      // and nothing would ever arrest it.
      grip_ = params_.regrasp_force;
      reg_.regulate(grip_, in, dt);
      if (t - phase_start_ >= params_.post_hold) phase_ = Phase::Done;
      break;
    }
    case Phase::Done:
      break;
  }
  targets_ = rig_.pose(grip_point_, reg_.push[0], reg_.push[1], t);
}

PegController::PegController(const PegParams& params, const Vec3& peg_start,
                             double tip_standoff)
    : params_(params), peg_start_(peg_start), grip_point_(peg_start) {
  rig_.tip_standoff = tip_standoff;
  // Insertion lives or dies on lateral alignment, so the squeeze must stay
  // centered on the scripted pinch point.
  reg_.symmetric = true;
  reg_.push = {-kApproachStandoff, -kApproachStandoff};
  seg_from_ = peg_start;
  targets_ = rig_.pose(pinch_point(), reg_.push[0], reg_.push[1], 0.0);
}

// grip_point_ scripts where the peg's center should go; the fingers pinch
// above it so the peg hangs pendulum-stable instead of spinning freely
// about the grip axis.
Vec3 PegController::pinch_point() const {
  return {grip_point_.x, grip_point_.y + params_.grip_above, grip_point_.z};
}

void PegController::enter(Phase next, double time, const Vec3& from) {
  phase_ = next;
  phase_start_ = time;
  seg_from_ = from;
}

void PegController::update(const ControlInput& in, double dt) {
  const double t = in.time;
  const double offset = corrected_ ? 0.0 : params_.lateral_offset;

  switch (phase_) {
    case Phase::Approach: {
      const double s = progress(t, phase_start_, params_.approach_time);
      reg_.push = {-kApproachStandoff * (1.0 - s), -kApproachStandoff * (1.0 - s)};
      grip_point_ = seg_from_;
      if (s >= 1.0) enter(Phase::Settle, t, grip_point_);
      break;
    }
    case Phase::Settle: {
      reg_.regulate(params_.grip, in, dt);
      if (t - phase_start_ >= params_.settle_time) enter(Phase::Lift, t, grip_point_);
      break;
    }
    case Phase::Lift: {
      const double s = progress(t, phase_start_, params_.lift_time);
      grip_point_.y = lerp(seg_from_.y, params_.carry_height, ease(s));
      reg_.regulate(params_.grip, in, dt);
      if (s >= 1.0) {
        if (params_.drop_outside && !dropped_)
          enter(Phase::DropCarry, t, grip_point_);
        else
          enter(Phase::Translate, t, grip_point_);
      }
      break;
    }
    case Phase::Translate: {
      const double s = ease(progress(t, phase_start_, params_.translate_time));
      grip_point_.x = lerp(seg_from_.x, offset, s);
      grip_point_.z = lerp(seg_from_.z, 0.0, s);
      reg_.regulate(params_.grip, in, dt);
      if (s >= 1.0) {
        enter(Phase::Ascend, t, grip_point_);
        ascend_base_ = grip_point_.y;
      }
      break;
    }
    case Phase::Ascend: {
      const double script_y =
          ascend_base_ + params_.ascend_speed * (t - phase_start_);
      // Never lead the actual peg by more than ascend_lead: a blocked peg
      // gets pressed gently instead of winding up the coupling, and the
      // grip fingers stay below their slip limit.
      grip_point_.y =
          std::min(script_y, in.object.position.y + params_.ascend_lead);
      grip_point_.x = offset;
      grip_point_.z = 0.0;
      reg_.regulate(params_.grip, in, dt);
      if (params_.correct && !corrected_ &&
          t - phase_start_ >= params_.correct_after)
        enter(Phase::CorrectDown, t, grip_point_);
      break;
    }
    case Phase::CorrectDown: {
      const double s = ease(progress(t, phase_start_, params_.correct_move_time));
      grip_point_.y = lerp(seg_from_.y, params_.correct_clear_height, s);
      reg_.regulate(params_.grip, in, dt);
      if (s >= 1.0) {
        corrected_ = true;
        enter(Phase::CorrectCenter, t, grip_point_);
      }
      break;
    }
    case Phase::CorrectCenter: {
      const double s = ease(progress(t, phase_start_, params_.correct_move_time));
      grip_point_.x = lerp(seg_from_.x, 0.0, s);
      grip_point_.z = lerp(seg_from_.z, 0.0, s);
      reg_.regulate(params_.grip, in, dt);
      if (s >= 1.0) enter(Phase::CorrectSettle, t, grip_point_);
      break;
    }
    case Phase::CorrectSettle: {
      reg_.regulate(params_.grip, in, dt);
      if (t - phase_start_ >= params_.correct_settle_time) {
        enter(Phase::Ascend, t, grip_point_);
        ascend_base_ = grip_point_.y;
      }
      break;
    }
    case Phase::DropCarry: {
      const double s = ease(progress(t, phase_start_, params_.translate_time));
      grip_point_.x = lerp(seg_from_.x, params_.drop_x, s);
      reg_.regulate(params_.grip, in, dt);
      if (s >= 1.0) enter(Phase::DropRelease, t, grip_point_);
      break;
    }
    case Phase::DropRelease: {
      reg_.release();
      dropped_ = true;
      enter(Phase::DropWait, t, grip_point_);
      break;
    }
    case Phase::DropWait:
      // Fingers hold still off the table edge; the runner resets the peg
      // once it leaves the scene bounds.
      break;
    case Phase::ReturnUp: {
      const double s = ease(progress(t, phase_start_, params_.correct_move_time));
      grip_point_.y = lerp(seg_from_.y, params_.correct_clear_height, s);
      if (s >= 1.0) enter(Phase::ReturnOver, t, grip_point_);
      break;
    }
    case Phase::ReturnOver: {
      const double s = ease(progress(t, phase_start_, params_.translate_time));
      grip_point_.x = lerp(seg_from_.x, peg_start_.x, s);
      grip_point_.z = lerp(seg_from_.z, peg_start_.z, s);
      if (s >= 1.0) enter(Phase::ReturnDown, t, grip_point_);
      break;
    }
    case Phase::ReturnDown: {
      const double s = ease(progress(t, phase_start_, params_.correct_move_time));
      grip_point_.y = lerp(seg_from_.y, peg_start_.y, s);
      if (s >= 1.0) enter(Phase::Approach, t, peg_start_);
      break;
    }
  }
  targets_ = rig_.pose(pinch_point(), reg_.push[0], reg_.push[1], t);
}

void PegController::on_object_reset(double time) {
  // The peg reappears at its start pose, but the fingers are wherever the
  // script left them -- possibly far away.  Snapping the targets home would
  // whip the tips through the fresh peg, so walk back instead: up to clear
  // height, across, then down, with the fingers open the whole way.
  reg_.push = {-kApproachStandoff, -kApproachStandoff};
  enter(Phase::ReturnUp, time, grip_point_);
}

}  // namespace hapsim
