#pragma once

#include <string>

namespace hapsim {

// Coreless DC motor driving the fingertip string.  Static force follows a
// deadband / linear / saturation curve against commanded current fraction;
// vibration response is a second-order resonance on top of a current
// roll-off that begins at f_current_stable.
struct MotorModel {
  std::string name = "612";
  double f_sat = 0.260;    // N, pull force at and beyond the knee
  double i_sat = 0.15;     // current fraction at the knee
  double i_dead = kDeadband612;  // current fraction where force starts
  double axle_radius = 4e-4;     // m
  double f_res = 90.0;           // Hz, vibration resonance center
  double q = 4.0;                // resonance quality factor
  double f_current_stable = 1500.0;  // Hz, current roll-off corner

  // Deadband calibrated so the 612 curve passes through both measured
  // anchors: 0.260 N at 15% current and the 0.031 N perception threshold
  // at 4% current.
  static constexpr double kDeadband612 =
      (0.260 * 0.04 - 0.031 * 0.15) / (0.260 - 0.031);

  static MotorModel m612() { return MotorModel{}; }
  static MotorModel m716() {
    MotorModel m;
    m.name = "716";
    m.f_sat = 0.540;
    m.i_sat = 0.50;  // knee position unreported for the 716; configurable
    return m;
  }

  bool valid() const {
    return 0.0 <= i_dead && i_dead < i_sat && i_sat <= 1.0 && f_sat > 0.0 &&
           axle_radius > 0.0 && f_res > 0.0 && q > 0.0 && f_current_stable > 0.0;
  }
};

// F = T / r for a string wound on the motor axle.  Throws ZeroRadius.
double string_pull_force(double torque, double axle_radius);

struct CapstanParams {
  double mu = 0.0;     // string/cylinder friction coefficient
  double theta = 0.0;  // rad, wrap angle
};

// T1 = T0 * e^(mu * theta).  Throws on negative T0.
double capstan_tension(double t0, const CapstanParams& params);

// Static pull force for a commanded current fraction in [0, 1]:
// 0 up to i_dead, linear from (i_dead, 0) to (i_sat, f_sat), then flat.
// Throws OutOfRangeCurrent outside [0, 1].
double motor_force(double current, const MotorModel& model);

// Vibration amplitude per unit current amplitude, normalized to 1 at DC:
// |H(f)| of a second-order resonance (gain q at f_res), times a current
// roll-off factor of 1 below f_current_stable that falls linearly to 0 at
// twice that frequency.
double vibration_gain(double frequency, const MotorModel& model);

struct CurrentCommand {
  double current = 0.0;  // fraction [0, 1]
  bool saturated = false;
};

// Inverse of motor_force on [0, f_sat]: 0 N maps to 0, anything above
// f_sat clamps to i_sat with the saturated flag set.  Throws NegativeForce.
CurrentCommand force_to_current(double force, const MotorModel& model);

}  // namespace hapsim
