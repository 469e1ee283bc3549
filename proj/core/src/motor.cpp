#include "hapsim/motor.hpp"

#include <cmath>

#include "hapsim/errors.hpp"

namespace hapsim {

double string_pull_force(double torque, double axle_radius) {
  if (axle_radius <= 0.0)
    throw ZeroRadius("axle radius must be positive, got " + std::to_string(axle_radius));
  return torque / axle_radius;
}

double capstan_tension(double t0, const CapstanParams& params) {
  if (t0 < 0.0)
    throw Error("capstan tension requires T0 >= 0, got " + std::to_string(t0));
  return t0 * std::exp(params.mu * params.theta);
}

double motor_force(double current, const MotorModel& model) {
  if (current < 0.0 || current > 1.0)
    throw OutOfRangeCurrent("current fraction " + std::to_string(current) +
                            " outside [0, 1]");
  if (current <= model.i_dead) return 0.0;
  if (current >= model.i_sat) return model.f_sat;
  return model.f_sat * (current - model.i_dead) / (model.i_sat - model.i_dead);
}

double vibration_gain(double frequency, const MotorModel& model) {
  const double r = frequency / model.f_res;
  const double denom = (1.0 - r * r) * (1.0 - r * r) + (r / model.q) * (r / model.q);
  const double resonance = 1.0 / std::sqrt(denom);

  double rolloff = 1.0;
  if (frequency > model.f_current_stable)
    rolloff = std::max(0.0, 1.0 - (frequency - model.f_current_stable) /
                                      model.f_current_stable);
  return resonance * rolloff;
}

CurrentCommand force_to_current(double force, const MotorModel& model) {
  if (force < 0.0)
    throw NegativeForce("force " + std::to_string(force) + " N is negative");
  if (force == 0.0) return {0.0, false};
  if (force > model.f_sat) return {model.i_sat, true};
  return {model.i_dead + force * (model.i_sat - model.i_dead) / model.f_sat, false};
}

}  // namespace hapsim
