#pragma once

#include <array>
#include <vector>

#include "hapsim/motor.hpp"
#include "hapsim/protocol.hpp"

namespace hapsim {

// Software stand-in for the device end of the link: consumes command
// frames, holds each channel's commanded current as a staircase and splits
// it into what the fingertip would feel.
//
//   static force   = motor_force(20 Hz low-pass of the command)
//   vibration      = command minus low-pass, shaped by the motor's
//                    resonance, tracked by a decaying peak envelope and
//                    scaled to Newtons by the linear-segment slope
struct EmulatorSample {
  double time = 0.0;
  std::array<double, kChannelCount> static_force{};         // N
  std::array<double, kChannelCount> vibration_amplitude{};  // N
};

class DeviceEmulator {
 public:
  explicit DeviceEmulator(MotorModel model = {}, double rate = 2000.0);

  // Staircase update from one decoded frame.
  void apply(const DecodedFrame& frame);

  // Advances every channel's filters one sample and reports the result.
  EmulatorSample tick(double time);

  double commanded(int channel) const { return command_[channel]; }
  const MotorModel& motor() const { return model_; }
  double rate() const { return rate_; }

 private:
  MotorModel model_;
  double rate_;
  double lp_alpha_;                 // 20 Hz one-pole coefficient
  double env_decay_;                // peak-envelope decay per sample
  double b0_, b1_, b2_, a1_, a2_;   // resonance biquad (unity DC gain)
  double force_per_current_;        // N per current fraction, linear segment

  std::array<double, kChannelCount> command_{};  // staircase input
  std::array<double, kChannelCount> lp_{};
  struct BiquadState {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  };
  std::array<BiquadState, kChannelCount> bq_{};
  std::array<double, kChannelCount> env_{};
};

// Offline render of a timestamped frame stream (e.g. a capture file's
// contents): applies each frame at the first tick at or after its
// timestamp and samples the emulator at its rate until `duration`.
// Decode errors in the stream are the caller's to handle beforehand;
// this consumes decoded frames only.
std::vector<EmulatorSample> render_frames(
    DeviceEmulator& emulator,
    const std::vector<std::pair<double, DecodedFrame>>& frames, double duration);

}  // namespace hapsim
