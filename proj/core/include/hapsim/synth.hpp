#pragma once

#include <array>
#include <vector>

#include "hapsim/events.hpp"
#include "hapsim/motor.hpp"

namespace hapsim {

// High-rate current-command synthesis: a pressure baseline per channel,
// damped-sinusoid transients spawned by contact and slip onsets, and a
// continuous slip tone whose amplitude tracks slip speed.
struct SynthConfig {
  double rate = 2000.0;  // Hz, must stay well above the sim rate

  struct Transient {
    double f0 = 90.0;     // Hz, contact transient carrier (at the resonance)
    double tau = 0.020;   // s, decay constant
    double k_amp = 2.0;   // current fraction per m/s of impact speed
  } transient;

  struct Slip {
    double f_slip = 200.0;  // Hz, slip tone carrier
    double k_slip = 4.0;    // current fraction per m/s of slip speed
    double amp_max = 0.5;   // cap on slip amplitude (also slip-onset pop)
  } slip;

  MotorModel motor;  // shared by all channels
};

struct ChannelState {
  double baseline = 0.0;  // current fraction from the last PressureUpdate
  struct ActiveTransient {
    double start;      // s
    double amplitude;  // current fraction
    double frequency;  // Hz
  };
  std::vector<ActiveTransient> transients;
  bool slip_active = false;
  double slip_amplitude = 0.0;  // current fraction
};

class Synthesizer {
 public:
  explicit Synthesizer(SynthConfig config = {}) : config_(config) {}

  // Applies one event to its channel's state.  Throws UnknownChannel.
  void ingest(const HapticEvent& event);

  // Mixed output for one channel at time t, clamped to [0, 1].  Transients
  // whose envelope decayed below 1e-3 are dropped.
  double sample_channel(int channel, double t);

  std::array<double, kChannelCount> sample(double t);

  const SynthConfig& config() const { return config_; }
  const ChannelState& channel(int ch) const { return channels_.at(ch); }

 private:
  SynthConfig config_;
  std::array<ChannelState, kChannelCount> channels_;
};

}  // namespace hapsim
