#include "hapsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hapsim/errors.hpp"

namespace hapsim {

namespace {
constexpr double kEnvelopeFloor = 1e-3;
}

void Synthesizer::ingest(const HapticEvent& event) {
  if (event.channel < 0 || event.channel >= kChannelCount)
    throw UnknownChannel("channel " + std::to_string(event.channel) +
                         " outside [0, " + std::to_string(kChannelCount) + ")");
  ChannelState& ch = channels_[event.channel];

  struct Visitor {
    Synthesizer& synth;
    ChannelState& ch;
    double time;

    void operator()(const ContactOnset& e) const {
      const double amp = std::min(synth.config_.transient.k_amp * e.v_impact, 1.0);
      if (amp > 0.0)
        ch.transients.push_back({time, amp, synth.config_.transient.f0});
    }
    void operator()(const ContactRelease&) const {
      ch.baseline = 0.0;
      ch.slip_active = false;
      ch.slip_amplitude = 0.0;
      // Spawned transients keep decaying.
    }
    void operator()(const SlipOnset&) const {
      ch.transients.push_back(
          {time, synth.config_.slip.amp_max, synth.config_.slip.f_slip});
    }
    void operator()(const SlipVelocity& e) const {
      if (e.v_slip > 0.0) {
        ch.slip_active = true;
        ch.slip_amplitude =
            std::min(synth.config_.slip.k_slip * e.v_slip, synth.config_.slip.amp_max);
      } else {
        ch.slip_active = false;
        ch.slip_amplitude = 0.0;
      }
    }
    void operator()(const PressureUpdate& e) const {
      ch.baseline = force_to_current(e.force, synth.config_.motor).current;
    }
  };
  std::visit(Visitor{*this, ch, event.time}, event.kind);
}

double Synthesizer::sample_channel(int channel, double t) {
  if (channel < 0 || channel >= kChannelCount)
    throw UnknownChannel("channel " + std::to_string(channel) + " outside [0, " +
                         std::to_string(kChannelCount) + ")");
  ChannelState& ch = channels_[channel];
  const double tau = config_.transient.tau;

  ch.transients.erase(
      std::remove_if(ch.transients.begin(), ch.transients.end(),
                     [&](const ChannelState::ActiveTransient& tr) {
                       return t >= tr.start &&
                              tr.amplitude * std::exp(-(t - tr.start) / tau) <
                                  kEnvelopeFloor;
                     }),
      ch.transients.end());

  double out = ch.baseline;
  for (const ChannelState::ActiveTransient& tr : ch.transients) {
    const double dt = t - tr.start;
    if (dt < 0.0) continue;
    out += tr.amplitude * std::exp(-dt / tau) *
           std::sin(2.0 * std::numbers::pi * tr.frequency * dt);
  }
  if (ch.slip_active)
    out += ch.slip_amplitude * std::sin(2.0 * std::numbers::pi * config_.slip.f_slip * t);

  return std::clamp(out, 0.0, 1.0);
}

std::array<double, kChannelCount> Synthesizer::sample(double t) {
  std::array<double, kChannelCount> out;
  for (int ch = 0; ch < kChannelCount; ++ch) out[ch] = sample_channel(ch, t);
  return out;
}

}  // namespace hapsim
