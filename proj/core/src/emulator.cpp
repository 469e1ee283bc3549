#include "hapsim/emulator.hpp"

#include <cmath>
#include <numbers>

namespace hapsim {

namespace {
constexpr double kStaticCutoff = 20.0;  // Hz, pressure/vibration split
constexpr double kEnvelopeTau = 0.05;   // s, vibration peak tracker
}

DeviceEmulator::DeviceEmulator(MotorModel model, double rate)
    : model_(model), rate_(rate) {
  lp_alpha_ = 1.0 - std::exp(-2.0 * std::numbers::pi * kStaticCutoff / rate_);
  env_decay_ = std::exp(-1.0 / (kEnvelopeTau * rate_));

  // Resonant second-order low-pass, unity gain at DC, gain ~q at f_res.
  const double w0 = 2.0 * std::numbers::pi * model_.f_res / rate_;
  const double alpha = std::sin(w0) / (2.0 * model_.q);
  const double a0 = 1.0 + alpha;
  b0_ = (1.0 - std::cos(w0)) / (2.0 * a0);
  b1_ = (1.0 - std::cos(w0)) / a0;
  b2_ = b0_;
  a1_ = -2.0 * std::cos(w0) / a0;
  a2_ = (1.0 - alpha) / a0;

  force_per_current_ = model_.f_sat / (model_.i_sat - model_.i_dead);
}

void DeviceEmulator::apply(const DecodedFrame& frame) {
  for (const auto& [channel, fraction] : frame.updates) command_[channel] = fraction;
}

EmulatorSample DeviceEmulator::tick(double time) {
  EmulatorSample out;
  out.time = time;
  for (int ch = 0; ch < kChannelCount; ++ch) {
    const double x = command_[ch];
    lp_[ch] += lp_alpha_ * (x - lp_[ch]);
    out.static_force[ch] = motor_force(lp_[ch], model_);

    const double band = x - lp_[ch];
    BiquadState& s = bq_[ch];
    const double y = b0_ * band + b1_ * s.x1 + b2_ * s.x2 - a1_ * s.y1 - a2_ * s.y2;
    s.x2 = s.x1;
    s.x1 = band;
    s.y2 = s.y1;
    s.y1 = y;

    env_[ch] = std::max(std::abs(y), env_[ch] * env_decay_);
    out.vibration_amplitude[ch] = env_[ch] * force_per_current_;
  }
  return out;
}

std::vector<EmulatorSample> render_frames(
    DeviceEmulator& emulator,
    const std::vector<std::pair<double, DecodedFrame>>& frames, double duration) {
  std::vector<EmulatorSample> out;
  const double dt = 1.0 / emulator.rate();
  std::size_t next = 0;
  const std::size_t ticks = static_cast<std::size_t>(std::ceil(duration * emulator.rate()));
  out.reserve(ticks);
  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = (k + 1) * dt;
    while (next < frames.size() && frames[next].first <= t) {
      emulator.apply(frames[next].second);
      ++next;
    }
    out.push_back(emulator.tick(t));
  }
  return out;
}

}  // namespace hapsim
