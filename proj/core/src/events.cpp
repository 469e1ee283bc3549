#include "hapsim/events.hpp"

#include <cmath>

#include "hapsim/errors.hpp"

namespace hapsim {

const char* kind_name(const EventKind& kind) {
  struct Visitor {
    const char* operator()(const ContactOnset&) const { return "contact_onset"; }
    const char* operator()(const ContactRelease&) const { return "contact_release"; }
    const char* operator()(const SlipOnset&) const { return "slip_onset"; }
    const char* operator()(const SlipVelocity&) const { return "slip_velocity"; }
    const char* operator()(const PressureUpdate&) const { return "pressure_update"; }
  };
  return std::visit(Visitor{}, kind);
}

std::vector<HapticEvent> extract_events(
    FingerContactHistory& history,
    const std::array<ContactSummary, kChannelCount>& summaries, double time,
    double pressure_delta) {
  std::vector<HapticEvent> out;
  for (int ch = 0; ch < kChannelCount; ++ch) {
    auto& entry = history.channels[ch];
    const ContactSummary& prev = entry.previous;
    const ContactSummary& curr = summaries[ch];

    if (!prev.in_contact && curr.in_contact)
      out.push_back({time, ch, ContactOnset{std::abs(curr.normal_relative_speed)}});
    if (prev.in_contact && !curr.in_contact)
      out.push_back({time, ch, ContactRelease{}});

    const bool was_dynamic = prev.friction_state == FrictionState::Dynamic;
    const bool is_dynamic = curr.friction_state == FrictionState::Dynamic;
    if (!was_dynamic && is_dynamic && curr.in_contact)
      out.push_back({time, ch, SlipOnset{}});
    if (is_dynamic)
      out.push_back({time, ch, SlipVelocity{curr.slip_speed}});
    else if (was_dynamic)
      out.push_back({time, ch, SlipVelocity{0.0}});

    const double force = curr.in_contact ? curr.total_normal_force : 0.0;
    if (std::abs(force - entry.last_sent_force) > pressure_delta) {
      out.push_back({time, ch, PressureUpdate{force}});
      entry.last_sent_force = force;
    }

    entry.previous = curr;
  }
  return out;
}

const char* to_string(Condition c) {
  switch (c) {
    case Condition::NoHaptic: return "no_haptic";
    case Condition::ContactVibrationOnly: return "contact_vibration";
    case Condition::PressureOnly: return "pressure";
    case Condition::VibrationOnly: return "vibration";
    case Condition::PressureAndVibration: return "pressure_and_vibration";
  }
  return "?";
}

Condition condition_from_string(const std::string& s) {
  for (Condition c : {Condition::NoHaptic, Condition::ContactVibrationOnly,
                      Condition::PressureOnly, Condition::VibrationOnly,
                      Condition::PressureAndVibration})
    if (s == to_string(c)) return c;
  throw ParseError("unknown haptic condition '" + s + "'");
}

bool passes_condition(const EventKind& kind, Condition condition) {
  switch (condition) {
    case Condition::NoHaptic:
      return false;
    case Condition::ContactVibrationOnly:
      return std::holds_alternative<ContactOnset>(kind) ||
             std::holds_alternative<ContactRelease>(kind);
    case Condition::PressureOnly:
      return std::holds_alternative<PressureUpdate>(kind);
    case Condition::VibrationOnly:
      return std::holds_alternative<ContactOnset>(kind) ||
             std::holds_alternative<SlipOnset>(kind) ||
             std::holds_alternative<SlipVelocity>(kind);
    case Condition::PressureAndVibration:
      return true;
  }
  return false;
}

std::vector<HapticEvent> condition_mask(const std::vector<HapticEvent>& events,
                                        Condition condition) {
  std::vector<HapticEvent> out;
  out.reserve(events.size());
  for (const HapticEvent& e : events)
    if (passes_condition(e.kind, condition)) out.push_back(e);
  return out;
}

}  // namespace hapsim
