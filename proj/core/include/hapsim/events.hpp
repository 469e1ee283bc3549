#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "hapsim/hand.hpp"

namespace hapsim {

inline constexpr int kChannelCount = 9;
inline constexpr double kPressureDelta = 0.001;  // N, PressureUpdate threshold

struct ContactOnset {
  double v_impact = 0.0;  // m/s, |normal relative speed| at the onset step
};
struct ContactRelease {};
struct SlipOnset {};
struct SlipVelocity {
  double v_slip = 0.0;  // m/s; 0 marks the end of a slip episode
};
struct PressureUpdate {
  double force = 0.0;  // N
};

using EventKind =
    std::variant<ContactOnset, ContactRelease, SlipOnset, SlipVelocity, PressureUpdate>;

struct HapticEvent {
  double time = 0.0;  // s
  int channel = 0;    // 0..8
  EventKind kind;
};

const char* kind_name(const EventKind& kind);

// Per-channel state carried between extraction steps.
struct FingerContactHistory {
  struct Entry {
    ContactSummary previous;
    double last_sent_force = 0.0;  // N, last PressureUpdate payload
  };
  std::array<Entry, kChannelCount> channels;
};

// Turns one step's contact summaries into events, channel by channel:
// ContactOnset on contact gained (payload |normal relative speed|),
// ContactRelease on contact lost, SlipOnset on a (None|Static)->Dynamic
// transition while in contact, SlipVelocity each step while Dynamic plus a
// final zero when the episode ends, PressureUpdate when the normal force
// moved more than kPressureDelta from the last transmitted value.
std::vector<HapticEvent> extract_events(
    FingerContactHistory& history,
    const std::array<ContactSummary, kChannelCount>& summaries, double time,
    double pressure_delta = kPressureDelta);

enum class Condition {
  NoHaptic,
  ContactVibrationOnly,
  PressureOnly,
  VibrationOnly,
  PressureAndVibration,
};

const char* to_string(Condition c);
Condition condition_from_string(const std::string& s);  // throws ParseError

// Feedback-condition filter from the paper's user studies:
// NoHaptic drops everything; ContactVibrationOnly keeps onset/release;
// PressureOnly keeps pressure updates; VibrationOnly keeps onset and slip
// events; PressureAndVibration keeps all.
std::vector<HapticEvent> condition_mask(const std::vector<HapticEvent>& events,
                                        Condition condition);
bool passes_condition(const EventKind& kind, Condition condition);

}  // namespace hapsim
