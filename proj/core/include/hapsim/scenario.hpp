#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hapsim/controllers.hpp"
#include "hapsim/emulator.hpp"
#include "hapsim/events.hpp"
#include "hapsim/motor.hpp"
#include "hapsim/protocol.hpp"
#include "hapsim/synth.hpp"
#include "hapsim/world.hpp"

namespace hapsim {

// The three scripted tasks, each a desk-scale stand-in for one of the
// device's user studies: minimal-grip hunting, slip-and-regrasp, and
// upward peg insertion through a square hole.
enum class ScenarioKind { GraspMinForce, SlideRegrasp, PegInHole };

const char* to_string(ScenarioKind k);
ScenarioKind scenario_from_string(const std::string& s);  // throws ParseError

struct ObjectParams {
  Vec3 half_extents;       // m
  double density = 1.0;    // g/cm^3
  double mu_static = 0.5;
  double mu_dynamic = 0.4;
};

struct LinkConfig {
  int delta_threshold_raw = kDefaultDeltaRaw;
  double heartbeat_period = kHeartbeatPeriod;
};

// Full runner configuration.  JSON schema (all fields optional except
// "scenario"; omitted ones take the scenario's defaults):
//
// {
//   "scenario": "grasp_min_force" | "slide_regrasp" | "peg_in_hole",
//   "condition": "pressure",            // see haptic condition names
//   "seed": 1,
//   "break_force": 15.0,                // N, string-snap threshold
//   "timeout": 120.0,                   // s simulated
//   "tracking_noise": 1e-5,             // m, per-axis target jitter
//   "realtime": false,
//   "object": { "half_extents": [x,y,z], "density": g_cm3,
//               "mu_static": .., "mu_dynamic": .. },
//   "coupling": { "k_lin": .., "c_lin": .., "k_ang": .., "c_ang": ..,
//                 "max_force": .. },
//   "controller": { ... scenario-specific, see GraspParams/SlideParams/
//                   PegParams fields by the same snake_case names ... },
//   "synth": { "rate": 2000.0, "transient": {"f0","tau","k_amp"},
//              "slip": {"f_slip","k_slip","amp_max"} },
//   "motor": { "name": "612" | "716" } or full motor parameters,
//   "link": { "delta_threshold_raw": 8, "heartbeat_period": 0.1 }
// }
struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::GraspMinForce;
  Condition condition = Condition::PressureOnly;
  std::uint64_t seed = 1;
  double break_force = 15.0;  // N
  double timeout = 120.0;     // s
  double tracking_noise = 1e-5;  // m
  bool realtime = false;
  ObjectParams object;
  CouplingParams coupling;
  GraspParams grasp;
  SlideParams slide;
  PegParams peg;
  SynthConfig synth;
  MotorModel motor;
  LinkConfig link;
};

ScenarioConfig default_config(ScenarioKind kind);
ScenarioConfig config_from_json_text(const std::string& text,
                                     const std::string& origin);
ScenarioConfig load_config(const std::string& path);
std::string config_to_json(const ScenarioConfig& config);

// The §4 study ran three feedback conditions, the §5 study four; a config
// asking for a condition outside its scenario's set is rejected.
bool condition_valid(ScenarioKind kind, Condition condition);
void validate(const ScenarioConfig& config);  // throws ParseError

struct RunMetrics {
  std::string scenario;
  std::string condition;
  std::uint64_t seed = 0;
  bool success = false;
  double duration = 0.0;  // s simulated
  // Grasp: smallest thumb normal force that still held the cube.
  double min_hold_force = 0.0;
  bool min_hold_defined = false;
  // Slide: T2 (first physics slip), T1 (re-grasp command), T1 - T2, and
  // the measured thumb force when the slip began.
  double slip_time = 0.0;
  double regrasp_time = 0.0;
  double latency = 0.0;
  double slip_onset_grip = 0.0;
  bool slip_defined = false;
  bool regrasp_defined = false;
  // Peg: completion.
  double completion_time = 0.0;
  bool completed = false;
  int break_count = 0;
  int reset_count = 0;
  std::map<std::string, std::string> trace_files;  // kind -> file name
};

std::string metrics_to_json(const RunMetrics& m);

struct SignalSample {
  double t = 0.0;
  std::array<double, kChannelCount> values{};
};

// Everything a run produces, kept in memory for assertions; the same data
// streams to the out directory when one is given.
struct RunOutput {
  RunMetrics metrics;
  std::vector<HapticEvent> device_events;  // after condition masking
  std::vector<SignalSample> signal;
  std::vector<EmulatorSample> timeline;
  std::vector<std::pair<double, std::vector<std::uint8_t>>> capture;

  struct StepRow {
    double time = 0.0;
    std::array<double, kChannelCount> normal{};  // fingertip N per channel
    std::array<FrictionState, kChannelCount> state{};
    Vec3 object_position;
    Vec3 object_velocity;
  };
  std::vector<StepRow> steps;
};

// Runs the configured scenario with its scripted controller.  When
// out_dir is nonempty the trace set is written there and the file names
// land in metrics.trace_files.  Deterministic for a fixed config+seed.
RunOutput run_scenario(const ScenarioConfig& config,
                       const std::string& out_dir = "");

// Re-renders a recorded (already masked) event log through synth, link,
// and emulated device, without physics.  A run's own event log replayed
// this way reproduces its signal trace, capture, and timeline exactly.
RunOutput replay_events(const std::vector<HapticEvent>& events,
                        const ScenarioConfig& config,
                        const std::string& out_dir = "");

}  // namespace hapsim
