#include "hapsim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <thread>

#include "hapsim/errors.hpp"
#include "hapsim/scene.hpp"
#include "hapsim/trace.hpp"
#include "json.hpp"

namespace hapsim {

using json = nlohmann::json;

namespace {

// Peg task geometry: a 30x30 cm plate whose lower surface sits 24 cm
// above the table, 2.5 cm thick, with a centered square hole; the plate
// is assembled from four kinematic slabs whose inner faces form the hole
// walls.  The table is finite so a dropped peg can leave the scene.
constexpr double kPlateLower = 0.24;       // m
constexpr double kPlateThickness = 0.025;  // m
constexpr double kPlateHalfSpan = 0.15;    // m
constexpr double kApertureHalf = 0.01975;  // m, half of 3.95 cm
constexpr double kTableHalfSpan = 0.2;     // m
constexpr double kTableHalfThickness = 0.01;
constexpr double kPegStartX = 0.08;  // m, peg stands here on the table

// Out-of-scene bounds triggering an object reset.
constexpr double kBoundXZ = 0.45;
constexpr double kBoundYBelow = -0.05;

constexpr double kUpAxisMin = 0.99;  // peg axis alignment for success

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(std::string(what) + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::GraspMinForce: return "grasp_min_force";
    case ScenarioKind::SlideRegrasp: return "slide_regrasp";
    case ScenarioKind::PegInHole: return "peg_in_hole";
  }
  return "?";
}

ScenarioKind scenario_from_string(const std::string& s) {
  for (ScenarioKind k : {ScenarioKind::GraspMinForce, ScenarioKind::SlideRegrasp,
                         ScenarioKind::PegInHole})
    if (s == to_string(k)) return k;
  throw ParseError("unknown scenario '" + s + "'");
}

ScenarioConfig default_config(ScenarioKind kind) {
  ScenarioConfig c;
  c.scenario = kind;
  switch (kind) {
    case ScenarioKind::GraspMinForce:
      // The study's cube: 5 cm, density 1.00 g/cm^3, very grippy.
      c.object = {{0.025, 0.025, 0.025}, 1.0, 4.0, 3.0};
      c.condition = Condition::PressureOnly;
      c.break_force = 15.0;
      break;
    case ScenarioKind::SlideRegrasp:
      // Slippery box, 15 cm long (z) and 5 cm square in cross-section.
      c.object = {{0.025, 0.025, 0.075}, 1.0, 0.15, 0.10};
      c.condition = Condition::PressureAndVibration;
      // The scripted re-grasp squeezes at 35 N on purpose; the snap rule
      // would otherwise cut the trial short, so this object is tougher.
      c.break_force = 60.0;
      // The clamp must leave vertical headroom above the re-grasp demand:
      // a norm-saturated coupling sheds the component that holds the tip's
      // height and the pinch pops the box out of the grip.
      c.coupling.max_force = 60.0;
      // Point contacts have no roll resistance, so a pinched box stays
      // roll-stable only while the tip tracking stiffness beats the grip
      // couple: k > N/r_face.  The re-grasp squeeze needs ~1400 N/m; a
      // stiffer rig mirrors the high-rate servo this trial runs on.
      c.coupling.k_lin = 2000.0;
      break;
    case ScenarioKind::PegInHole:
      // 3.5 x 3.5 x 10 cm peg, light enough for a 2.5 N pinch.
      c.object = {{0.0175, 0.05, 0.0175}, 0.5, 1.0, 0.8};
      c.condition = Condition::PressureAndVibration;
      // Insertion jams can spike contact forces well past the grasp
      // scenario's 15 N snap rule without meaning anything broke.
      c.break_force = 200.0;
      break;
  }
  return c;
}

bool condition_valid(ScenarioKind kind, Condition condition) {
  switch (kind) {
    case ScenarioKind::GraspMinForce:
      return condition == Condition::NoHaptic ||
             condition == Condition::ContactVibrationOnly ||
             condition == Condition::PressureOnly;
    case ScenarioKind::SlideRegrasp:
      return condition == Condition::NoHaptic ||
             condition == Condition::PressureOnly ||
             condition == Condition::VibrationOnly ||
             condition == Condition::PressureAndVibration;
    case ScenarioKind::PegInHole:
      return true;
  }
  return false;
}

void validate(const ScenarioConfig& c) {
  if (!condition_valid(c.scenario, c.condition))
    throw ParseError(std::string("condition '") + to_string(c.condition) +
                     "' is not part of the " + to_string(c.scenario) +
                     " study design");
  const Vec3& he = c.object.half_extents;
  if (he.x <= 0.0 || he.y <= 0.0 || he.z <= 0.0)
    throw ParseError("object half_extents must be positive");
  if (c.object.density <= 0.0)
    throw ParseError("object density must be positive");
  if (c.object.mu_dynamic < 0.0 || c.object.mu_dynamic > c.object.mu_static)
    throw ParseError("object friction must satisfy 0 <= mu_dynamic <= mu_static");
  if (c.break_force <= 0.0) throw ParseError("break_force must be positive");
  if (c.timeout <= 0.0) throw ParseError("timeout must be positive");
  if (c.tracking_noise < 0.0)
    throw ParseError("tracking_noise must be non-negative");
  if (c.slide.reaction_delay < 0.0)
    throw ParseError("reaction_delay must be non-negative");
  if (c.synth.rate < 1.0 / 0.01)
    throw ParseError("synth rate must stay above the sim rate");
  if (!c.motor.valid()) throw ParseError("invalid motor model");
  if (c.link.delta_threshold_raw < 0 || c.link.delta_threshold_raw > 0xFFFF)
    throw ParseError("delta_threshold_raw must fit in 16 bits");
  if (c.link.heartbeat_period <= 0.0)
    throw ParseError("heartbeat_period must be positive");
  for (size_t i = 1; i < c.grasp.profile.size(); ++i)
    if (c.grasp.profile[i].first <= c.grasp.profile[i - 1].first)
      throw ParseError("grip profile times must increase");
}

ScenarioConfig config_from_json_text(const std::string& text,
                                     const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(origin + ": config must be an object");
  if (!j.contains("scenario"))
    throw ParseError(origin + ": missing required field 'scenario'");

  static const std::set<std::string> known{
      "scenario", "condition", "seed",  "break_force", "timeout",
      "tracking_noise", "realtime", "object", "coupling", "controller",
      "synth", "motor", "link"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key))
      throw ParseError(origin + ": unknown config field '" + key + "'");
  }

  ScenarioConfig c =
      default_config(scenario_from_string(j["scenario"].get<std::string>()));

  if (j.contains("condition"))
    c.condition = condition_from_string(j["condition"].get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.break_force = j.value("break_force", c.break_force);
  c.timeout = j.value("timeout", c.timeout);
  c.tracking_noise = j.value("tracking_noise", c.tracking_noise);
  c.realtime = j.value("realtime", c.realtime);

  if (j.contains("object")) {
    const json& o = j["object"];
    if (o.contains("half_extents"))
      c.object.half_extents = vec3_from(o["half_extents"], "object.half_extents");
    c.object.density = o.value("density", c.object.density);
    c.object.mu_static = o.value("mu_static", c.object.mu_static);
    c.object.mu_dynamic = o.value("mu_dynamic", c.object.mu_dynamic);
  }
  if (j.contains("coupling")) {
    const json& o = j["coupling"];
    c.coupling.k_lin = o.value("k_lin", c.coupling.k_lin);
    c.coupling.c_lin = o.value("c_lin", c.coupling.c_lin);
    c.coupling.k_ang = o.value("k_ang", c.coupling.k_ang);
    c.coupling.c_ang = o.value("c_ang", c.coupling.c_ang);
    c.coupling.max_force = o.value("max_force", c.coupling.max_force);
  }
  if (j.contains("controller")) {
    const json& o = j["controller"];
    switch (c.scenario) {
      case ScenarioKind::GraspMinForce: {
        GraspParams& g = c.grasp;
        g.approach_time = o.value("approach_time", g.approach_time);
        g.lift_height = o.value("lift_height", g.lift_height);
        g.lift_time = o.value("lift_time", g.lift_time);
        g.start_grip = o.value("start_grip", g.start_grip);
        g.decrement = o.value("decrement", g.decrement);
        g.dwell = o.value("dwell", g.dwell);
        g.drop_threshold = o.value("drop_threshold", g.drop_threshold);
        if (o.contains("profile")) {
          g.profile.clear();
          for (const json& knot : o["profile"]) {
            if (!knot.is_array() || knot.size() != 2)
              throw ParseError(origin + ": profile knots must be [t, grip] pairs");
            g.profile.emplace_back(knot[0].get<double>(), knot[1].get<double>());
          }
        }
        break;
      }
      case ScenarioKind::SlideRegrasp: {
        SlideParams& s = c.slide;
        s.approach_time = o.value("approach_time", s.approach_time);
        s.settle_time = o.value("settle_time", s.settle_time);
        s.lift_height = o.value("lift_height", s.lift_height);
        s.lift_time = o.value("lift_time", s.lift_time);
        s.hold_force = o.value("hold_force", s.hold_force);
        s.hold_time = o.value("hold_time", s.hold_time);
        s.ramp_rate = o.value("ramp_rate", s.ramp_rate);
        s.grip_floor = o.value("grip_floor", s.grip_floor);
        s.regrasp_force = o.value("regrasp_force", s.regrasp_force);
        s.reaction_delay = o.value("reaction_delay", s.reaction_delay);
        s.post_hold = o.value("post_hold", s.post_hold);
        s.no_slip_grace = o.value("no_slip_grace", s.no_slip_grace);
        break;
      }
      case ScenarioKind::PegInHole: {
        PegParams& p = c.peg;
        p.grip = o.value("grip", p.grip);
        p.grip_above = o.value("grip_above", p.grip_above);
        p.approach_time = o.value("approach_time", p.approach_time);
        p.settle_time = o.value("settle_time", p.settle_time);
        p.carry_height = o.value("carry_height", p.carry_height);
        p.lift_time = o.value("lift_time", p.lift_time);
        p.translate_time = o.value("translate_time", p.translate_time);
        p.ascend_speed = o.value("ascend_speed", p.ascend_speed);
        p.ascend_lead = o.value("ascend_lead", p.ascend_lead);
        p.lateral_offset = o.value("lateral_offset", p.lateral_offset);
        p.correct = o.value("correct", p.correct);
        p.correct_after = o.value("correct_after", p.correct_after);
        p.correct_move_time = o.value("correct_move_time", p.correct_move_time);
        p.correct_clear_height =
            o.value("correct_clear_height", p.correct_clear_height);
        p.correct_settle_time =
            o.value("correct_settle_time", p.correct_settle_time);
        p.drop_outside = o.value("drop_outside", p.drop_outside);
        p.drop_x = o.value("drop_x", p.drop_x);
        break;
      }
    }
  }
  if (j.contains("synth")) {
    const json& o = j["synth"];
    c.synth.rate = o.value("rate", c.synth.rate);
    if (o.contains("transient")) {
      const json& tr = o["transient"];
      c.synth.transient.f0 = tr.value("f0", c.synth.transient.f0);
      c.synth.transient.tau = tr.value("tau", c.synth.transient.tau);
      c.synth.transient.k_amp = tr.value("k_amp", c.synth.transient.k_amp);
    }
    if (o.contains("slip")) {
      const json& sl = o["slip"];
      c.synth.slip.f_slip = sl.value("f_slip", c.synth.slip.f_slip);
      c.synth.slip.k_slip = sl.value("k_slip", c.synth.slip.k_slip);
      c.synth.slip.amp_max = sl.value("amp_max", c.synth.slip.amp_max);
    }
  }
  if (j.contains("motor")) c.motor = motor_from_json_text(j["motor"].dump());
  if (j.contains("link")) {
    const json& o = j["link"];
    c.link.delta_threshold_raw =
        o.value("delta_threshold_raw", c.link.delta_threshold_raw);
    c.link.heartbeat_period = o.value("heartbeat_period", c.link.heartbeat_period);
  }

  validate(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text, path);
}

std::string config_to_json(const ScenarioConfig& c) {
  json controller;
  switch (c.scenario) {
    case ScenarioKind::GraspMinForce: {
      const GraspParams& g = c.grasp;
      controller = {{"approach_time", g.approach_time},
                    {"lift_height", g.lift_height},
                    {"lift_time", g.lift_time},
                    {"start_grip", g.start_grip},
                    {"decrement", g.decrement},
                    {"dwell", g.dwell},
                    {"drop_threshold", g.drop_threshold}};
      if (!g.profile.empty()) {
        json profile = json::array();
        for (const auto& [t, grip] : g.profile)
          profile.push_back(json::array({t, grip}));
        controller["profile"] = profile;
      }
      break;
    }
    case ScenarioKind::SlideRegrasp: {
      const SlideParams& s = c.slide;
      controller = {{"approach_time", s.approach_time},
                    {"settle_time", s.settle_time},
                    {"lift_height", s.lift_height},
                    {"lift_time", s.lift_time},
                    {"hold_force", s.hold_force},
                    {"hold_time", s.hold_time},
                    {"ramp_rate", s.ramp_rate},
                    {"grip_floor", s.grip_floor},
                    {"regrasp_force", s.regrasp_force},
                    {"reaction_delay", s.reaction_delay},
                    {"post_hold", s.post_hold},
                    {"no_slip_grace", s.no_slip_grace}};
      break;
    }
    case ScenarioKind::PegInHole: {
      const PegParams& p = c.peg;
      controller = {{"grip", p.grip},
                    {"grip_above", p.grip_above},
                    {"approach_time", p.approach_time},
                    {"settle_time", p.settle_time},
                    {"carry_height", p.carry_height},
                    {"lift_time", p.lift_time},
                    {"translate_time", p.translate_time},
                    {"ascend_speed", p.ascend_speed},
                    {"ascend_lead", p.ascend_lead},
                    {"lateral_offset", p.lateral_offset},
                    {"correct", p.correct},
                    {"correct_after", p.correct_after},
                    {"correct_move_time", p.correct_move_time},
                    {"correct_clear_height", p.correct_clear_height},
                    {"correct_settle_time", p.correct_settle_time},
                    {"drop_outside", p.drop_outside},
                    {"drop_x", p.drop_x}};
      break;
    }
  }

  json j{{"scenario", to_string(c.scenario)},
         {"condition", to_string(c.condition)},
         {"seed", c.seed},
         {"break_force", c.break_force},
         {"timeout", c.timeout},
         {"tracking_noise", c.tracking_noise},
         {"realtime", c.realtime},
         {"object",
          {{"half_extents", to_json(c.object.half_extents)},
           {"density", c.object.density},
           {"mu_static", c.object.mu_static},
           {"mu_dynamic", c.object.mu_dynamic}}},
         {"coupling",
          {{"k_lin", c.coupling.k_lin},
           {"c_lin", c.coupling.c_lin},
           {"k_ang", c.coupling.k_ang},
           {"c_ang", c.coupling.c_ang},
           {"max_force", c.coupling.max_force}}},
         {"controller", controller},
         {"synth",
          {{"rate", c.synth.rate},
           {"transient",
            {{"f0", c.synth.transient.f0},
             {"tau", c.synth.transient.tau},
             {"k_amp", c.synth.transient.k_amp}}},
           {"slip",
            {{"f_slip", c.synth.slip.f_slip},
             {"k_slip", c.synth.slip.k_slip},
             {"amp_max", c.synth.slip.amp_max}}}}},
         {"motor", json::parse(motor_to_json(c.motor))},
         {"link",
          {{"delta_threshold_raw", c.link.delta_threshold_raw},
           {"heartbeat_period", c.link.heartbeat_period}}}};
  return j.dump(2) + "\n";
}

std::string metrics_to_json(const RunMetrics& m) {
  json j{{"scenario", m.scenario}, {"condition", m.condition},
         {"seed", m.seed},         {"success", m.success},
         {"duration_s", m.duration}, {"break_count", m.break_count},
         {"reset_count", m.reset_count}};
  if (m.min_hold_defined) j["min_hold_force_n"] = m.min_hold_force;
  if (m.slip_defined) {
    j["slip_time_s"] = m.slip_time;
    j["slip_onset_grip_n"] = m.slip_onset_grip;
  }
  if (m.regrasp_defined) {
    j["regrasp_time_s"] = m.regrasp_time;
    j["latency_s"] = m.latency;
  }
  if (m.completed) j["completion_time_s"] = m.completion_time;
  if (!m.trace_files.empty()) {
    json files;
    for (const auto& [kind, name] : m.trace_files) files[kind] = name;
    j["trace_files"] = files;
  }
  return j.dump(2) + "\n";
}

namespace {

RigidBody make_kinematic_box(const std::string& name, const Vec3& center,
                             const Vec3& half, const Material& material) {
  RigidBody b;
  b.name = name;
  b.kinematic = true;
  b.shape = BoxShape{half};
  b.material = material;
  b.pose.position = center;
  return b;
}

struct Scene {
  World world;
  BodyId object = kInvalidBody;
  Vec3 object_start;
};

Scene build_scene(const ScenarioConfig& cfg) {
  Scene scene;
  World& w = scene.world;

  Material env_mat;
  env_mat.mu_static = cfg.object.mu_static;
  env_mat.mu_dynamic = cfg.object.mu_dynamic;

  RigidBody object;
  object.name = cfg.scenario == ScenarioKind::PegInHole ? "peg"
                : cfg.scenario == ScenarioKind::SlideRegrasp ? "box"
                                                             : "cube";
  object.shape = BoxShape{cfg.object.half_extents};
  object.material.mu_static = cfg.object.mu_static;
  object.material.mu_dynamic = cfg.object.mu_dynamic;
  object.material.density = cfg.object.density;
  object.mass = cfg.object.density * 1000.0 * shape_volume(object.shape);
  object.inertia = shape_inertia(object.shape, object.mass);

  if (cfg.scenario == ScenarioKind::PegInHole) {
    w.add_body(make_kinematic_box("table", {0.0, -kTableHalfThickness, 0.0},
                                  {kTableHalfSpan, kTableHalfThickness,
                                   kTableHalfSpan},
                                  env_mat));
    const double plate_center_y = kPlateLower + 0.5 * kPlateThickness;
    const double side_center = 0.5 * (kApertureHalf + kPlateHalfSpan);
    const double side_half = 0.5 * (kPlateHalfSpan - kApertureHalf);
    const double half_thick = 0.5 * kPlateThickness;
    w.add_body(make_kinematic_box(
        "plate_west", {-side_center, plate_center_y, 0.0},
        {side_half, half_thick, kPlateHalfSpan}, env_mat));
    w.add_body(make_kinematic_box(
        "plate_east", {side_center, plate_center_y, 0.0},
        {side_half, half_thick, kPlateHalfSpan}, env_mat));
    w.add_body(make_kinematic_box(
        "plate_north", {0.0, plate_center_y, side_center},
        {kApertureHalf, half_thick, side_half}, env_mat));
    w.add_body(make_kinematic_box(
        "plate_south", {0.0, plate_center_y, -side_center},
        {kApertureHalf, half_thick, side_half}, env_mat));
    object.pose.position = {kPegStartX, cfg.object.half_extents.y, 0.0};
  } else {
    RigidBody ground;
    ground.name = "ground";
    ground.kinematic = true;
    ground.shape = HalfSpaceShape{{0.0, 1.0, 0.0}, 0.0};
    ground.material = env_mat;
    w.add_body(std::move(ground));
    object.pose.position = {0.0, cfg.object.half_extents.y, 0.0};
  }

  scene.object_start = object.pose.position;
  scene.object = w.add_body(std::move(object));
  return scene;
}

class ScenarioRun {
 public:
  ScenarioRun(const ScenarioConfig& cfg, const std::string& out_dir)
      : cfg_(cfg), out_dir_(out_dir), rng_(cfg.seed) {}

  RunOutput run();

 private:
  void open_writers();
  void apply_target_noise();
  void process_step(double t1);
  void tick_synth_window(double t1);
  void reset_object(double t1);
  void finish(double end_time);

  ScenarioConfig cfg_;
  std::string out_dir_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};

  World world_;
  BodyId object_ = kInvalidBody;
  Vec3 object_start_;
  SimHand hand_;
  std::unique_ptr<HandController> controller_;
  TrackedHandPose current_targets_;

  FingerContactHistory history_;
  Synthesizer synth_{SynthConfig{}};
  std::unique_ptr<LinkSession> link_;
  DeviceEmulator emulator_;
  long long ticks_done_ = 0;

  std::array<ContactSummary, kChannelCount> touch_{};
  std::vector<HapticEvent> pending_;
  std::set<BodyPair> object_env_pairs_;
  bool break_armed_ = true;
  double y_at_slip_ = 0.0;
  bool success_latched_ = false;
  bool fail_latched_ = false;
  double completion_time_ = 0.0;

  RunOutput out_;

  std::unique_ptr<PhysicsTraceWriter> w_physics_;
  std::unique_ptr<ContactTraceWriter> w_contacts_;
  std::unique_ptr<EventLogWriter> w_events_;
  std::unique_ptr<SignalTraceWriter> w_signal_;
  std::unique_ptr<TimelineWriter> w_timeline_;
};

void ScenarioRun::open_writers() {
  if (out_dir_.empty()) return;
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir_, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir_ + "'");
  auto path = [&](const char* name) { return (fs::path(out_dir_) / name).string(); };

  std::ofstream config_out(path("config.json"));
  if (!config_out) throw IoError("cannot write config.json");
  config_out << config_to_json(cfg_);

  std::vector<std::pair<std::string, BodyId>> fingers{
      {"thumb", hand_.body(Finger::Thumb, Phalanx::Distal)},
      {"index", hand_.body(Finger::Index, Phalanx::Distal)}};
  w_physics_ = std::make_unique<PhysicsTraceWriter>(path("physics_trace.csv"),
                                                    world_, fingers);
  w_contacts_ = std::make_unique<ContactTraceWriter>(path("contacts.csv"));
  w_events_ = std::make_unique<EventLogWriter>(path("event_log.csv"));
  w_signal_ = std::make_unique<SignalTraceWriter>(path("signal.csv"));
  w_timeline_ = std::make_unique<TimelineWriter>(path("timeline.csv"));

  auto& files = out_.metrics.trace_files;
  files["config"] = "config.json";
  files["metrics"] = "metrics.json";
  files["physics"] = "physics_trace.csv";
  files["contacts"] = "contacts.csv";
  files["events"] = "event_log.csv";
  files["signal"] = "signal.csv";
  files["timeline"] = "timeline.csv";
  files["capture"] = "capture.hcap";
}

void ScenarioRun::apply_target_noise() {
  current_targets_ = controller_->targets();
  if (cfg_.tracking_noise <= 0.0) return;
  for (int f = 0; f < kFingerCount; ++f)
    for (int p = 0; p < kPhalanxCount; ++p) {
      auto& target =
          current_targets_.target(static_cast<Finger>(f), static_cast<Phalanx>(p));
      if (!target) continue;
      target->position.x += cfg_.tracking_noise * gauss_(rng_);
      target->position.y += cfg_.tracking_noise * gauss_(rng_);
      target->position.z += cfg_.tracking_noise * gauss_(rng_);
    }
}

void ScenarioRun::reset_object(double t1) {
  RigidBody& body = world_.body(object_);
  body.pose.position = object_start_;
  body.pose.orientation = Quat{};
  body.linear_velocity = Vec3{};
  body.angular_velocity = Vec3{};
  controller_->on_object_reset(t1);
}

void ScenarioRun::process_step(double t1) {
  if (w_physics_) w_physics_->record(world_);
  if (w_contacts_) w_contacts_->record(world_);

  touch_ = {};
  for (Finger f : {Finger::Thumb, Finger::Index})
    if (hand_.has(f, Phalanx::Distal))
      touch_[channel_for(f)] = fingertip_contact_summary(world_, hand_, f);

  const RigidBody& obj = world_.body(object_);
  RunOutput::StepRow row;
  row.time = t1;
  for (int ch = 0; ch < kChannelCount; ++ch) {
    row.normal[ch] = touch_[ch].total_normal_force;
    row.state[ch] = touch_[ch].friction_state;
  }
  row.object_position = obj.pose.position;
  row.object_velocity = obj.linear_velocity;
  out_.steps.push_back(row);

  std::vector<HapticEvent> raw = extract_events(history_, touch_, t1);

  // Impacts of the held object against the environment are relayed to the
  // holding fingers as contact transients (the strings carry them).
  std::set<BodyPair> env_pairs;
  double impact_speed = 0.0;
  bool impact = false;
  for (const Contact& c : world_.contacts) {
    const bool a_is_obj = c.body_a == object_;
    const bool b_is_obj = c.body_b == object_;
    if (!a_is_obj && !b_is_obj) continue;
    const BodyId other = a_is_obj ? c.body_b : c.body_a;
    bool other_is_hand = false;
    for (int f = 0; f < kFingerCount && !other_is_hand; ++f)
      for (int p = 0; p < kPhalanxCount; ++p)
        if (hand_.bodies[f][p] == other) {
          other_is_hand = true;
          break;
        }
    if (other_is_hand) continue;
    const BodyPair pair = make_pair_key(c.body_a, c.body_b);
    env_pairs.insert(pair);
    if (!object_env_pairs_.count(pair)) {
      impact = true;
      impact_speed = std::max(impact_speed, std::abs(c.separating_speed()));
    }
  }
  if (impact) {
    for (Finger f : {Finger::Thumb, Finger::Index}) {
      const int ch = channel_for(f);
      if (touch_[ch].in_contact)
        raw.push_back({t1, ch, ContactOnset{impact_speed}});
    }
  }
  object_env_pairs_ = std::move(env_pairs);

  // Unmasked bookkeeping: the physics moment of the first slip induced by
  // the grip-relax ramp (T2).  Transients while the hold is being
  // established are not the probed response and are ignored.
  RunMetrics& m = out_.metrics;
  if (cfg_.scenario == ScenarioKind::SlideRegrasp && !m.slip_defined &&
      t1 >= cfg_.slide.ramp_start()) {
    double t2 = quiet_nan();
    for (const HapticEvent& e : raw) {
      if (!std::holds_alternative<SlipOnset>(e.kind)) continue;
      Finger finger;
      if (e.channel == channel_for(Finger::Thumb))
        finger = Finger::Thumb;
      else if (e.channel == channel_for(Finger::Index))
        finger = Finger::Index;
      else
        continue;
      const BodyPair pair =
          make_pair_key(hand_.body(finger, Phalanx::Distal), object_);
      auto it = world_.slip_transition_time.find(pair);
      const double t_pair = it != world_.slip_transition_time.end() ? it->second : t1;
      t2 = std::isnan(t2) ? t_pair : std::min(t2, t_pair);
    }
    if (!std::isnan(t2)) {
      m.slip_defined = true;
      m.slip_time = t2;
      m.slip_onset_grip = touch_[channel_for(Finger::Thumb)].total_normal_force;
      y_at_slip_ = obj.pose.position.y;
    }
  }

  std::vector<HapticEvent> masked = condition_mask(raw, cfg_.condition);
  for (const HapticEvent& e : masked) {
    if (w_events_) w_events_->write(e);
    out_.device_events.push_back(e);
    pending_.push_back(e);
  }

  // String-snap rule: any fingertip past break_force snaps the drive and
  // resets the object; re-arms only after the grip falls well below the
  // threshold so one squeeze counts once.
  double max_n = 0.0;
  for (int ch = 0; ch < kChannelCount; ++ch)
    max_n = std::max(max_n, touch_[ch].total_normal_force);
  bool reset_done = false;
  if (break_armed_ && max_n > cfg_.break_force) {
    ++m.break_count;
    break_armed_ = false;
    reset_object(t1);
    reset_done = true;
  } else if (!break_armed_ && max_n < 0.5 * cfg_.break_force) {
    break_armed_ = true;
  }

  // Out-of-scene fall: put the object back at its start pose; the clock
  // keeps running.
  const Vec3& pos = world_.body(object_).pose.position;
  if (!reset_done && (std::abs(pos.x) > kBoundXZ || std::abs(pos.z) > kBoundXZ ||
                      pos.y < kBoundYBelow)) {
    ++m.reset_count;
    reset_object(t1);
  }

  // Success latches.
  if (cfg_.scenario == ScenarioKind::SlideRegrasp) {
    SlideController* slide = static_cast<SlideController*>(controller_.get());
    if (!m.regrasp_defined && !std::isnan(slide->regrasp_time())) {
      m.regrasp_defined = true;
      m.regrasp_time = slide->regrasp_time();
      if (m.slip_defined) m.latency = m.regrasp_time - m.slip_time;
    }
    if (m.regrasp_defined && m.slip_defined && !success_latched_ &&
        t1 > m.regrasp_time) {
      const ContactSummary& thumb = touch_[channel_for(Finger::Thumb)];
      const ContactSummary& index = touch_[channel_for(Finger::Index)];
      const bool re_held = thumb.in_contact && index.in_contact &&
                           thumb.friction_state != FrictionState::Dynamic &&
                           index.friction_state != FrictionState::Dynamic;
      if (re_held && y_at_slip_ - obj.pose.position.y < 0.10)
        success_latched_ = true;
    }
    // Slipped and fell a decimeter without being re-held: the trial is
    // decided (failed) no matter what the controller does afterwards.
    if (m.slip_defined && !success_latched_ &&
        y_at_slip_ - obj.pose.position.y > 0.10)
      fail_latched_ = true;
  } else if (cfg_.scenario == ScenarioKind::PegInHole && !success_latched_) {
    const Vec3 up = obj.pose.orientation.rotate({0.0, 1.0, 0.0});
    const Vec3& he = cfg_.object.half_extents;
    const bool through = obj.pose.position.y + he.y > kPlateLower + kPlateThickness;
    const bool in_hole = std::abs(obj.pose.position.x) < kApertureHalf - he.x &&
                         std::abs(obj.pose.position.z) < kApertureHalf - he.z;
    if (through && in_hole && up.y > kUpAxisMin) {
      success_latched_ = true;
      completion_time_ = t1;
    }
  }

  tick_synth_window(t1);
  for (const HapticEvent& e : masked) synth_.ingest(e);
}

void ScenarioRun::tick_synth_window(double t1) {
  const double rate = cfg_.synth.rate;
  const long long target =
      static_cast<long long>(std::floor(t1 * rate + 1e-9));
  for (long long tick = ticks_done_ + 1; tick <= target; ++tick) {
    const double ts = static_cast<double>(tick) / rate;
    const std::array<double, kChannelCount> values = synth_.sample(ts);
    if (w_signal_) w_signal_->record(ts, values);
    out_.signal.push_back({ts, values});

    const std::vector<std::uint8_t> bytes = link_->tick(ts, values);
    if (!bytes.empty()) {
      out_.capture.emplace_back(ts, bytes);
      const DecodeResult decoded = decode_frame(bytes);
      const DecodedFrame* frame = std::get_if<DecodedFrame>(&decoded);
      if (!frame)
        throw Error("internal: transmit frame failed self-decode: " +
                    std::get<DecodeError>(decoded).detail);
      emulator_.apply(*frame);
    }
    const EmulatorSample sample = emulator_.tick(ts);
    if (w_timeline_) w_timeline_->record(sample);
    out_.timeline.push_back(sample);
  }
  ticks_done_ = target;
}

void ScenarioRun::finish(double end_time) {
  RunMetrics& m = out_.metrics;
  m.duration = end_time;

  switch (cfg_.scenario) {
    case ScenarioKind::GraspMinForce: {
      GraspController* grasp = static_cast<GraspController*>(controller_.get());
      const double min_hold = grasp->min_hold_force();
      if (!std::isnan(min_hold)) {
        m.min_hold_defined = true;
        m.min_hold_force = min_hold;
      }
      m.success = cfg_.grasp.profile.empty() ? m.min_hold_defined : true;
      break;
    }
    case ScenarioKind::SlideRegrasp:
      m.success = success_latched_;
      break;
    case ScenarioKind::PegInHole:
      m.success = success_latched_;
      m.completed = success_latched_;
      m.completion_time = completion_time_;
      break;
  }

  if (!out_dir_.empty()) {
    namespace fs = std::filesystem;
    write_capture((fs::path(out_dir_) / "capture.hcap").string(), out_.capture);
    std::ofstream metrics_out((fs::path(out_dir_) / "metrics.json").string());
    if (!metrics_out) throw IoError("cannot write metrics.json");
    metrics_out << metrics_to_json(m);
  }
}

RunOutput ScenarioRun::run() {
  Scene scene = build_scene(cfg_);
  world_ = std::move(scene.world);
  object_ = scene.object;
  object_start_ = scene.object_start;

  const double standoff = cfg_.object.half_extents.x + kDistalRadius;
  switch (cfg_.scenario) {
    case ScenarioKind::GraspMinForce:
      controller_ = std::make_unique<GraspController>(cfg_.grasp, object_start_,
                                                      standoff);
      break;
    case ScenarioKind::SlideRegrasp:
      controller_ = std::make_unique<SlideController>(cfg_.slide, object_start_,
                                                      standoff);
      break;
    case ScenarioKind::PegInHole:
      controller_ = std::make_unique<PegController>(cfg_.peg, object_start_,
                                                    standoff);
      break;
  }

  hand_ = make_hand(world_, controller_->targets(), cfg_.coupling);
  current_targets_ = controller_->targets();

  synth_ = Synthesizer(cfg_.synth);
  link_ = std::make_unique<LinkSession>(cfg_.link.delta_threshold_raw,
                                        cfg_.link.heartbeat_period);
  emulator_ = DeviceEmulator(cfg_.motor, cfg_.synth.rate);

  RunMetrics& m = out_.metrics;
  m.scenario = to_string(cfg_.scenario);
  m.condition = to_string(cfg_.condition);
  m.seed = cfg_.seed;

  open_writers();

  HandCouplingElement element(&hand_,
                              [this](double) { return current_targets_; });
  std::vector<ForceElement*> elements{&element};

  const auto wall_start = std::chrono::steady_clock::now();

  try {
    while (true) {
      const double t = world_.time();
      if (t >= cfg_.timeout - 1e-9)
        throw Timeout(std::string(to_string(cfg_.scenario)) + " exceeded " +
                      std::to_string(cfg_.timeout) + " s simulated");

      ControlInput in;
      in.time = t;
      in.touch = touch_;
      in.object = world_.body(object_).pose;
      in.object_velocity = world_.body(object_).linear_velocity;
      in.events = std::move(pending_);
      pending_.clear();
      controller_->update(in, world_.dt);
      if (controller_->finished()) break;

      apply_target_noise();
      step(world_, elements);
      process_step(world_.time());

      if (cfg_.scenario == ScenarioKind::PegInHole && success_latched_) break;
      if (cfg_.scenario == ScenarioKind::SlideRegrasp && fail_latched_) break;

      if (cfg_.realtime) {
        const auto due = wall_start + std::chrono::duration_cast<
                                          std::chrono::steady_clock::duration>(
                                          std::chrono::duration<double>(world_.time()));
        std::this_thread::sleep_until(due);
      }
    }
  } catch (...) {
    // The partial record is still a faithful account of the failed trial;
    // never leave a previous run's files behind as if they were this one's.
    try {
      finish(world_.time());
    } catch (...) {
    }
    throw;
  }

  finish(world_.time());
  return std::move(out_);
}

}  // namespace

RunOutput run_scenario(const ScenarioConfig& config, const std::string& out_dir) {
  validate(config);
  ScenarioRun run(config, out_dir);
  return run.run();
}

RunOutput replay_events(const std::vector<HapticEvent>& events,
                        const ScenarioConfig& config,
                        const std::string& out_dir) {
  RunOutput out;
  out.metrics.scenario = "replay";
  out.metrics.condition = to_string(config.condition);
  out.metrics.seed = config.seed;
  out.device_events = events;

  Synthesizer synth(config.synth);
  LinkSession link(config.link.delta_threshold_raw, config.link.heartbeat_period);
  DeviceEmulator emulator(config.motor, config.synth.rate);

  std::unique_ptr<EventLogWriter> w_events;
  std::unique_ptr<SignalTraceWriter> w_signal;
  std::unique_ptr<TimelineWriter> w_timeline;
  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
    w_events = std::make_unique<EventLogWriter>(
        (fs::path(out_dir) / "event_log.csv").string());
    w_signal = std::make_unique<SignalTraceWriter>(
        (fs::path(out_dir) / "signal.csv").string());
    w_timeline = std::make_unique<TimelineWriter>(
        (fs::path(out_dir) / "timeline.csv").string());
    auto& files = out.metrics.trace_files;
    files["metrics"] = "metrics.json";
    files["events"] = "event_log.csv";
    files["signal"] = "signal.csv";
    files["timeline"] = "timeline.csv";
    files["capture"] = "capture.hcap";
    for (const HapticEvent& e : events) w_events->write(e);
  }

  const double rate = config.synth.rate;
  const double duration = (events.empty() ? 0.0 : events.back().time) + 1.0;
  const long long total = static_cast<long long>(std::floor(duration * rate + 1e-9));
  size_t next_event = 0;

  for (long long tick = 1; tick <= total; ++tick) {
    const double ts = static_cast<double>(tick) / rate;
    // Events created at a sim-step boundary first influence samples after
    // that boundary, exactly as in a live run.
    while (next_event < events.size() &&
           events[next_event].time < ts - 0.5 / rate) {
      synth.ingest(events[next_event]);
      ++next_event;
    }
    const std::array<double, kChannelCount> values = synth.sample(ts);
    if (w_signal) w_signal->record(ts, values);
    out.signal.push_back({ts, values});

    const std::vector<std::uint8_t> bytes = link.tick(ts, values);
    if (!bytes.empty()) {
      out.capture.emplace_back(ts, bytes);
      const DecodeResult decoded = decode_frame(bytes);
      const DecodedFrame* frame = std::get_if<DecodedFrame>(&decoded);
      if (!frame)
        throw Error("internal: transmit frame failed self-decode: " +
                    std::get<DecodeError>(decoded).detail);
      emulator.apply(*frame);
    }
    const EmulatorSample sample = emulator.tick(ts);
    if (w_timeline) w_timeline->record(sample);
    out.timeline.push_back(sample);
  }

  out.metrics.duration = duration;
  out.metrics.success = true;
  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    write_capture((fs::path(out_dir) / "capture.hcap").string(), out.capture);
    std::ofstream metrics_out((fs::path(out_dir) / "metrics.json").string());
    if (!metrics_out) throw IoError("cannot write metrics.json");
    metrics_out << metrics_to_json(out.metrics);
  }
  return out;
}

}  // namespace hapsim
