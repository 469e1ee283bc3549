#include "hapsim/trace.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>

#include "hapsim/errors.hpp"

namespace hapsim {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_trace(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

double event_value(const EventKind& kind) {
  struct Visitor {
    double operator()(const ContactOnset& e) const { return e.v_impact; }
    double operator()(const ContactRelease&) const { return 0.0; }
    double operator()(const SlipOnset&) const { return 0.0; }
    double operator()(const SlipVelocity& e) const { return e.v_slip; }
    double operator()(const PressureUpdate& e) const { return e.force; }
  };
  return std::visit(Visitor{}, kind);
}

EventKind kind_from_name(const std::string& name, double value) {
  if (name == "contact_onset") return ContactOnset{value};
  if (name == "contact_release") return ContactRelease{};
  if (name == "slip_onset") return SlipOnset{};
  if (name == "slip_velocity") return SlipVelocity{value};
  if (name == "pressure_update") return PressureUpdate{value};
  throw ParseError("unknown event kind '" + name + "'");
}

struct Fields {
  const std::string& line;
  int line_no;
  size_t pos = 0;
  int column() const { return static_cast<int>(pos) + 1; }

  std::string next(const char* what) {
    if (pos > line.size())
      throw ParseError(std::string("missing field '") + what + "'", line_no,
                       column());
    const size_t comma = line.find(',', pos);
    const size_t end = comma == std::string::npos ? line.size() : comma;
    std::string field = line.substr(pos, end - pos);
    pos = comma == std::string::npos ? line.size() + 1 : comma + 1;
    return field;
  }

  double next_number(const char* what) {
    const int col = column();
    const std::string field = next(what);
    double value = 0.0;
    auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
      throw ParseError(std::string("bad number '") + field + "' for " + what,
                       line_no, col);
    return value;
  }

  bool done() const { return pos > line.size(); }
};

}  // namespace

PhysicsTraceWriter::PhysicsTraceWriter(
    const std::string& path, const World& world,
    const std::vector<std::pair<std::string, BodyId>>& fingers)
    : out_(open_trace(path)), fingers_(fingers) {
  out_ << "# physics-trace v1\n";
  out_ << "step,time";
  for (const auto& body : world.bodies) {
    const char* cols[] = {"px", "py", "pz", "qw", "qx", "qy", "qz",
                          "vx", "vy", "vz", "wx", "wy", "wz"};
    for (const char* c : cols) out_ << ',' << body.name << '_' << c;
  }
  out_ << ",n_contacts";
  for (const auto& [name, id] : fingers_) {
    (void)id;
    out_ << ',' << name << "_normal_sum," << name << "_force_mag_sum";
  }
  out_ << '\n';
}

void PhysicsTraceWriter::record(const World& world) {
  out_ << world.step_index << ',' << fmt(world.time());
  for (const auto& body : world.bodies) {
    const double vals[] = {
        body.pose.position.x,    body.pose.position.y,    body.pose.position.z,
        body.pose.orientation.w, body.pose.orientation.x, body.pose.orientation.y,
        body.pose.orientation.z, body.linear_velocity.x,  body.linear_velocity.y,
        body.linear_velocity.z,  body.angular_velocity.x, body.angular_velocity.y,
        body.angular_velocity.z};
    for (double v : vals) out_ << ',' << fmt(v);
  }
  out_ << ',' << world.contacts.size();
  for (const auto& [name, id] : fingers_) {
    double normal_sum = 0.0;
    double force_mag_sum = 0.0;
    for (const Contact& c : world.contacts) {
      if (c.body_a != id && c.body_b != id) continue;
      normal_sum += c.normal_force;
      Vec3 total = c.normal * c.normal_force + c.tangential_force;
      force_mag_sum += total.norm();
    }
    out_ << ',' << fmt(normal_sum) << ',' << fmt(force_mag_sum);
  }
  out_ << '\n';
}

ContactTraceWriter::ContactTraceWriter(const std::string& path)
    : out_(open_trace(path)) {
  out_ << "# contact-trace v1\n";
  out_ << "step,time,body_a,body_b,px,py,pz,nx,ny,nz,depth,normal_force,"
          "ftx,fty,ftz,state\n";
}

void ContactTraceWriter::record(const World& world) {
  for (const Contact& c : world.contacts) {
    out_ << world.step_index << ',' << fmt(world.time()) << ','
         << world.bodies[c.body_a].name << ',' << world.bodies[c.body_b].name;
    const double vals[] = {c.point.x,  c.point.y,         c.point.z,
                           c.normal.x, c.normal.y,        c.normal.z,
                           c.depth,    c.normal_force,    c.tangential_force.x,
                           c.tangential_force.y, c.tangential_force.z};
    for (double v : vals) out_ << ',' << fmt(v);
    out_ << ',' << to_string(c.friction_state) << '\n';
  }
}

EventLogWriter::EventLogWriter(const std::string& path)
    : out_(open_trace(path)) {
  out_ << "# event-log v1\n";
  out_ << "time_s,channel,kind,value\n";
}

void EventLogWriter::write(const HapticEvent& event) {
  out_ << fmt(event.time) << ',' << event.channel << ',' << kind_name(event.kind)
       << ',' << fmt(event_value(event.kind)) << '\n';
}

std::vector<HapticEvent> load_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    return true;
  };
  if (!next_line() || line != "# event-log v1")
    throw ParseError("expected '# event-log v1' version line", line_no, 1);
  if (!next_line() || line != "time_s,channel,kind,value")
    throw ParseError("expected event log header 'time_s,channel,kind,value'",
                     line_no, 1);
  std::vector<HapticEvent> events;
  double last_time = -1.0;
  while (next_line()) {
    if (line.empty()) continue;
    Fields fields{line, line_no};
    HapticEvent event;
    event.time = fields.next_number("time_s");
    const int channel_col = fields.column();
    event.channel = static_cast<int>(fields.next_number("channel"));
    std::string kind = fields.next("kind");
    const int kind_col = fields.column() - static_cast<int>(kind.size()) - 1;
    double value = fields.next_number("value");
    if (!fields.done())
      throw ParseError("trailing fields after value", line_no, fields.column());
    try {
      event.kind = kind_from_name(kind, value);
    } catch (const ParseError& e) {
      throw ParseError(e.reason(), line_no, kind_col);
    }
    if (event.channel < 0 || event.channel >= kChannelCount)
      throw ParseError("channel " + std::to_string(event.channel) +
                           " outside 0.." + std::to_string(kChannelCount - 1),
                       line_no, channel_col);
    if (event.time < last_time)
      throw NonMonotonicTimestamps("event log time decreases at line " +
                                   std::to_string(line_no));
    last_time = event.time;
    events.push_back(event);
  }
  return events;
}

SignalTraceWriter::SignalTraceWriter(const std::string& path)
    : out_(open_trace(path)) {
  out_ << "# signal-trace v1\n";
  out_ << "t";
  for (int ch = 0; ch < kChannelCount; ++ch) out_ << ",ch" << ch;
  out_ << '\n';
}

void SignalTraceWriter::record(double t,
                               const std::array<double, kChannelCount>& values) {
  out_ << fmt(t);
  for (double v : values) out_ << ',' << fmt(v);
  out_ << '\n';
}

TimelineWriter::TimelineWriter(const std::string& path)
    : out_(open_trace(path)) {
  out_ << "# device-timeline v1\n";
  out_ << "t";
  for (int ch = 0; ch < kChannelCount; ++ch)
    out_ << ",ch" << ch << "_static_n,ch" << ch << "_vib_n";
  out_ << '\n';
}

void TimelineWriter::record(const EmulatorSample& sample) {
  out_ << fmt(sample.time);
  for (int ch = 0; ch < kChannelCount; ++ch)
    out_ << ',' << fmt(sample.static_force[ch]) << ','
         << fmt(sample.vibration_amplitude[ch]);
  out_ << '\n';
}

}  // namespace hapsim
