#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "hapsim/emulator.hpp"
#include "hapsim/events.hpp"
#include "hapsim/world.hpp"

namespace hapsim {

// CSV trace writers.  All numbers are printed with %.17g so traces are
// byte-stable across identical runs and round-trip exactly.

// Per-step world state: fixed columns
//   step,time,<for each body: px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz>,
//   n_contacts,<for each tracked finger: normal_sum,force_mag_sum>
// prefixed per body/finger by its name.  Contacts get their own file with
// one row per contact (see ContactTraceWriter).
class PhysicsTraceWriter {
 public:
  PhysicsTraceWriter(const std::string& path, const World& world,
                     const std::vector<std::pair<std::string, BodyId>>& fingers);
  void record(const World& world);

 private:
  std::ofstream out_;
  std::vector<std::pair<std::string, BodyId>> fingers_;
};

// step,time,body_a,body_b,px,py,pz,nx,ny,nz,depth,normal_force,
// ftx,fty,ftz,state
class ContactTraceWriter {
 public:
  explicit ContactTraceWriter(const std::string& path);
  void record(const World& world);

 private:
  std::ofstream out_;
};

// time_s,channel,kind,value  (value meaning depends on kind; 0 when none)
class EventLogWriter {
 public:
  explicit EventLogWriter(const std::string& path);
  void write(const HapticEvent& event);

 private:
  std::ofstream out_;
};
std::vector<HapticEvent> load_event_log(const std::string& path);

// t,ch0..ch8 current fractions at the synth rate.
class SignalTraceWriter {
 public:
  explicit SignalTraceWriter(const std::string& path);
  void record(double t, const std::array<double, kChannelCount>& values);

 private:
  std::ofstream out_;
};

// t,<per channel: static force N, vibration amplitude N>.
class TimelineWriter {
 public:
  explicit TimelineWriter(const std::string& path);
  void record(const EmulatorSample& sample);

 private:
  std::ofstream out_;
};

}  // namespace hapsim
