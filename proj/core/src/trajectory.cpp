#include "hapsim/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hapsim/errors.hpp"

namespace hapsim {

namespace {

constexpr const char* kVersionLine = "# hand-trajectory v1";
constexpr const char* kHeaderLine = "time_s,finger,phalanx,px,py,pz,qw,qx,qy,qz";

struct Splitter {
  const std::string& line;
  int line_no;
  size_t pos = 0;
  int column() const { return static_cast<int>(pos) + 1; }

  std::string next(const char* what) {
    if (pos > line.size())
      throw ParseError(std::string("missing field '") + what + "'", line_no, column());
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
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
      throw ParseError(std::string("bad number '") + field + "' for " + what, line_no, col);
    return value;
  }

  bool done() const { return pos > line.size(); }
};

}  // namespace

Trajectory Trajectory::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file '" + path + "'");
  return parse(in, path);
}

Trajectory Trajectory::parse(std::istream& in, const std::string& origin) {
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line))
    throw ParseError("empty trajectory '" + origin + "'", 1, 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kVersionLine)
    throw ParseError("expected version line '" + std::string(kVersionLine) + "'", line_no, 1);

  if (!std::getline(in, line))
    throw ParseError("missing column header", 2, 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeaderLine)
    throw ParseError("expected header '" + std::string(kHeaderLine) + "'", line_no, 1);

  Trajectory t;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    Splitter s{line, line_no};
    const double time = s.next_number("time_s");
    const int finger_col = s.column();
    const Finger finger = [&] {
      try {
        return finger_from_string(s.next("finger"));
      } catch (const ParseError& e) {
        throw ParseError(e.reason(), line_no, finger_col);
      }
    }();
    const int phalanx_col = s.column();
    const Phalanx phalanx = [&] {
      try {
        return phalanx_from_string(s.next("phalanx"));
      } catch (const ParseError& e) {
        throw ParseError(e.reason(), line_no, phalanx_col);
      }
    }();

    Pose pose;
    pose.position.x = s.next_number("px");
    pose.position.y = s.next_number("py");
    pose.position.z = s.next_number("pz");
    const int q_col = s.column();
    pose.orientation.w = s.next_number("qw");
    pose.orientation.x = s.next_number("qx");
    pose.orientation.y = s.next_number("qy");
    pose.orientation.z = s.next_number("qz");
    const double n = std::sqrt(
        pose.orientation.w * pose.orientation.w + pose.orientation.x * pose.orientation.x +
        pose.orientation.y * pose.orientation.y + pose.orientation.z * pose.orientation.z);
    if (n < 0.1)
      throw ParseError("orientation quaternion too close to zero", line_no, q_col);
    pose.orientation = pose.orientation.normalized();
    if (!s.done())
      throw ParseError("trailing fields after qz", line_no, s.column());

    auto& series = t.series_[static_cast<int>(finger)][static_cast<int>(phalanx)];
    if (!series.empty() && time <= series.back().time)
      throw NonMonotonicTimestamps(
          "trajectory '" + origin + "' line " + std::to_string(line_no) + ": " +
          to_string(finger) + "/" + to_string(phalanx) + " sample at " +
          std::to_string(time) + " s does not advance past " +
          std::to_string(series.back().time) + " s");
    series.push_back({time, pose});
    any = true;
  }
  if (!any) throw ParseError("trajectory '" + origin + "' has no samples", line_no, 1);
  return t;
}

void Trajectory::push(Finger f, Phalanx p, double time, const Pose& pose) {
  auto& series = series_[static_cast<int>(f)][static_cast<int>(p)];
  if (!series.empty() && time <= series.back().time)
    throw NonMonotonicTimestamps("trajectory sample at " + std::to_string(time) +
                                 " s does not advance past " +
                                 std::to_string(series.back().time) + " s");
  series.push_back({time, pose});
}

namespace {

Quat nlerp(const Quat& a, const Quat& b, double u) {
  // Shortest arc.
  const double dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  const double sign = dot < 0.0 ? -1.0 : 1.0;
  return Quat{a.w + (sign * b.w - a.w) * u, a.x + (sign * b.x - a.x) * u,
              a.y + (sign * b.y - a.y) * u, a.z + (sign * b.z - a.z) * u}
      .normalized();
}

Pose sample_series(const std::vector<Trajectory::Sample>& series, double time) {
  if (time <= series.front().time) return series.front().pose;
  if (time >= series.back().time) return series.back().pose;
  const auto it = std::upper_bound(
      series.begin(), series.end(), time,
      [](double t, const Trajectory::Sample& s) { return t < s.time; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double u = (time - lo.time) / (hi.time - lo.time);
  Pose p;
  p.position = lo.pose.position + (hi.pose.position - lo.pose.position) * u;
  p.orientation = nlerp(lo.pose.orientation, hi.pose.orientation, u);
  return p;
}

}  // namespace

TrackedHandPose Trajectory::at(double time) const {
  TrackedHandPose out;
  out.timestamp = time;
  for (int fi = 0; fi < kFingerCount; ++fi) {
    for (int pi = 0; pi < kPhalanxCount; ++pi) {
      const auto& series = series_[fi][pi];
      if (series.empty()) continue;
      out.targets[fi][pi] = sample_series(series, time);
    }
    // Untracked middle phalanx between tracked neighbors: halfway target.
    auto& mid = out.targets[fi][static_cast<int>(Phalanx::Middle)];
    const auto& prox = out.targets[fi][static_cast<int>(Phalanx::Proximal)];
    const auto& dist = out.targets[fi][static_cast<int>(Phalanx::Distal)];
    if (!mid && prox && dist) {
      Pose p;
      p.position = (prox->position + dist->position) * 0.5;
      p.orientation = nlerp(prox->orientation, dist->orientation, 0.5);
      mid = p;
    }
  }
  return out;
}

double Trajectory::duration() const {
  double d = 0.0;
  for (const auto& f : series_)
    for (const auto& s : f)
      if (!s.empty()) d = std::max(d, s.back().time);
  return d;
}

bool Trajectory::empty() const {
  for (const auto& f : series_)
    for (const auto& s : f)
      if (!s.empty()) return false;
  return true;
}

void save_trajectory(const Trajectory& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory file '" + path + "'");
  out << "# hand-trajectory v1\n";
  out << "time_s,finger,phalanx,px,py,pz,qw,qx,qy,qz\n";

  // Merge all series in time order so the file reads chronologically.
  struct Row {
    double time;
    int finger, phalanx;
    Pose pose;
  };
  std::vector<Row> rows;
  for (int fi = 0; fi < kFingerCount; ++fi)
    for (int pi = 0; pi < kPhalanxCount; ++pi)
      for (const auto& s : t.series(static_cast<Finger>(fi), static_cast<Phalanx>(pi)))
        rows.push_back({s.time, fi, pi, s.pose});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.time < b.time; });

  char buf[320];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.time, to_string(static_cast<Finger>(r.finger)),
                  to_string(static_cast<Phalanx>(r.phalanx)), r.pose.position.x,
                  r.pose.position.y, r.pose.position.z, r.pose.orientation.w,
                  r.pose.orientation.x, r.pose.orientation.y, r.pose.orientation.z);
    out << buf;
  }
  if (!out) throw IoError("failed writing trajectory file '" + path + "'");
}

}  // namespace hapsim
