#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "hapsim/hand.hpp"

namespace hapsim {

// Tracked hand targets over time, loaded from a versioned CSV file:
//
//   # hand-trajectory v1
//   time_s,finger,phalanx,px,py,pz,qw,qx,qy,qz
//   0.0,index,distal,0.10,0.05,0.0,1,0,0,0
//
// Each (finger, phalanx) pair forms an independent sample series whose
// timestamps must be strictly increasing.  Queries interpolate linearly
// between samples (orientations by normalized lerp) and hold the end
// values outside the sampled range, which is also the tracking-dropout
// behavior.  A finger with proximal and distal series but no middle series
// gets a middle target interpolated halfway between the two.
class Trajectory {
 public:
  static Trajectory load(const std::string& path);
  static Trajectory parse(std::istream& in, const std::string& origin);

  TrackedHandPose at(double time) const;
  double duration() const;
  bool empty() const;

  struct Sample {
    double time;
    Pose pose;
  };
  const std::vector<Sample>& series(Finger f, Phalanx p) const {
    return series_[static_cast<int>(f)][static_cast<int>(p)];
  }

  // In-memory construction, used by scenario builders.
  void push(Finger f, Phalanx p, double time, const Pose& pose);

 private:
  std::array<std::array<std::vector<Sample>, kPhalanxCount>, kFingerCount> series_;
};

void save_trajectory(const Trajectory& t, const std::string& path);

}  // namespace hapsim
