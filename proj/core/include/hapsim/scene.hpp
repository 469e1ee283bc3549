#pragma once

#include <string>

#include "hapsim/motor.hpp"
#include "hapsim/synth.hpp"
#include "hapsim/world.hpp"

namespace hapsim {

// Scene description file (JSON): gravity, dt, substeps, contact gains and
// a body list with shape, pose, material and kinematic flag.  Dynamic
// bodies may give an explicit mass; otherwise it comes from the material
// density (g/cm^3) and shape volume.
//
//   {
//     "version": 1,
//     "gravity": [0, -9.81, 0],
//     "dt": 0.01,
//     "substeps": 50,
//     "gains": {"k_n": 10000.0, "c_n": 50.0},
//     "bodies": [
//       {"name": "ground", "kinematic": true,
//        "shape": {"type": "halfspace", "normal": [0, 1, 0], "offset": 0.0},
//        "material": {"mu_static": 0.5, "mu_dynamic": 0.4, "density": 1.0}},
//       {"name": "cube",
//        "shape": {"type": "box", "half_extents": [0.025, 0.025, 0.025]},
//        "position": [0, 0.025, 0],
//        "material": {"mu_static": 4.0, "mu_dynamic": 3.0, "density": 1.0}}
//     ]
//   }
//
// Shapes: box {half_extents}, sphere {radius},
// halfspace {normal, offset} (kinematic only).
World load_world(const std::string& path);
World parse_world(const std::string& json_text, const std::string& origin);
void save_world(const World& world, const std::string& path);
std::string world_to_json(const World& world);

// Motor parameter file / inline JSON object with MotorModel fields.
MotorModel motor_from_json_text(const std::string& json_text);
std::string motor_to_json(const MotorModel& model);

}  // namespace hapsim
