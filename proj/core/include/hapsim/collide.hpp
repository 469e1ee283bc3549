#pragma once

#include <vector>

#include "hapsim/body.hpp"

namespace hapsim {

// Narrow-phase tests.  Each returns contacts with point/normal/depth filled
// (normal pointing from b toward a, depth > 0); velocity fields are left to
// the caller.  Manifolds hold at most 4 points.
std::vector<Contact> collide_box_box(const RigidBody& a, const RigidBody& b);
std::vector<Contact> collide_box_sphere(const RigidBody& box, const RigidBody& sph);
std::vector<Contact> collide_box_halfspace(const RigidBody& box, const RigidBody& hs);
std::vector<Contact> collide_sphere_halfspace(const RigidBody& sph, const RigidBody& hs);

}  // namespace hapsim
