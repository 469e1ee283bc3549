#include "hapsim/math.hpp"

namespace hapsim {

Mat3 rotated_diag(const Quat& q, const Vec3& d) {
  const Mat3 r = Mat3::from_quat(q);
  return r * Mat3::diag(d) * r.transposed();
}

void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  if (std::abs(n.x) > 0.9)
    t1 = n.cross({0, 1, 0}).normalized();
  else
    t1 = n.cross({1, 0, 0}).normalized();
  t2 = n.cross(t1);
}

}  // namespace hapsim
