#include "hapsim/collide.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace hapsim {

namespace {

// Prefer face axes over edge axes when penetrations are nearly equal; face
// manifolds are stable under resting stacks, edge contacts jitter.
constexpr double kFaceAxisBias = 1e-6;

struct ObbFrame {
  Vec3 center;
  Mat3 rot;   // columns are the box axes in world space
  Vec3 half;
};

ObbFrame obb_frame(const RigidBody& body) {
  const auto& box = std::get<BoxShape>(body.shape);
  return {body.pose.position, Mat3::from_quat(body.pose.orientation), box.half_extents};
}

Vec3 obb_corner(const ObbFrame& f, int i) {
  const double sx = (i & 1) ? 1.0 : -1.0;
  const double sy = (i & 2) ? 1.0 : -1.0;
  const double sz = (i & 4) ? 1.0 : -1.0;
  return f.center + f.rot * Vec3{sx * f.half.x, sy * f.half.y, sz * f.half.z};
}

// Projection radius of an OBB onto a unit axis.
double project_radius(const ObbFrame& f, const Vec3& axis) {
  return f.half.x * std::abs(f.rot.col(0).dot(axis)) +
         f.half.y * std::abs(f.rot.col(1).dot(axis)) +
         f.half.z * std::abs(f.rot.col(2).dot(axis));
}

struct FaceQuad {
  std::array<Vec3, 4> pts;
  Vec3 normal;  // outward
};

// The face of `f` whose outward normal is most aligned with `dir`.
FaceQuad best_face(const ObbFrame& f, const Vec3& dir) {
  int best_axis = 0;
  double best_dot = -2.0;
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double d = f.rot.col(a).dot(dir);
    if (std::abs(d) > best_dot) {
      best_dot = std::abs(d);
      best_axis = a;
      sign = d >= 0.0 ? 1.0 : -1.0;
    }
  }
  const int u_axis = (best_axis + 1) % 3;
  const int v_axis = (best_axis + 2) % 3;
  const double h[3] = {f.half.x, f.half.y, f.half.z};
  const Vec3 n = f.rot.col(best_axis) * sign;
  const Vec3 c = f.center + n * h[best_axis];
  const Vec3 u = f.rot.col(u_axis) * h[u_axis];
  const Vec3 v = f.rot.col(v_axis) * h[v_axis];
  FaceQuad q;
  q.normal = n;
  q.pts = {c + u + v, c - u + v, c - u - v, c + u - v};
  return q;
}

// Sutherland-Hodgman clip of a polygon against the half space
// dot(n, p) <= d.
std::vector<Vec3> clip_against_plane(const std::vector<Vec3>& poly, const Vec3& n, double d) {
  std::vector<Vec3> out;
  out.reserve(poly.size() + 2);
  const size_t count = poly.size();
  for (size_t i = 0; i < count; ++i) {
    const Vec3& p0 = poly[i];
    const Vec3& p1 = poly[(i + 1) % count];
    const double d0 = n.dot(p0) - d;
    const double d1 = n.dot(p1) - d;
    if (d0 <= 0.0) out.push_back(p0);
    if ((d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0)) {
      const double t = d0 / (d0 - d1);
      out.push_back(p0 + (p1 - p0) * t);
    }
  }
  return out;
}

// Keep at most 4 points: deepest, farthest from it, then the two maximizing
// triangle area on either side.  Standard manifold reduction.
void reduce_manifold(std::vector<Contact>& contacts) {
  if (contacts.size() <= 4) return;
  std::vector<Contact> kept;
  kept.reserve(4);

  auto deepest = std::max_element(contacts.begin(), contacts.end(),
                                  [](const Contact& a, const Contact& b) { return a.depth < b.depth; });
  kept.push_back(*deepest);

  auto farthest = std::max_element(contacts.begin(), contacts.end(),
                                   [&](const Contact& a, const Contact& b) {
                                     return (a.point - kept[0].point).norm_sq() <
                                            (b.point - kept[0].point).norm_sq();
                                   });
  kept.push_back(*farthest);

  const Vec3 n = kept[0].normal;
  double best_pos = 0.0, best_neg = 0.0;
  const Contact* cand_pos = nullptr;
  const Contact* cand_neg = nullptr;
  for (const Contact& c : contacts) {
    const Vec3 e0 = kept[0].point - c.point;
    const Vec3 e1 = kept[1].point - c.point;
    const double area = e0.cross(e1).dot(n);
    if (area > best_pos) { best_pos = area; cand_pos = &c; }
    if (area < best_neg) { best_neg = area; cand_neg = &c; }
  }
  if (cand_pos) kept.push_back(*cand_pos);
  if (cand_neg) kept.push_back(*cand_neg);
  contacts = std::move(kept);
}

}  // namespace

std::vector<Contact> collide_box_halfspace(const RigidBody& box, const RigidBody& hs) {
  const auto& plane = std::get<HalfSpaceShape>(hs.shape);
  const Vec3 n = plane.normal.normalized();
  const ObbFrame f = obb_frame(box);

  std::vector<Contact> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 p = obb_corner(f, i);
    const double depth = plane.offset - n.dot(p);
    if (depth > 0.0) {
      Contact c;
      c.body_a = box.id;
      c.body_b = hs.id;
      c.point = p;
      c.normal = n;
      c.depth = depth;
      out.push_back(c);
    }
  }
  reduce_manifold(out);
  return out;
}

std::vector<Contact> collide_sphere_halfspace(const RigidBody& sph, const RigidBody& hs) {
  const auto& plane = std::get<HalfSpaceShape>(hs.shape);
  const auto& sphere = std::get<SphereShape>(sph.shape);
  const Vec3 n = plane.normal.normalized();
  const double dist = n.dot(sph.pose.position) - plane.offset;
  const double depth = sphere.radius - dist;
  if (depth <= 0.0) return {};
  Contact c;
  c.body_a = sph.id;
  c.body_b = hs.id;
  c.point = sph.pose.position - n * dist;
  c.normal = n;
  c.depth = depth;
  return {c};
}

std::vector<Contact> collide_box_sphere(const RigidBody& box, const RigidBody& sph) {
  const auto& sphere = std::get<SphereShape>(sph.shape);
  const ObbFrame f = obb_frame(box);

  // Sphere center in box frame; clamp to find the closest point on the box.
  const Vec3 rel = sph.pose.position - f.center;
  const Vec3 local{f.rot.col(0).dot(rel), f.rot.col(1).dot(rel), f.rot.col(2).dot(rel)};
  const Vec3 clamped{std::clamp(local.x, -f.half.x, f.half.x),
                     std::clamp(local.y, -f.half.y, f.half.y),
                     std::clamp(local.z, -f.half.z, f.half.z)};

  Contact c;
  c.body_a = sph.id;
  c.body_b = box.id;

  if (clamped.x != local.x || clamped.y != local.y || clamped.z != local.z) {
    // Center outside the box.
    const Vec3 closest = f.center + f.rot * clamped;
    const Vec3 delta = sph.pose.position - closest;
    const double dist = delta.norm();
    const double depth = sphere.radius - dist;
    if (depth <= 0.0 || dist == 0.0) return {};
    c.normal = delta / dist;  // from box surface toward sphere center
    c.point = closest;
    c.depth = depth;
    return {c};
  }

  // Center inside the box: exit along the face with least remaining distance.
  double min_exit = std::numeric_limits<double>::max();
  Vec3 n_local;
  const double exits[6] = {f.half.x - local.x, local.x + f.half.x,
                           f.half.y - local.y, local.y + f.half.y,
                           f.half.z - local.z, local.z + f.half.z};
  const Vec3 dirs[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int i = 0; i < 6; ++i) {
    if (exits[i] < min_exit) {
      min_exit = exits[i];
      n_local = dirs[i];
    }
  }
  c.normal = f.rot * n_local;
  c.depth = sphere.radius + min_exit;
  c.point = sph.pose.position - c.normal * min_exit;
  return {c};
}

std::vector<Contact> collide_box_box(const RigidBody& body_a, const RigidBody& body_b) {
  const ObbFrame fa = obb_frame(body_a);
  const ObbFrame fb = obb_frame(body_b);
  const Vec3 d = fa.center - fb.center;

  double best_overlap = std::numeric_limits<double>::max();
  Vec3 best_axis;       // unit, oriented from b toward a
  bool best_is_face = false;
  int best_face_owner = 0;  // 0 = a, 1 = b

  auto test_axis = [&](const Vec3& axis_raw, bool is_face, int owner) -> bool {
    const double len = axis_raw.norm();
    if (len < 1e-9) return true;  // degenerate cross product, skip
    Vec3 axis = axis_raw / len;
    const double dist = d.dot(axis);
    if (dist < 0.0) axis = -axis;
    const double overlap = project_radius(fa, axis) + project_radius(fb, axis) - std::abs(dist);
    if (overlap <= 0.0) return false;  // separating axis
    const double score = is_face ? overlap : overlap + kFaceAxisBias;
    const double best_score = best_is_face ? best_overlap : best_overlap + kFaceAxisBias;
    if (score < best_score) {
      best_overlap = overlap;
      best_axis = axis;
      best_is_face = is_face;
      best_face_owner = owner;
    }
    return true;
  };

  for (int i = 0; i < 3; ++i)
    if (!test_axis(fa.rot.col(i), true, 0)) return {};
  for (int i = 0; i < 3; ++i)
    if (!test_axis(fb.rot.col(i), true, 1)) return {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!test_axis(fa.rot.col(i).cross(fb.rot.col(j)), false, -1)) return {};

  std::vector<Contact> out;

  if (best_is_face) {
    // Reference face on the owner, incident face on the other; clip the
    // incident face against the reference face's side planes.
    const ObbFrame& ref = best_face_owner == 0 ? fa : fb;
    const ObbFrame& inc = best_face_owner == 0 ? fb : fa;
    // best_axis points b->a; the reference outward normal points at the
    // incident box.
    const Vec3 ref_outward = best_face_owner == 0 ? -best_axis : best_axis;
    const FaceQuad ref_face = best_face(ref, ref_outward);
    const FaceQuad inc_face = best_face(inc, -ref_face.normal);

    std::vector<Vec3> poly(inc_face.pts.begin(), inc_face.pts.end());
    for (int e = 0; e < 4 && !poly.empty(); ++e) {
      const Vec3& p0 = ref_face.pts[e];
      const Vec3& p1 = ref_face.pts[(e + 1) % 4];
      const Vec3 edge_n = ref_face.normal.cross(p1 - p0).normalized();
      // Side planes face outward from the face polygon.
      const Vec3 n_out = edge_n.dot(ref.center - p0) > 0.0 ? -edge_n : edge_n;
      poly = clip_against_plane(poly, n_out, n_out.dot(p0));
    }

    const double ref_d = ref_face.normal.dot(ref_face.pts[0]);
    for (const Vec3& p : poly) {
      const double depth = ref_d - ref_face.normal.dot(p);
      if (depth > 0.0) {
        Contact c;
        c.body_a = body_a.id;
        c.body_b = body_b.id;
        c.point = p;
        c.normal = best_axis;
        c.depth = depth;
        out.push_back(c);
      }
    }
    reduce_manifold(out);
    if (!out.empty()) return out;
    // All clip points ended up shallow; fall through to a single point.
  }

  // Edge-edge (or degenerate face) case: one contact at the midpoint of the
  // closest segment between the two supporting edges.  Supporting corner of
  // each box along the axis, then walk the best edge directions.
  auto support = [](const ObbFrame& f, const Vec3& dir) {
    Vec3 p = f.center;
    p += f.rot.col(0) * (f.rot.col(0).dot(dir) >= 0 ? f.half.x : -f.half.x);
    p += f.rot.col(1) * (f.rot.col(1).dot(dir) >= 0 ? f.half.y : -f.half.y);
    p += f.rot.col(2) * (f.rot.col(2).dot(dir) >= 0 ? f.half.z : -f.half.z);
    return p;
  };
  auto best_edge_dir = [](const ObbFrame& f, const Vec3& axis) {
    int best = 0;
    double best_abs = 2.0;
    for (int i = 0; i < 3; ++i) {
      const double a = std::abs(f.rot.col(i).dot(axis));
      if (a < best_abs) { best_abs = a; best = i; }
    }
    return f.rot.col(best);
  };

  const Vec3 pa = support(fa, -best_axis);
  const Vec3 pb = support(fb, best_axis);
  const Vec3 ea = best_edge_dir(fa, best_axis);
  const Vec3 eb = best_edge_dir(fb, best_axis);

  // Closest points of the two lines pa + s*ea, pb + t*eb.
  const Vec3 r = pa - pb;
  const double a_ = ea.dot(ea), e_ = eb.dot(eb), f_ = eb.dot(r);
  const double b_ = ea.dot(eb), c_ = ea.dot(r);
  const double denom = a_ * e_ - b_ * b_;
  double s = 0.0, t = 0.0;
  if (std::abs(denom) > 1e-12) s = (b_ * f_ - c_ * e_) / denom;
  t = (b_ * s + f_) / e_;

  Contact c;
  c.body_a = body_a.id;
  c.body_b = body_b.id;
  c.point = ((pa + ea * s) + (pb + eb * t)) * 0.5;
  c.normal = best_axis;
  c.depth = best_overlap;
  out.push_back(c);
  return out;
}

}  // namespace hapsim
