#include "hapsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hapsim/collide.hpp"
#include "hapsim/errors.hpp"

namespace hapsim {

double shape_volume(const Shape& s) {
  if (const auto* b = std::get_if<BoxShape>(&s))
    return 8.0 * b->half_extents.x * b->half_extents.y * b->half_extents.z;
  if (const auto* sp = std::get_if<SphereShape>(&s))
    return 4.0 / 3.0 * std::numbers::pi * sp->radius * sp->radius * sp->radius;
  return std::numeric_limits<double>::infinity();
}

Vec3 shape_inertia(const Shape& s, double mass) {
  if (const auto* b = std::get_if<BoxShape>(&s)) {
    const Vec3 e = b->half_extents * 2.0;
    return {mass / 12.0 * (e.y * e.y + e.z * e.z),
            mass / 12.0 * (e.x * e.x + e.z * e.z),
            mass / 12.0 * (e.x * e.x + e.y * e.y)};
  }
  if (const auto* sp = std::get_if<SphereShape>(&s)) {
    const double i = 0.4 * mass * sp->radius * sp->radius;
    return {i, i, i};
  }
  return {1.0, 1.0, 1.0};
}

const char* to_string(FrictionState s) {
  switch (s) {
    case FrictionState::None: return "none";
    case FrictionState::Static: return "static";
    case FrictionState::Dynamic: return "dynamic";
  }
  return "?";
}

BodyId World::add_body(RigidBody body) {
  body.id = static_cast<BodyId>(bodies.size());
  if (!body.kinematic) {
    if (body.mass <= 0.0) throw Error("dynamic body '" + body.name + "' needs mass > 0");
    if (body.inertia.x <= 0.0 || body.inertia.y <= 0.0 || body.inertia.z <= 0.0)
      throw Error("dynamic body '" + body.name + "' needs positive inertia");
  }
  if (!body.material.valid()) throw Error("invalid material on body '" + body.name + "'");
  bodies.push_back(std::move(body));
  return bodies.back().id;
}

const RigidBody* World::find_body(const std::string& name) const {
  for (const auto& b : bodies)
    if (b.name == name) return &b;
  return nullptr;
}

namespace {

const char* shape_name(const Shape& s) {
  if (std::holds_alternative<BoxShape>(s)) return "box";
  if (std::holds_alternative<SphereShape>(s)) return "sphere";
  return "half-space";
}

std::vector<Contact> collide_pair(const RigidBody& a, const RigidBody& b) {
  const bool a_box = std::holds_alternative<BoxShape>(a.shape);
  const bool b_box = std::holds_alternative<BoxShape>(b.shape);
  const bool a_sph = std::holds_alternative<SphereShape>(a.shape);
  const bool b_sph = std::holds_alternative<SphereShape>(b.shape);
  const bool a_hs = std::holds_alternative<HalfSpaceShape>(a.shape);
  const bool b_hs = std::holds_alternative<HalfSpaceShape>(b.shape);

  if (a_box && b_box) return collide_box_box(a, b);
  if (a_box && b_sph) return collide_box_sphere(a, b);
  if (a_sph && b_box) return collide_box_sphere(b, a);
  if (a_box && b_hs) return collide_box_halfspace(a, b);
  if (a_hs && b_box) return collide_box_halfspace(b, a);
  if (a_sph && b_hs) return collide_sphere_halfspace(a, b);
  if (a_hs && b_sph) return collide_sphere_halfspace(b, a);
  throw UnsupportedShapePair(std::string("no narrow phase for ") + shape_name(a.shape) +
                             "/" + shape_name(b.shape) + " (bodies '" + a.name + "', '" +
                             b.name + "')");
}

struct PairGroup {
  BodyPair key;
  std::vector<size_t> contact_indices;
  double total_normal = 0.0;
};

// Inverse-mass term of the pair along direction `dir` for a force applied
// at `point` (equal and opposite on both bodies).
double effective_inv_mass(const RigidBody& a, const RigidBody& b, const Vec3& point,
                          const Vec3& dir) {
  double w = a.inv_mass() + b.inv_mass();
  if (!a.kinematic) {
    const Vec3 ra = point - a.pose.position;
    const Vec3 rxn = ra.cross(dir);
    w += (a.inv_inertia_world() * rxn).cross(ra).dot(dir);
  }
  if (!b.kinematic) {
    const Vec3 rb = point - b.pose.position;
    const Vec3 rxn = rb.cross(dir);
    w += (b.inv_inertia_world() * rxn).cross(rb).dot(dir);
  }
  return w;
}

}  // namespace

std::vector<Contact> detect_contacts(const World& world) {
  std::vector<Contact> out;
  const size_t n = world.bodies.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const RigidBody& a = world.bodies[i];
      const RigidBody& b = world.bodies[j];
      if (a.kinematic && b.kinematic) continue;
      if (world.excluded_pairs.count(make_pair_key(a.id, b.id))) continue;
      std::vector<Contact> cs = collide_pair(a, b);
      for (Contact& c : cs) {
        const RigidBody& ca = world.body(c.body_a);
        const RigidBody& cb = world.body(c.body_b);
        c.relative_velocity = ca.velocity_at(c.point) - cb.velocity_at(c.point);
        out.push_back(c);
      }
    }
  }
  return out;
}

std::pair<FrictionState, Vec3> friction_update(const Contact& contact, const Vec3& trial,
                                               FrictionState prev_state,
                                               double mu_static, double mu_dynamic) {
  const double n_force = contact.normal_force;
  if (n_force <= 0.0) return {FrictionState::None, Vec3{}};

  const Vec3 slip = contact.tangential_velocity();
  const double slip_speed = slip.norm();

  if (prev_state == FrictionState::Dynamic && slip_speed >= kStickVelocity) {
    // Sliding: Coulomb force on the cone boundary -- except that the
    // discrete impulse may never exceed the one that arrests the slide
    // within the horizon (that arresting force is exactly the trial).  An
    // unclamped cone force overshoots light bodies, reversing the slip every
    // substep, and the contact chatters instead of re-sticking.
    const double trial_norm = trial.norm();
    const double mag = std::min(mu_dynamic * n_force, trial_norm);
    const Vec3 dir = trial_norm > 1e-12 ? trial * (1.0 / trial_norm)
                                        : slip * (-1.0 / slip_speed);
    return {FrictionState::Dynamic, dir * mag};
  }
  if (trial.norm() <= mu_static * n_force + 1e-9) {
    return {FrictionState::Static, trial};
  }
  // Bound exceeded: slide, opposing the motion the trial force was resisting.
  Vec3 dir;
  if (slip_speed > 1e-12)
    dir = slip * (-1.0 / slip_speed);
  else
    dir = trial.normalized();
  return {FrictionState::Dynamic, dir * (mu_dynamic * n_force)};
}

void resolve_contact_forces(std::vector<Contact>& contacts, const World& world,
                            const ContactGains& gains, FrictionMemory& memory,
                            double horizon) {
  // Normal forces first; friction needs every pair's total.
  for (Contact& c : contacts) {
    const double v_n = c.separating_speed();
    c.normal_force = std::max(0.0, gains.k_n * c.depth - gains.c_n * v_n);
  }

  // Per-body wrench from the normal forces, folded into the stick-trial
  // prediction below so held objects do not creep under gravity.
  std::vector<Vec3> n_force(world.bodies.size()), n_torque(world.bodies.size());
  for (const Contact& c : contacts) {
    const Vec3 f = c.normal * c.normal_force;
    n_force[c.body_a] += f;
    n_torque[c.body_a] += (c.point - world.body(c.body_a).pose.position).cross(f);
    n_force[c.body_b] -= f;
    n_torque[c.body_b] += (c.point - world.body(c.body_b).pose.position).cross(-f);
  }

  std::map<BodyPair, PairGroup> groups;
  for (size_t i = 0; i < contacts.size(); ++i) {
    const BodyPair key = make_pair_key(contacts[i].body_a, contacts[i].body_b);
    auto& g = groups[key];
    g.key = key;
    g.contact_indices.push_back(i);
    g.total_normal += contacts[i].normal_force;
  }

  std::map<BodyPair, FrictionState> next_state;
  std::map<BodyPair, PairAnchor> next_anchor;
  for (auto& [key, g] : groups) {
    const FrictionState prev = memory.previous(key.first, key.second);
    FrictionState pair_state = FrictionState::None;

    if (g.total_normal <= 0.0) {
      for (size_t idx : g.contact_indices) {
        contacts[idx].friction_state = FrictionState::None;
        contacts[idx].tangential_force = Vec3{};
      }
      next_state[key] = FrictionState::None;
      continue;
    }

    // Force-weighted contact centroid and frame for the pair.
    Vec3 centroid{}, normal{};
    for (size_t idx : g.contact_indices) {
      const Contact& c = contacts[idx];
      centroid += c.point * (c.normal_force / g.total_normal);
      normal += c.normal * (c.normal_force / g.total_normal);
    }
    normal = normal.normalized();

    const Contact& first = contacts[g.contact_indices.front()];
    const RigidBody& a = world.body(first.body_a);
    const RigidBody& b = world.body(first.body_b);

    // Predicted tangential velocity at the centroid after `horizon`, under
    // every force known so far: gravity, accumulated external forces
    // (couplings, wrenches) and the normal forces computed above.  The
    // stick trial force is the force that cancels it.
    auto accel_at = [&](const RigidBody& body) -> Vec3 {
      if (body.kinematic) return Vec3{};
      Vec3 f = n_force[body.id];
      Vec3 tq = n_torque[body.id];
      if (!world.force_acc.empty()) {
        f += world.force_acc[body.id];
        tq += world.torque_acc[body.id];
      }
      const Vec3 lin = f * body.inv_mass() + world.gravity;
      const Vec3 ang = body.inv_inertia_world() * tq;
      return lin + ang.cross(centroid - body.pose.position);
    };
    Vec3 v_rel = a.velocity_at(centroid) - b.velocity_at(centroid);
    v_rel += (accel_at(a) - accel_at(b)) * horizon;
    Vec3 v_t = v_rel - normal * v_rel.dot(normal);

    // Stiction also pulls back toward where the pair stuck (see PairAnchor):
    // fold the anchor error in as the velocity that removes a fraction of it
    // this substep.  The lower-id body carries local_a by convention.
    if (prev == FrictionState::Static) {
      const auto it = memory.anchor.find(key);
      if (it != memory.anchor.end()) {
        const RigidBody& lo = world.body(key.first);
        const RigidBody& hi = world.body(key.second);
        const Vec3 p_lo = lo.pose.position + lo.pose.orientation.rotate(it->second.local_a);
        const Vec3 p_hi = hi.pose.position + hi.pose.orientation.rotate(it->second.local_b);
        Vec3 err = p_lo - p_hi;
        if (first.body_a != key.first) err = err * -1.0;  // express as a relative b
        err = err - normal * err.dot(normal);
        v_t += err * (kStickAnchorGain / horizon);
      }
    }

    Vec3 trial_total{};
    const double v_t_norm = v_t.norm();
    if (v_t_norm > 0.0) {
      const double w_t = effective_inv_mass(a, b, centroid, v_t / v_t_norm);
      if (w_t > 0.0) trial_total = v_t * (-1.0 / (w_t * horizon));
    }

    for (size_t idx : g.contact_indices) {
      Contact& c = contacts[idx];
      const Vec3 trial = trial_total * (c.normal_force / g.total_normal);
      const double mu_s = std::min(a.material.mu_static, b.material.mu_static);
      const double mu_d = std::min(a.material.mu_dynamic, b.material.mu_dynamic);
      auto [state, f_t] = friction_update(c, trial, prev, mu_s, mu_d);
      c.friction_state = state;
      c.tangential_force = f_t;
      if (static_cast<int>(state) > static_cast<int>(pair_state)) pair_state = state;
    }
    next_state[key] = pair_state;

    if (pair_state == FrictionState::Static) {
      if (prev == FrictionState::Static && memory.anchor.count(key)) {
        next_anchor[key] = memory.anchor[key];  // keep the original grab point
      } else {
        const RigidBody& lo = world.body(key.first);
        const RigidBody& hi = world.body(key.second);
        next_anchor[key] = {lo.pose.orientation.rotate_inv(centroid - lo.pose.position),
                            hi.pose.orientation.rotate_inv(centroid - hi.pose.position)};
      }
    }
  }
  memory.state = std::move(next_state);
  memory.anchor = std::move(next_anchor);
}

namespace {

void check_friction_invariants(const std::vector<Contact>& contacts, const World& world) {
  for (const Contact& c : contacts) {
    const RigidBody& a = world.body(c.body_a);
    const RigidBody& b = world.body(c.body_b);
    const double mu_s = std::min(a.material.mu_static, b.material.mu_static);
    const double mu_d = std::min(a.material.mu_dynamic, b.material.mu_dynamic);
    const double f_t = c.tangential_force.norm();
    if (c.friction_state == FrictionState::Static) {
      if (f_t > mu_s * c.normal_force + 1e-9)
        throw NumericalDivergence("static friction bound violated on pair '" + a.name +
                                  "'/'" + b.name + "'");
    } else if (c.friction_state == FrictionState::Dynamic) {
      // The arresting clamp can pull the force inside the cone, so the
      // boundary is an upper bound, not an identity.
      if (f_t > mu_d * c.normal_force + 1e-9)
        throw NumericalDivergence("dynamic friction magnitude violated on pair '" +
                                  a.name + "'/'" + b.name + "'");
      if (std::abs(c.tangential_force.dot(c.normal)) > 1e-9 * std::max(1.0, f_t))
        throw NumericalDivergence("dynamic friction left the tangent plane on pair '" +
                                  a.name + "'/'" + b.name + "'");
    }
  }
}

}  // namespace

void step(World& world, const std::vector<ForceElement*>& elements) {
  const int substeps = std::max(1, world.substeps);
  const double h = world.dt / substeps;
  const size_t n = world.bodies.size();

  for (int sub = 0; sub < substeps; ++sub) {
    const double t_sub = world.time() + sub * h;

    world.force_acc.assign(n, Vec3{});
    world.torque_acc.assign(n, Vec3{});
    for (const auto& w : world.applied) {
      world.add_force(w.body, w.force);
      world.add_torque(w.body, w.torque);
    }
    for (ForceElement* e : elements) e->apply(world, t_sub);

    std::vector<Contact> contacts = detect_contacts(world);
    const std::map<BodyPair, FrictionState> pre_resolve = world.friction_memory.state;
    resolve_contact_forces(contacts, world, world.gains, world.friction_memory, h);
    check_friction_invariants(contacts, world);
    for (const auto& [pair, state] : world.friction_memory.state) {
      if (state != FrictionState::Dynamic) continue;
      auto prev = pre_resolve.find(pair);
      if (prev == pre_resolve.end() || prev->second != FrictionState::Dynamic)
        world.slip_transition_time[pair] = t_sub + h;
    }

    for (const Contact& c : contacts) {
      const RigidBody& a = world.body(c.body_a);
      const RigidBody& b = world.body(c.body_b);
      // Guard the damping part of the normal impulse: it may cancel the
      // approach speed within the substep but never reverse it.
      double n_applied = c.normal_force;
      const double v_n = c.separating_speed();
      if (v_n < 0.0) {
        const double w_n = effective_inv_mass(a, b, c.point, c.normal);
        if (w_n > 0.0) {
          const double spring = std::max(0.0, world.gains.k_n * c.depth);
          const double cap = spring + (-v_n) / (w_n * h);
          n_applied = std::min(n_applied, cap);
        }
      }
      const Vec3 f = c.normal * n_applied + c.tangential_force;
      world.add_force_at(c.body_a, f, c.point);
      world.add_force_at(c.body_b, -f, c.point);
    }

    for (RigidBody& body : world.bodies) {
      if (body.kinematic) continue;
      body.linear_velocity += world.force_acc[body.id] * (h * body.inv_mass());
      body.linear_velocity += world.gravity * h;
      body.angular_velocity += (body.inv_inertia_world() * world.torque_acc[body.id]) * h;

      body.pose.position += body.linear_velocity * h;
      const Vec3& w = body.angular_velocity;
      const Quat dq = Quat{0, w.x, w.y, w.z} * body.pose.orientation;
      body.pose.orientation = Quat{body.pose.orientation.w + 0.5 * h * dq.w,
                                   body.pose.orientation.x + 0.5 * h * dq.x,
                                   body.pose.orientation.y + 0.5 * h * dq.y,
                                   body.pose.orientation.z + 0.5 * h * dq.z}
                                  .normalized();

      if (body.linear_velocity.norm() > 1e3)
        throw NumericalDivergence("body '" + body.name + "' exceeded 1e3 m/s at step " +
                                  std::to_string(world.step_index) + ", substep " +
                                  std::to_string(sub));
    }

    if (sub == substeps - 1) world.contacts = std::move(contacts);
  }

  world.applied.clear();
  world.force_acc.clear();
  world.torque_acc.clear();
  world.step_index += 1;
}

}  // namespace hapsim
