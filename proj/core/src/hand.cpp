#include "hapsim/hand.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hapsim/errors.hpp"

namespace hapsim {

const char* to_string(Finger f) {
  switch (f) {
    case Finger::Thumb: return "thumb";
    case Finger::Index: return "index";
    case Finger::Middle: return "middle";
    case Finger::Ring: return "ring";
    case Finger::Pinky: return "pinky";
  }
  return "?";
}

const char* to_string(Phalanx p) {
  switch (p) {
    case Phalanx::Proximal: return "proximal";
    case Phalanx::Middle: return "middle";
    case Phalanx::Distal: return "distal";
  }
  return "?";
}

Finger finger_from_string(const std::string& s) {
  for (int i = 0; i < kFingerCount; ++i)
    if (s == to_string(static_cast<Finger>(i))) return static_cast<Finger>(i);
  throw ParseError("unknown finger '" + s + "'");
}

Phalanx phalanx_from_string(const std::string& s) {
  for (int i = 0; i < kPhalanxCount; ++i)
    if (s == to_string(static_cast<Phalanx>(i))) return static_cast<Phalanx>(i);
  throw ParseError("unknown phalanx '" + s + "'");
}

// Bone runs along the local x axis; joints sit at the +-x ends.
double phalanx_half_length(Phalanx p) {
  switch (p) {
    case Phalanx::Proximal: return 0.015;
    case Phalanx::Middle: return 0.0125;
    case Phalanx::Distal: return kDistalRadius;
  }
  return 0.01;
}

namespace {

constexpr double kPhalanxMass = 0.008;  // kg

Shape phalanx_shape(Phalanx p) {
  if (p == Phalanx::Distal) return SphereShape{kDistalRadius};
  return BoxShape{{phalanx_half_length(p), 0.007, 0.007}};
}

}  // namespace

SimHand make_hand(World& world, const TrackedHandPose& initial,
                  const CouplingParams& coupling) {
  SimHand hand;
  hand.coupling = coupling;

  Material skin;
  skin.mu_static = 1e3;  // pairing rule takes the minimum, so objects govern
  skin.mu_dynamic = 1e3;
  skin.density = 1.0;

  std::vector<BodyId> all;
  for (int fi = 0; fi < kFingerCount; ++fi) {
    for (int pi = 0; pi < kPhalanxCount; ++pi) {
      const auto f = static_cast<Finger>(fi);
      const auto p = static_cast<Phalanx>(pi);
      const auto& t = initial.target(f, p);
      if (!t) continue;

      RigidBody body;
      body.name = std::string(to_string(f)) + "_" + to_string(p);
      body.pose = *t;
      body.mass = kPhalanxMass;
      body.shape = phalanx_shape(p);
      body.inertia = shape_inertia(body.shape, body.mass);
      body.material = skin;
      const BodyId id = world.add_body(std::move(body));
      hand.bodies[fi][pi] = id;
      all.push_back(id);
    }

    // Link adjacent phalanges that both exist.  Anchors are placed at the
    // midpoint of the facing bone ends, so separation starts at zero.
    for (int pi = 0; pi + 1 < kPhalanxCount; ++pi) {
      const auto f = static_cast<Finger>(fi);
      const auto pa = static_cast<Phalanx>(pi);
      const auto pb = static_cast<Phalanx>(pi + 1);
      if (!hand.has(f, pa) || !hand.has(f, pb)) continue;

      const RigidBody& a = world.body(hand.body(f, pa));
      const RigidBody& b = world.body(hand.body(f, pb));
      const Vec3 end_a =
          a.pose.position + a.pose.orientation.rotate({phalanx_half_length(pa), 0, 0});
      const Vec3 end_b =
          b.pose.position + b.pose.orientation.rotate({-phalanx_half_length(pb), 0, 0});
      const Vec3 joint = (end_a + end_b) * 0.5;

      BallJoint j;
      j.body_a = a.id;
      j.body_b = b.id;
      j.anchor_a = a.pose.orientation.rotate_inv(joint - a.pose.position);
      j.anchor_b = b.pose.orientation.rotate_inv(joint - b.pose.position);
      hand.joints.push_back(j);
    }
  }

  // Hand self-collision is out of scope.
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j) world.exclude_collision(all[i], all[j]);

  return hand;
}

std::vector<PhalanxWrench> apply_coupling(const World& world, const SimHand& hand,
                                          const TrackedHandPose& target,
                                          const CouplingParams& params) {
  // Damping gains are capped against the substep so light phalanges cannot
  // be driven unstable by configuration.
  const double h = world.dt / std::max(1, world.substeps);

  std::vector<PhalanxWrench> out;
  for (int fi = 0; fi < kFingerCount; ++fi) {
    for (int pi = 0; pi < kPhalanxCount; ++pi) {
      const BodyId id = hand.bodies[fi][pi];
      if (id == kInvalidBody) continue;
      const auto& t = target.targets[fi][pi];
      if (!t) continue;

      const RigidBody& body = world.body(id);
      const double c_lin = std::min(params.c_lin, 0.5 * body.mass / h);
      Vec3 f = (t->position - body.pose.position) * params.k_lin -
               body.linear_velocity * c_lin;
      const double mag = f.norm();
      if (mag > params.max_force) f = f * (params.max_force / mag);

      const Vec3 rot_err =
          (t->orientation * body.pose.orientation.conjugate()).to_rotation_vector();
      const double i_min =
          std::min({body.inertia.x, body.inertia.y, body.inertia.z});
      const double c_ang = std::min(params.c_ang, 0.5 * i_min / h);
      const Vec3 tau = rot_err * params.k_ang - body.angular_velocity * c_ang;

      out.push_back({id, f, tau});
    }
  }
  return out;
}

std::vector<JointForce> enforce_ball_joints(const World& world, const SimHand& hand) {
  const double h = world.dt / std::max(1, world.substeps);

  std::vector<JointForce> out;
  out.reserve(hand.joints.size());
  for (const BallJoint& j : hand.joints) {
    const RigidBody& a = world.body(j.body_a);
    const RigidBody& b = world.body(j.body_b);
    const Vec3 pa = a.pose.position + a.pose.orientation.rotate(j.anchor_a);
    const Vec3 pb = b.pose.position + b.pose.orientation.rotate(j.anchor_b);

    const double m_eff = 1.0 / (a.inv_mass() + b.inv_mass());
    const double c = std::min(hand.joint_gains.c, 0.5 * m_eff / h);
    const Vec3 f = (pb - pa) * hand.joint_gains.k +
                   (b.velocity_at(pb) - a.velocity_at(pa)) * c;
    out.push_back({j.body_a, j.body_b, pa, pb, f});
  }
  return out;
}

ContactSummary fingertip_contact_summary(const World& world, const SimHand& hand,
                                         Finger finger) {
  ContactSummary s;
  const BodyId tip = hand.body(finger, Phalanx::Distal);
  if (tip == kInvalidBody) return s;

  double deepest = -1.0;
  for (const Contact& c : world.contacts) {
    if (c.body_a != tip && c.body_b != tip) continue;
    s.in_contact = true;
    s.total_normal_force += c.normal_force;
    if (static_cast<int>(c.friction_state) > static_cast<int>(s.friction_state))
      s.friction_state = c.friction_state;
    s.slip_speed = std::max(s.slip_speed, c.tangential_velocity().norm());
    if (c.depth > deepest) {
      deepest = c.depth;
      s.normal_relative_speed = c.separating_speed();
    }
  }
  return s;
}

void HandCouplingElement::apply(World& world, double time) {
  current_ = targets_(time);
  for (const PhalanxWrench& w : apply_coupling(world, *hand_, current_, hand_->coupling)) {
    world.add_force(w.body, w.force);
    world.add_torque(w.body, w.torque);
  }
  for (const JointForce& jf : enforce_ball_joints(world, *hand_)) {
    world.add_force_at(jf.body_a, jf.force, jf.point_a);
    world.add_force_at(jf.body_b, -jf.force, jf.point_b);
  }
}

}  // namespace hapsim
