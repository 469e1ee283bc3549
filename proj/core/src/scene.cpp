#include "hapsim/scene.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "hapsim/errors.hpp"

namespace hapsim {

namespace {

using nlohmann::json;

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(std::string(what) + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json quat_to_json(const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

Quat quat_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(std::string(what) + " must be an array of 4 numbers (w,x,y,z)");
  return Quat{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>()}
      .normalized();
}

json shape_to_json(const Shape& s) {
  if (const auto* b = std::get_if<BoxShape>(&s))
    return json{{"type", "box"}, {"half_extents", vec_to_json(b->half_extents)}};
  if (const auto* sp = std::get_if<SphereShape>(&s))
    return json{{"type", "sphere"}, {"radius", sp->radius}};
  const auto& hs = std::get<HalfSpaceShape>(s);
  return json{{"type", "halfspace"},
              {"normal", vec_to_json(hs.normal)},
              {"offset", hs.offset}};
}

Shape shape_from_json(const json& j) {
  const std::string type = j.value("type", "");
  if (type == "box") {
    if (!j.contains("half_extents")) throw ParseError("box shape needs half_extents");
    const Vec3 h = vec_from_json(j.at("half_extents"), "half_extents");
    if (h.x <= 0 || h.y <= 0 || h.z <= 0)
      throw ParseError("box half_extents must be positive");
    return BoxShape{h};
  }
  if (type == "sphere") {
    const double r = j.value("radius", 0.0);
    if (r <= 0) throw ParseError("sphere radius must be positive");
    return SphereShape{r};
  }
  if (type == "halfspace") {
    HalfSpaceShape hs;
    hs.normal = j.contains("normal") ? vec_from_json(j.at("normal"), "normal")
                                     : Vec3{0, 1, 0};
    const double n = hs.normal.norm();
    if (n < 1e-12) throw ParseError("halfspace normal must be nonzero");
    hs.normal = hs.normal * (1.0 / n);
    hs.offset = j.value("offset", 0.0);
    return hs;
  }
  throw ParseError("unknown shape type '" + type + "'");
}

json material_to_json(const Material& m) {
  return json{{"mu_static", m.mu_static},
              {"mu_dynamic", m.mu_dynamic},
              {"density", m.density},
              {"restitution", m.restitution}};
}

Material material_from_json(const json& j) {
  Material m;
  m.mu_static = j.value("mu_static", m.mu_static);
  m.mu_dynamic = j.value("mu_dynamic", m.mu_dynamic);
  m.density = j.value("density", m.density);
  m.restitution = j.value("restitution", m.restitution);
  if (!m.valid()) throw ParseError("invalid material (need mu_static >= mu_dynamic >= 0, density > 0)");
  return m;
}

}  // namespace

World parse_world(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("scene '" + origin + "': " + e.what());
  }

  const int version = j.value("version", 1);
  if (version != 1)
    throw ParseError("scene '" + origin + "': unsupported version " +
                     std::to_string(version));

  World w;
  if (j.contains("gravity")) w.gravity = vec_from_json(j.at("gravity"), "gravity");
  w.dt = j.value("dt", w.dt);
  if (w.dt <= 0) throw ParseError("dt must be positive");
  w.substeps = j.value("substeps", w.substeps);
  if (w.substeps < 1) throw ParseError("substeps must be >= 1");
  if (j.contains("gains")) {
    w.gains.k_n = j.at("gains").value("k_n", w.gains.k_n);
    w.gains.c_n = j.at("gains").value("c_n", w.gains.c_n);
  }

  for (const json& bj : j.value("bodies", json::array())) {
    RigidBody b;
    b.name = bj.value("name", "");
    if (!bj.contains("shape")) throw ParseError("body '" + b.name + "' needs a shape");
    b.shape = shape_from_json(bj.at("shape"));
    if (bj.contains("material")) b.material = material_from_json(bj.at("material"));
    b.kinematic = bj.value("kinematic", false);
    if (bj.contains("position"))
      b.pose.position = vec_from_json(bj.at("position"), "position");
    if (bj.contains("orientation"))
      b.pose.orientation = quat_from_json(bj.at("orientation"), "orientation");
    if (bj.contains("velocity"))
      b.linear_velocity = vec_from_json(bj.at("velocity"), "velocity");
    if (bj.contains("angular_velocity"))
      b.angular_velocity = vec_from_json(bj.at("angular_velocity"), "angular_velocity");

    if (std::holds_alternative<HalfSpaceShape>(b.shape) && !b.kinematic)
      throw ParseError("half-space body '" + b.name + "' must be kinematic");

    if (!b.kinematic) {
      if (bj.contains("mass")) {
        b.mass = bj.at("mass").get<double>();
      } else {
        // density is g/cm^3; volume m^3 -> 1000 kg per (g/cm^3 * m^3).
        b.mass = b.material.density * 1000.0 * shape_volume(b.shape);
      }
      if (b.mass <= 0) throw ParseError("body '" + b.name + "' needs positive mass");
      b.inertia = shape_inertia(b.shape, b.mass);
    }
    w.add_body(std::move(b));
  }
  return w;
}

World load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_world(ss.str(), path);
}

std::string world_to_json(const World& world) {
  json bodies = json::array();
  for (const RigidBody& b : world.bodies) {
    json bj{{"name", b.name},
            {"shape", shape_to_json(b.shape)},
            {"material", material_to_json(b.material)},
            {"kinematic", b.kinematic},
            {"position", vec_to_json(b.pose.position)},
            {"orientation", quat_to_json(b.pose.orientation)},
            {"velocity", vec_to_json(b.linear_velocity)},
            {"angular_velocity", vec_to_json(b.angular_velocity)}};
    if (!b.kinematic) bj["mass"] = b.mass;
    bodies.push_back(bj);
  }
  json j{{"version", 1},
         {"gravity", vec_to_json(world.gravity)},
         {"dt", world.dt},
         {"substeps", world.substeps},
         {"gains", {{"k_n", world.gains.k_n}, {"c_n", world.gains.c_n}}},
         {"bodies", bodies}};
  return j.dump(2) + "\n";
}

void save_world(const World& world, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file '" + path + "'");
  out << world_to_json(world);
  if (!out) throw IoError("failed writing scene file '" + path + "'");
}

MotorModel motor_from_json_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("motor model: ") + e.what());
  }
  MotorModel m;
  const std::string name = j.value("name", "612");
  if (name == "612")
    m = MotorModel::m612();
  else if (name == "716")
    m = MotorModel::m716();
  else
    m.name = name;
  m.f_sat = j.value("f_sat", m.f_sat);
  m.i_sat = j.value("i_sat", m.i_sat);
  m.i_dead = j.value("i_dead", m.i_dead);
  m.axle_radius = j.value("axle_radius", m.axle_radius);
  m.f_res = j.value("f_res", m.f_res);
  m.q = j.value("q", m.q);
  m.f_current_stable = j.value("f_current_stable", m.f_current_stable);
  if (!m.valid()) throw ParseError("invalid motor model '" + name + "'");
  return m;
}

std::string motor_to_json(const MotorModel& m) {
  json j{{"name", m.name},
         {"f_sat", m.f_sat},
         {"i_sat", m.i_sat},
         {"i_dead", m.i_dead},
         {"axle_radius", m.axle_radius},
         {"f_res", m.f_res},
         {"q", m.q},
         {"f_current_stable", m.f_current_stable}};
  return j.dump(2) + "\n";
}

}  // namespace hapsim
