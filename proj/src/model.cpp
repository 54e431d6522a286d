#include "dreflex/model.hpp"

#include "dreflex/toml_lite.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <map>
#include <sstream>

namespace dreflex {

int RobotModel::link_index(const std::string& link_name) const {
  for (int i = 0; i < n_links(); ++i)
    if (links[i].name == link_name) return i;
  throw ModelError("unknown link: " + link_name);
}

int RobotModel::joint_index(const std::string& joint_name) const {
  for (int i = 0; i < n_joints(); ++i)
    if (joints[i].name == joint_name) return i;
  throw ModelError("unknown joint: " + joint_name);
}

bool RobotModel::is_actuated(int joint) const {
  for (int a : actuated)
    if (a == joint) return true;
  return false;
}

VecX RobotModel::actuation_to_generalized(const VecX& tau_actuated) const {
  if (tau_actuated.size() != n_actuated()) throw ModelError("actuated torque dimension mismatch");
  VecX tau = VecX::Zero(nv());
  for (int i = 0; i < n_actuated(); ++i) tau[base_nv() + actuated[i]] = tau_actuated[i];
  return tau;
}

VecX RobotModel::neutral_q() const {
  VecX q = VecX::Zero(nq());
  if (floating) q[3] = 1.0;  // identity quaternion, wxyz
  return q;
}

void RobotModel::validate() const {
  if (links.empty()) throw ModelError("model has no links");
  if (static_cast<int>(joints.size()) != n_links() - 1)
    throw ModelError("joint count must be link count - 1 (tree rooted at base)");
  for (const Link& l : links) {
    if (!(l.mass > 0)) throw ModelError("link '" + l.name + "' has non-positive mass");
    if ((l.inertia - l.inertia.transpose()).norm() > 1e-9 * (1.0 + l.inertia.norm()))
      throw ModelError("link '" + l.name + "' inertia not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(l.inertia);
    if (es.eigenvalues().minCoeff() <= 0)
      throw ModelError("link '" + l.name + "' inertia not positive definite");
  }
  for (int j = 0; j < n_joints(); ++j) {
    const Joint& jt = joints[j];
    if (jt.child_link != j + 1)
      throw ModelError("joint '" + jt.name + "' must drive link " + std::to_string(j + 1));
    if (jt.parent_link < 0 || jt.parent_link >= jt.child_link)
      throw ModelError("joint '" + jt.name + "' violates tree ordering (parent before child)");
    if (std::abs(jt.axis.norm() - 1.0) > 1e-6)
      throw ModelError("joint '" + jt.name + "' axis not unit length");
    if (jt.pos_lower > jt.pos_upper)
      throw ModelError("joint '" + jt.name + "' has inverted position limits");
    if (jt.vel_limit <= 0 || jt.torque_limit <= 0)
      throw ModelError("joint '" + jt.name + "' limits must be positive");
  }
  for (int a : actuated) {
    if (a < 0 || a >= n_joints()) throw ModelError("actuated index out of range");
    if (joints[a].type != JointType::Revolute)
      throw ModelError("actuated joint '" + joints[a].name + "' is not revolute");
  }
}

namespace {

Vec3 read_vec3(const toml::Table& t, const std::string& key) {
  auto v = t.numbers(key);
  if (v.size() != 3) throw ModelError("field '" + key + "' must have 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

Mat3 read_inertia(const toml::Table& t) {
  // either [ixx, iyy, izz] diagonal or a 9-entry row-major matrix
  auto v = t.numbers("inertia");
  Mat3 m = Mat3::Zero();
  if (v.size() == 3) {
    m.diagonal() << v[0], v[1], v[2];
  } else if (v.size() == 9) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
  } else {
    throw ModelError("inertia must have 3 (diagonal) or 9 entries");
  }
  return m;
}

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

RobotModel parse_robot_model(const std::string& text, const std::string& origin) {
  toml::Table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::ParseError& e) {
    throw ModelError(origin + ": " + e.what());
  }

  RobotModel model;
  model.source_hash = fnv1a(text);
  try {
    model.name = doc.table("robot").str_or("name", "unnamed");
    model.floating = doc.table("robot").boolean_or("floating", true);

    std::map<std::string, int> link_ids;
    for (const toml::Value& lv : doc.array("link")) {
      const toml::Table& lt = lv.as_table();
      Link link;
      link.name = lt.str("name");
      if (link_ids.count(link.name)) throw ModelError("duplicate link '" + link.name + "'");
      link.mass = lt.number("mass");
      link.com = lt.contains("com") ? read_vec3(lt, "com") : Vec3::Zero();
      link.inertia = read_inertia(lt);
      if (lt.contains("sphere")) {
        for (const toml::Value& sv : lt.array("sphere")) {
          const toml::Table& st = sv.as_table();
          SpherePrimitive s;
          s.center = read_vec3(st, "center");
          s.radius = st.number("radius");
          link.spheres.push_back(s);
        }
      }
      if (lt.contains("box")) {
        for (const toml::Value& bv : lt.array("box")) {
          const toml::Table& bt = bv.as_table();
          BoxPrimitive b;
          b.center = read_vec3(bt, "center");
          b.half_extents = read_vec3(bt, "half_extents");
          link.boxes.push_back(b);
        }
      }
      link_ids[link.name] = static_cast<int>(model.links.size());
      model.links.push_back(std::move(link));
    }

    const toml::Array no_joints;
    for (const toml::Value& jv : doc.contains("joint") ? doc.array("joint") : no_joints) {
      const toml::Table& jt = jv.as_table();
      Joint joint;
      joint.name = jt.str("name");
      std::string type = jt.str_or("type", "revolute");
      if (type != "revolute") throw ModelError("joint '" + joint.name + "': unsupported type " + type);
      joint.type = JointType::Revolute;
      auto parent = jt.str("parent");
      auto child = jt.str("child");
      if (!link_ids.count(parent)) throw ModelError("joint '" + joint.name + "': unknown parent " + parent);
      if (!link_ids.count(child)) throw ModelError("joint '" + joint.name + "': unknown child " + child);
      joint.parent_link = link_ids.at(parent);
      joint.child_link = link_ids.at(child);
      joint.origin = jt.contains("origin") ? read_vec3(jt, "origin") : Vec3::Zero();
      joint.frame = jt.contains("rpy") ? rpy_to_matrix(read_vec3(jt, "rpy")) : Mat3::Identity();
      joint.axis = read_vec3(jt, "axis");
      if (joint.axis.norm() > 0) joint.axis.normalize();
      if (jt.contains("limits")) {
        auto lim = jt.numbers("limits");
        if (lim.size() != 2) throw ModelError("limits must be [lower, upper]");
        joint.pos_lower = lim[0];
        joint.pos_upper = lim[1];
      }
      joint.vel_limit = jt.number_or("vel_limit", 10.0);
      joint.torque_limit = jt.number_or("torque_limit", 200.0);
      model.joints.push_back(std::move(joint));
    }

    // joints must already be listed parent-before-child with child link j+1
    for (int j = 0; j < model.n_joints(); ++j) {
      if (model.joints[j].child_link != j + 1)
        throw ModelError("joints must be listed so that joint j drives link j+1 "
                         "(tree order); joint '" + model.joints[j].name + "' drives link " +
                         std::to_string(model.joints[j].child_link));
    }

    if (doc.table("robot").contains("actuated")) {
      for (const toml::Value& av : doc.table("robot").array("actuated")) {
        model.actuated.push_back(model.joint_index(av.as_string()));
      }
    } else {
      for (int j = 0; j < model.n_joints(); ++j) model.actuated.push_back(j);
    }
  } catch (const toml::ParseError& e) {
    throw ModelError(origin + ": " + e.what());
  }

  model.validate();
  return model;
}

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_robot_model(ss.str(), path);
}

}  // namespace dreflex
