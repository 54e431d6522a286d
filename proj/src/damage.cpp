#include "dreflex/damage.hpp"

#include "dreflex/kinematics.hpp"

#include <algorithm>

namespace dreflex {

const char* to_string(DamageCondition c) {
  switch (c) {
    case DamageCondition::Amputation: return "amputation";
    case DamageCondition::Passive: return "passive";
    case DamageCondition::Locked: return "locked";
  }
  return "?";
}

const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

DamageCondition damage_condition_from_string(const std::string& s) {
  if (s == "amputation") return DamageCondition::Amputation;
  if (s == "passive") return DamageCondition::Passive;
  if (s == "locked") return DamageCondition::Locked;
  throw ModelError("unknown damage condition: " + s);
}

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw ModelError("unknown side: " + s);
}

std::vector<std::string> leg_joint_names(const RobotModel& model, Side side) {
  const std::string prefix = std::string(to_string(side)) + "_";
  std::vector<std::string> names;
  for (const Joint& j : model.joints) {
    // leg joints by convention: hip/knee/ankle
    if (j.name.rfind(prefix, 0) == 0 &&
        (j.name.find("hip") != std::string::npos || j.name.find("knee") != std::string::npos ||
         j.name.find("ankle") != std::string::npos)) {
      names.push_back(j.name);
    }
  }
  return names;
}

namespace {

// Merge `child` (posed at X relative to the parent frame) into `parent`.
void merge_link(Link& parent, const Link& child, const Iso3& X) {
  const double m1 = parent.mass;
  const double m2 = child.mass;
  const Vec3 c2 = X * child.com;
  const Vec3 c = (m1 * parent.com + m2 * c2) / (m1 + m2);
  const Mat3 R = X.linear();
  const Mat3 I2 = R * child.inertia * R.transpose();
  auto shift = [](double m, const Vec3& d) -> Mat3 {
    return m * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
  };
  parent.inertia = parent.inertia + shift(m1, parent.com - c) + I2 + shift(m2, c2 - c);
  parent.com = c;
  parent.mass = m1 + m2;
  for (const SpherePrimitive& s : child.spheres) {
    parent.spheres.push_back({X * s.center, s.radius});
  }
  for (const BoxPrimitive& b : child.boxes) {
    parent.boxes.push_back({X * b.center, R * b.rot, b.half_extents});
  }
}

}  // namespace

VecX DamagedRobot::map_q(const VecX& intact_q) const {
  VecX q = VecX::Zero(model.nq());
  q.head<7>() = intact_q.head<7>();
  for (size_t j = 0; j < intact_to_damaged_joint.size(); ++j) {
    int d = intact_to_damaged_joint[j];
    if (d >= 0) q[7 + d] = intact_q[7 + j];
  }
  return q;
}

VecX DamagedRobot::map_dq(const VecX& intact_dq) const {
  VecX dq = VecX::Zero(model.nv());
  dq.head<6>() = intact_dq.head<6>();
  for (size_t j = 0; j < intact_to_damaged_joint.size(); ++j) {
    int d = intact_to_damaged_joint[j];
    if (d >= 0) dq[6 + d] = intact_dq[6 + j];
  }
  return dq;
}

VecX DamagedRobot::lift_q(const VecX& damaged_q) const {
  VecX q = VecX::Zero(7 + static_cast<int>(intact_to_damaged_joint.size()));
  q.head<7>() = damaged_q.head<7>();
  for (size_t j = 0; j < intact_to_damaged_joint.size(); ++j) {
    int d = intact_to_damaged_joint[j];
    q[7 + j] = (d >= 0) ? damaged_q[7 + d] : frozen_angle[j];
  }
  return q;
}

VecX DamagedRobot::lift_dq(const VecX& damaged_dq) const {
  VecX dq = VecX::Zero(6 + static_cast<int>(intact_to_damaged_joint.size()));
  dq.head<6>() = damaged_dq.head<6>();
  for (size_t j = 0; j < intact_to_damaged_joint.size(); ++j) {
    int d = intact_to_damaged_joint[j];
    if (d >= 0) dq[6 + j] = damaged_dq[6 + d];
  }
  return dq;
}

DamagedRobot apply_damage(const RobotModel& model, const DamageSpec& spec,
                          const VecX& q_at_damage) {
  check_state_dims(model, q_at_damage);

  const auto leg = leg_joint_names(model, spec.leg);
  enum class JointFate { Keep, Passive, Locked, Amputated };
  std::vector<JointFate> fate(model.n_joints(), JointFate::Keep);
  for (const auto& [name, cond] : spec.joints) {
    if (std::find(leg.begin(), leg.end(), name) == leg.end())
      throw ModelError("damaged joint '" + name + "' is not on the " + to_string(spec.leg) +
                       " leg");
    int j = model.joint_index(name);
    switch (cond) {
      case DamageCondition::Passive: fate[j] = JointFate::Passive; break;
      case DamageCondition::Locked: fate[j] = JointFate::Locked; break;
      case DamageCondition::Amputation: fate[j] = JointFate::Amputated; break;
    }
  }

  // Amputation removes everything distal: a link dies if its driving joint is
  // amputated or its parent link is dead.
  std::vector<bool> link_dead(model.n_links(), false);
  for (int j = 0; j < model.n_joints(); ++j) {
    const int child = model.joints[j].child_link;
    if (fate[j] == JointFate::Amputated || link_dead[model.joints[j].parent_link])
      link_dead[child] = true;
  }

  DamagedRobot out;
  out.model.name = model.name + "+damage";
  out.model.source_hash = model.source_hash;
  out.intact_to_damaged_joint.assign(model.n_joints(), -1);
  out.frozen_angle.assign(model.n_joints(), 0.0);
  for (int j = 0; j < model.n_joints(); ++j) out.frozen_angle[j] = q_at_damage[7 + j];

  // link index map: intact -> damaged, or the damaged link a locked child was
  // merged into
  std::vector<int> link_map(model.n_links(), -1);
  // pose of each merged intact link relative to the damaged link it merged into
  std::vector<Iso3> merge_pose(model.n_links(), Iso3::Identity());

  out.model.links.push_back(model.links[0]);
  link_map[0] = 0;

  for (int j = 0; j < model.n_joints(); ++j) {
    const Joint& joint = model.joints[j];
    const int child = joint.child_link;
    if (link_dead[child]) continue;

    Iso3 joint_x = Iso3::Identity();
    joint_x.translation() = joint.origin;
    joint_x.linear() =
        joint.frame * Eigen::AngleAxisd(q_at_damage[7 + j], joint.axis).toRotationMatrix();

    const int parent_damaged = link_map[joint.parent_link];

    if (fate[j] == JointFate::Locked) {
      // weld child into the damaged link its parent maps to
      const Iso3 X = merge_pose[joint.parent_link] * joint_x;
      merge_link(out.model.links[parent_damaged], model.links[child], X);
      link_map[child] = parent_damaged;
      merge_pose[child] = X;
      continue;
    }

    // kept joint (possibly passive); re-anchor under the damaged parent link
    Joint nj = joint;
    const Iso3& P = merge_pose[joint.parent_link];
    nj.parent_link = parent_damaged;
    nj.origin = P * joint.origin;
    nj.frame = P.linear() * joint.frame;
    nj.child_link = static_cast<int>(out.model.links.size());
    out.model.links.push_back(model.links[child]);
    link_map[child] = nj.child_link;
    out.model.joints.push_back(nj);
    const int dj = static_cast<int>(out.model.joints.size()) - 1;
    out.intact_to_damaged_joint[j] = dj;
    out.damaged_to_intact_joint.push_back(j);
    out.passive.push_back(fate[j] == JointFate::Passive);
    if (model.is_actuated(j) && fate[j] != JointFate::Passive) out.model.actuated.push_back(dj);
  }

  out.model.validate();
  return out;
}

}  // namespace dreflex
