#include "dreflex/kinematics.hpp"

namespace dreflex {

Quat quat_from_q(const VecX& q) {
  return Quat(q[3], q[4], q[5], q[6]);  // stored wxyz
}

void check_state_dims(const RobotModel& model, const VecX& q) {
  if (q.size() != model.nq())
    throw ModelError("configuration dimension mismatch: got " + std::to_string(q.size()) +
                     ", expected " + std::to_string(model.nq()));
}

FrameCache forward_kinematics(const RobotModel& model, const VecX& q) {
  check_state_dims(model, q);
  FrameCache fk;
  const int nl = model.n_links();
  fk.link_pose.resize(nl);
  fk.joint_anchor.resize(model.n_joints());
  fk.joint_axis.resize(model.n_joints());
  fk.link_com.resize(nl);

  Iso3 base = Iso3::Identity();
  if (model.floating) {
    base.translation() = q.head<3>();
    base.linear() = quat_from_q(q).normalized().toRotationMatrix();
  }
  fk.link_pose[0] = base;
  fk.base_origin = base.translation();

  const int off = model.base_nq();
  for (int j = 0; j < model.n_joints(); ++j) {
    const Joint& joint = model.joints[j];
    const Iso3& parent = fk.link_pose[joint.parent_link];
    Iso3 x = Iso3::Identity();
    x.translation() = joint.origin;
    x.linear() = joint.frame * Eigen::AngleAxisd(q[off + j], joint.axis).toRotationMatrix();
    fk.link_pose[joint.child_link] = parent * x;
    fk.joint_anchor[j] = parent * joint.origin;
    fk.joint_axis[j] = parent.linear() * (joint.frame * joint.axis);
  }
  for (int i = 0; i < nl; ++i) fk.link_com[i] = fk.link_pose[i] * model.links[i].com;
  return fk;
}

Vec3 com(const RobotModel& model, const FrameCache& fk) {
  Vec3 weighted = Vec3::Zero();
  double total = 0;
  for (int i = 0; i < model.n_links(); ++i) {
    weighted += model.links[i].mass * fk.link_com[i];
    total += model.links[i].mass;
  }
  return weighted / total;
}

Vec3 com(const RobotModel& model, const VecX& q) {
  return com(model, forward_kinematics(model, q));
}

namespace {

// Joint indices on the path base -> link, unordered use only.
inline void ancestor_joints(const RobotModel& model, int link, std::vector<int>& out) {
  out.clear();
  while (link > 0) {
    int j = link - 1;  // joint j drives link j+1
    out.push_back(j);
    link = model.joints[j].parent_link;
  }
}

}  // namespace

Mat6X point_jacobian_world(const RobotModel& model, const FrameCache& fk, int link,
                           const Vec3& world_point) {
  Mat6X J = Mat6X::Zero(6, model.nv());
  const int off = model.base_nv();
  if (model.floating) {
    J.block<3, 3>(0, 0).setIdentity();
    J.block<3, 3>(0, 3) = -skew(world_point - fk.base_origin);
    J.block<3, 3>(3, 3).setIdentity();
  }
  static thread_local std::vector<int> path;
  ancestor_joints(model, link, path);
  for (int j : path) {
    const Vec3& a = fk.joint_axis[j];
    J.col(off + j).head<3>() = a.cross(world_point - fk.joint_anchor[j]);
    J.col(off + j).tail<3>() = a;
  }
  return J;
}

Mat6X point_jacobian(const RobotModel& model, const VecX& q, int link, const Vec3& local_point) {
  FrameCache fk = forward_kinematics(model, q);
  return point_jacobian_world(model, fk, link, fk.link_pose[link] * local_point);
}

Mat3X com_jacobian(const RobotModel& model, const FrameCache& fk) {
  Mat3X J = Mat3X::Zero(3, model.nv());
  const int off = model.base_nv();
  const double total = model.total_mass();
  static thread_local std::vector<int> path;
  for (int i = 0; i < model.n_links(); ++i) {
    const double w = model.links[i].mass / total;
    const Vec3& p = fk.link_com[i];
    if (model.floating) {
      J.block<3, 3>(0, 0) += w * Mat3::Identity();
      J.block<3, 3>(0, 3) += -w * skew(p - fk.base_origin);
    }
    ancestor_joints(model, i, path);
    for (int j : path) {
      J.col(off + j) += w * fk.joint_axis[j].cross(p - fk.joint_anchor[j]);
    }
  }
  return J;
}

Vec3 point_velocity(const RobotModel& model, const FrameCache& fk, int link,
                    const Vec3& world_point, const VecX& dq) {
  Vec3 v = Vec3::Zero();
  const int off = model.base_nv();
  if (model.floating) {
    v = dq.head<3>() + dq.segment<3>(3).cross(world_point - fk.base_origin);
  }
  static thread_local std::vector<int> path;
  ancestor_joints(model, link, path);
  for (int j : path) {
    v += dq[off + j] * fk.joint_axis[j].cross(world_point - fk.joint_anchor[j]);
  }
  return v;
}

VecX integrate_q(const RobotModel& model, const VecX& q, const VecX& dq, double dt) {
  check_state_dims(model, q);
  VecX out = q;
  if (model.floating) {
    out.head<3>() += dt * dq.head<3>();
    Vec3 w = dq.segment<3>(3);
    double angle = w.norm() * dt;
    Quat rot = Quat::Identity();
    if (angle > 1e-14) rot = Quat(Eigen::AngleAxisd(angle, w.normalized()));
    Quat next = (rot * quat_from_q(q)).normalized();
    out[3] = next.w();
    out[4] = next.x();
    out[5] = next.y();
    out[6] = next.z();
  }
  out.tail(model.n_joints()) += dt * dq.tail(model.n_joints());
  return out;
}

}  // namespace dreflex
