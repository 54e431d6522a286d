#include "dreflex/dynamics.hpp"

#include <Eigen/Cholesky>

namespace dreflex {

namespace {

// 6 x nv COM Jacobian of one link (linear at COM; angular), written into J.
void link_com_jacobian(const RobotModel& model, const FrameCache& fk, int link, Mat6X& J) {
  J.setZero();
  const Vec3& p = fk.link_com[link];
  const int off = model.base_nv();
  if (model.floating) {
    J.block<3, 3>(0, 0).setIdentity();
    J.block<3, 3>(0, 3) = -skew(p - fk.base_origin);
    J.block<3, 3>(3, 3).setIdentity();
  }
  int l = link;
  while (l > 0) {
    int j = l - 1;
    const Vec3& a = fk.joint_axis[j];
    J.col(off + j).head<3>() = a.cross(p - fk.joint_anchor[j]);
    J.col(off + j).tail<3>() = a;
    l = model.joints[j].parent_link;
  }
}

}  // namespace

MatX mass_matrix(const RobotModel& model, const FrameCache& fk) {
  const int nv = model.nv();
  MatX M = MatX::Zero(nv, nv);
  Mat6X J(6, nv);
  Mat6X IJ(6, nv);
  for (int i = 0; i < model.n_links(); ++i) {
    const Link& link = model.links[i];
    link_com_jacobian(model, fk, i, J);
    const Mat3 R = fk.link_pose[i].linear();
    const Mat3 Iw = R * link.inertia * R.transpose();
    IJ.topRows<3>() = link.mass * J.topRows<3>();
    IJ.bottomRows<3>() = Iw * J.bottomRows<3>();
    M.noalias() += J.transpose() * IJ;
  }
  return M;
}

MatX mass_matrix(const RobotModel& model, const VecX& q) {
  return mass_matrix(model, forward_kinematics(model, q));
}

VecX inverse_dynamics(const RobotModel& model, const FrameCache& fk, const VecX& q,
                      const VecX& dq, const VecX& ddq, const Vec3& gravity,
                      const std::vector<ExternalWrench>& external) {
  check_state_dims(model, q);
  const int nv = model.nv();
  if (dq.size() != nv || ddq.size() != nv) throw ModelError("velocity dimension mismatch");
  const int nl = model.n_links();

  // Propagate angular velocity/acceleration and the motion of each link's
  // frame origin down the tree. All quantities world-frame.
  std::vector<Vec3> w(nl), dw(nl), vo(nl), ao(nl), origin(nl);
  const int off = model.base_nv();
  origin[0] = fk.base_origin;
  if (model.floating) {
    w[0] = dq.segment<3>(3);
    dw[0] = ddq.segment<3>(3);
    vo[0] = dq.head<3>();
    ao[0] = ddq.head<3>();
  } else {
    w[0] = dw[0] = vo[0] = ao[0] = Vec3::Zero();
  }
  for (int j = 0; j < model.n_joints(); ++j) {
    const Joint& joint = model.joints[j];
    const int p = joint.parent_link;
    const int c = joint.child_link;
    const Vec3 r = fk.joint_anchor[j] - origin[p];
    const Vec3& a = fk.joint_axis[j];
    origin[c] = fk.joint_anchor[j];
    w[c] = w[p] + a * dq[off + j];
    dw[c] = dw[p] + a * ddq[off + j] + w[p].cross(a) * dq[off + j];
    vo[c] = vo[p] + w[p].cross(r);
    ao[c] = ao[p] + dw[p].cross(r) + w[p].cross(w[p].cross(r));
  }

  VecX tau = VecX::Zero(nv);
  Mat6X J(6, nv);
  for (int i = 0; i < nl; ++i) {
    const Link& link = model.links[i];
    const Vec3 rc = fk.link_com[i] - origin[i];
    const Vec3 ac = ao[i] + dw[i].cross(rc) + w[i].cross(w[i].cross(rc));
    const Mat3 R = fk.link_pose[i].linear();
    const Mat3 Iw = R * link.inertia * R.transpose();
    Vec6 f;
    f.head<3>() = link.mass * (ac - gravity);
    f.tail<3>() = Iw * dw[i] + w[i].cross(Iw * w[i]);
    link_com_jacobian(model, fk, i, J);
    tau.noalias() += J.transpose() * f;
  }
  for (const ExternalWrench& we : external) {
    tau -= wrench_generalized_force(model, fk, we);
  }
  return tau;
}

VecX nonlinear_effects(const RobotModel& model, const FrameCache& fk, const VecX& q,
                       const VecX& dq, const Vec3& gravity) {
  return inverse_dynamics(model, fk, q, dq, VecX::Zero(model.nv()), gravity);
}

VecX nonlinear_effects(const RobotModel& model, const VecX& q, const VecX& dq,
                       const Vec3& gravity) {
  return nonlinear_effects(model, forward_kinematics(model, q), q, dq, gravity);
}

Vec6 spatial_acceleration_bias(const RobotModel& model, const FrameCache& fk, int link,
                               const Vec3& world_point, const VecX& dq) {
  const int off = model.base_nv();
  // propagate velocities and ddq = 0 accelerations along the chain to `link`
  Vec3 w = Vec3::Zero(), dw = Vec3::Zero(), ao = Vec3::Zero();
  Vec3 origin = fk.base_origin;
  if (model.floating) w = dq.segment<3>(3);
  std::vector<int> chain;
  for (int l = link; l > 0; l = model.joints[l - 1].parent_link) chain.push_back(l - 1);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const int j = *it;
    const Vec3 r = fk.joint_anchor[j] - origin;
    const Vec3& a = fk.joint_axis[j];
    ao += dw.cross(r) + w.cross(w.cross(r));
    dw += w.cross(a) * dq[off + j];
    w += a * dq[off + j];
    origin = fk.joint_anchor[j];
  }
  const Vec3 r = world_point - origin;
  Vec6 out;
  out.head<3>() = ao + dw.cross(r) + w.cross(w.cross(r));
  out.tail<3>() = dw;
  return out;
}

Vec3 point_acceleration_bias(const RobotModel& model, const FrameCache& fk, int link,
                             const Vec3& world_point, const VecX& dq) {
  return spatial_acceleration_bias(model, fk, link, world_point, dq).head<3>();
}

VecX wrench_generalized_force(const RobotModel& model, const FrameCache& fk,
                              const ExternalWrench& w) {
  Mat6X J = point_jacobian_world(model, fk, w.link, w.world_point);
  Vec6 f;
  f.head<3>() = w.force;
  f.tail<3>() = w.torque;
  return J.transpose() * f;
}

VecX forward_dynamics(const RobotModel& model, const FrameCache& fk, const VecX& q,
                      const VecX& dq, const VecX& tau, const Vec3& gravity,
                      const std::vector<ExternalWrench>& external) {
  if (tau.size() != model.nv()) throw ModelError("generalized force dimension mismatch");
  MatX M = mass_matrix(model, fk);
  VecX rhs = tau - nonlinear_effects(model, fk, q, dq, gravity);
  for (const ExternalWrench& w : external) rhs += wrench_generalized_force(model, fk, w);
  Eigen::LLT<MatX> llt(M);
  if (llt.info() != Eigen::Success) throw ModelError("mass matrix factorization failed");
  return llt.solve(rhs);
}

VecX forward_dynamics(const RobotModel& model, const VecX& q, const VecX& dq, const VecX& tau,
                      const Vec3& gravity, const std::vector<ExternalWrench>& external) {
  return forward_dynamics(model, forward_kinematics(model, q), q, dq, tau, gravity, external);
}

double total_energy(const RobotModel& model, const VecX& q, const VecX& dq, const Vec3& gravity) {
  FrameCache fk = forward_kinematics(model, q);
  MatX M = mass_matrix(model, fk);
  double kinetic = 0.5 * dq.dot(M * dq);
  double potential = 0;
  for (int i = 0; i < model.n_links(); ++i) {
    potential -= model.links[i].mass * gravity.dot(fk.link_com[i]);
  }
  return kinetic + potential;
}

}  // namespace dreflex
