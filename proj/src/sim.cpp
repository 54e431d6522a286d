#include "dreflex/sim.hpp"

#include <Eigen/Cholesky>

namespace dreflex {

SpdGains JointGroupGains::expand(const RobotModel& model) const {
  SpdGains g;
  const int na = model.n_actuated();
  g.kp = VecX::Zero(na);
  g.kd = VecX::Zero(na);
  for (int i = 0; i < na; ++i) {
    const std::string& name = model.joints[model.actuated[i]].name;
    if (name.find("hip") != std::string::npos || name.find("knee") != std::string::npos ||
        name.find("ankle") != std::string::npos) {
      g.kp[i] = legs_kp;
      g.kd[i] = legs_kd;
    } else if (name.find("shoulder") != std::string::npos ||
               name.find("elbow") != std::string::npos) {
      g.kp[i] = arms_kp;
      g.kd[i] = arms_kd;
    } else {
      g.kp[i] = torso_kp;
      g.kd[i] = torso_kd;
    }
  }
  return g;
}

VecX stable_pd(const RobotModel& model, const VecX& q, const VecX& dq, const VecX& q_target,
               const SpdGains& gains, double dt, const MatX& M, const VecX& nonlinear) {
  const int nv = model.nv();
  const int na = model.n_actuated();
  if (q_target.size() != na) throw ModelError("stable_pd: target dimension mismatch");

  // proportional term uses the position predicted one step ahead
  VecX p_term = VecX::Zero(nv);
  VecX d_term = VecX::Zero(nv);
  MatX M_damped = M;
  const int off = model.base_nv();
  const int qoff = model.base_nq();
  for (int i = 0; i < na; ++i) {
    const int row = off + model.actuated[i];
    const double err = q[qoff + model.actuated[i]] + dt * dq[row] - q_target[i];
    p_term[row] = -gains.kp[i] * err;
    d_term[row] = -gains.kd[i] * dq[row];
    M_damped(row, row) += dt * gains.kd[i];
  }
  const VecX qdd = Eigen::LLT<MatX>(M_damped).solve(p_term + d_term - nonlinear);
  VecX tau = VecX::Zero(na);
  for (int i = 0; i < na; ++i) {
    const int row = off + model.actuated[i];
    const double t = p_term[row] + d_term[row] - dt * gains.kd[i] * qdd[row];
    const double lim = model.joints[model.actuated[i]].torque_limit;
    tau[i] = std::clamp(t, -lim, lim);
  }
  return tau;
}

Simulator::Simulator(const RobotModel& model, const World& world, const SpdGains& gains,
                     double dt)
    : model_(model), world_(world), gains_(gains), dt_(dt) {
  if (!(dt > 0 && dt <= 0.01)) throw ModelError("dt must be in (0, 0.01]");
}

void Simulator::step(SimState& state, const VecX& q_target, const std::vector<bool>& passive) {
  const FrameCache fk = forward_kinematics(model_, state.q);
  contacts_ = detect_contacts(model_, fk, world_);
  std::vector<ContactOperator> ops =
      contact_operators(contacts_, model_, fk, state.dq, world_, dt_);

  const MatX M = mass_matrix(model_, fk);
  const VecX F = nonlinear_effects(model_, fk, state.q, state.dq, world_.gravity);

  std::vector<MatX> jac(ops.size());
  MatX M_contact = M;  // contact dampers folded in, see below
  for (size_t k = 0; k < ops.size(); ++k) {
    jac[k] = point_jacobian_world(model_, fk, ops[k].link, ops[k].world_point).topRows(3);
    M_contact.noalias() += dt_ * jac[k].transpose() * ops[k].damping * jac[k];
  }

  // The tracker's implicit solve must see the contact-damped matrix: with the
  // bare mass matrix it predicts the stance foot swinging freely (tiny
  // reduced inertia) and cancels nearly all of the proportional torque that
  // the anchored foot actually needs.
  VecX tau_a = stable_pd(model_, state.q, state.dq, q_target, gains_, dt_, M_contact, F);
  if (!passive.empty()) {
    for (int i = 0; i < model_.n_actuated(); ++i) {
      if (passive[model_.actuated[i]]) tau_a[i] = 0.0;
    }
  }
  tau_ = tau_a;

  // damping is handled implicitly: (M + dt sum J'CJ) dq_next = M dq + dt rhs
  const int nv = model_.nv();
  VecX rhs = model_.actuation_to_generalized(tau_a) - F;
  for (size_t k = 0; k < ops.size(); ++k) {
    rhs.noalias() += jac[k].transpose() * ops[k].f_spring;
  }

  VecX dq_next = state.dq;
  // realized normals must not pull and friction must stay inside the cone;
  // re-solve with adjusted dampers for the few contacts that violate this
  for (int pass = 0; pass < 4; ++pass) {
    MatX A = M;
    for (size_t k = 0; k < ops.size(); ++k)
      A.noalias() += dt_ * jac[k].transpose() * ops[k].damping * jac[k];
    dq_next = Eigen::LLT<MatX>(A).solve(M * state.dq + dt_ * rhs);
    bool adjusted = false;
    for (size_t k = 0; k < ops.size(); ++k) {
      ContactOperator& op = ops[k];
      const Vec3 v = jac[k] * dq_next;
      const Vec3 f = op.f_spring - op.damping * v;
      const double fn = op.normal.dot(f);
      const Mat3 nn = op.normal * op.normal.transpose();
      if (fn < -1e-9) {  // pulling: drop the normal damper
        const Mat3 P = Mat3::Identity() - nn;
        op.damping = P * op.damping * P;
        adjusted = true;
        continue;
      }
      const Vec3 ft = f - fn * op.normal;
      const double cap = op.mu * std::max(fn, 0.0);
      if (ft.norm() > cap * (1 + 1e-6) + 1e-9) {  // sliding: shrink the tangential damper
        const Vec3 vt = v - op.normal.dot(v) * op.normal;
        const double kt_new = cap / std::max(vt.norm(), 1e-2);
        op.damping = op.damping.cwiseProduct(nn).sum() * nn +
                     kt_new * (Mat3::Identity() - nn);
        adjusted = true;
      }
    }
    if (!adjusted) break;
  }

  forces_.clear();
  forces_.reserve(ops.size());
  for (size_t k = 0; k < ops.size(); ++k) {
    const ContactOperator& op = ops[k];
    ContactForce f;
    f.wrench.link = op.link;
    f.wrench.world_point = op.world_point;
    f.wrench.force = op.f_spring - op.damping * (jac[k] * dq_next);
    f.normal_force = op.normal.dot(f.wrench.force);
    f.surface = op.surface;
    f.link = op.link;
    forces_.push_back(f);
  }

  (void)nv;
  state.dq = dq_next;
  state.q = integrate_q(model_, state.q, state.dq, dt_);
  state.time += dt_;
  if (!state.q.allFinite() || !state.dq.allFinite()) diverged_ = true;
}

bool detect_fall(const RobotModel& model, const std::vector<Contact>& contacts,
                 const std::vector<int>& foot_links, int hand_link) {
  (void)model;
  for (const Contact& c : contacts) {
    if (c.surface == Surface::Floor) {
      bool is_foot = false;
      for (int f : foot_links)
        if (c.link == f) is_foot = true;
      if (!is_foot) return true;
    } else {  // wall
      if (c.link != hand_link) return true;
    }
  }
  return false;
}

double wall_normal_force_on(const std::vector<ContactForce>& forces, int link) {
  double total = 0;
  for (const ContactForce& f : forces) {
    if (f.surface == Surface::Wall && f.link == link) total += f.normal_force;
  }
  return total;
}

}  // namespace dreflex
