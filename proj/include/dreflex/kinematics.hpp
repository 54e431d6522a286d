#pragma once

#include "dreflex/model.hpp"
#include "dreflex/types.hpp"

#include <vector>

namespace dreflex {

// World placement of every link plus the world-frame joint axes/anchors,
// computed once per configuration and shared by Jacobian/dynamics routines.
struct FrameCache {
  std::vector<Iso3> link_pose;     // world pose of each link frame
  std::vector<Vec3> joint_anchor;  // world joint origin, per joint
  std::vector<Vec3> joint_axis;    // world joint axis, per joint
  std::vector<Vec3> link_com;      // world COM, per link
  Vec3 base_origin = Vec3::Zero();
};

Quat quat_from_q(const VecX& q);           // wxyz layout
void check_state_dims(const RobotModel& model, const VecX& q);

FrameCache forward_kinematics(const RobotModel& model, const VecX& q);

Vec3 com(const RobotModel& model, const VecX& q);
Vec3 com(const RobotModel& model, const FrameCache& fk);

// 6 x nv Jacobian of a world point attached to `link`: rows 0..2 linear,
// rows 3..5 angular. `world_point` must be the point's current world position.
Mat6X point_jacobian_world(const RobotModel& model, const FrameCache& fk, int link,
                           const Vec3& world_point);

// Convenience overload taking the point in the link frame.
Mat6X point_jacobian(const RobotModel& model, const VecX& q, int link, const Vec3& local_point);

// 3 x nv Jacobian of the whole-body COM.
Mat3X com_jacobian(const RobotModel& model, const FrameCache& fk);

// Velocity of a world point attached to `link` given generalized velocity dq.
Vec3 point_velocity(const RobotModel& model, const FrameCache& fk, int link,
                    const Vec3& world_point, const VecX& dq);

// Integrate q by dq over dt (semi-implicit position update); renormalizes the
// quaternion. Base angular velocity is world-frame.
VecX integrate_q(const RobotModel& model, const VecX& q, const VecX& dq, double dt);

}  // namespace dreflex
