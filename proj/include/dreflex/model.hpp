#pragma once

// Articulated floating-base robot description. The joint graph is a tree
// rooted at the floating base (link 0). Generalized coordinates:
//   q  = [base position (3), base orientation wxyz quaternion (4), joint angles (n_j)]
//   dq = [base linear velocity (3, world), base angular velocity (3, world), joint rates]

#include "dreflex/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dreflex {

struct SpherePrimitive {
  Vec3 center = Vec3::Zero();  // link frame
  double radius = 0.0;
};

struct BoxPrimitive {
  Vec3 center = Vec3::Zero();  // link frame
  Mat3 rot = Mat3::Identity(); // link frame orientation of the box
  Vec3 half_extents = Vec3::Zero();
};

struct Link {
  std::string name;
  double mass = 0.0;               // kg
  Mat3 inertia = Mat3::Identity(); // about COM, link frame, kg m^2
  Vec3 com = Vec3::Zero();         // link frame, m
  std::vector<SpherePrimitive> spheres;
  std::vector<BoxPrimitive> boxes;
};

enum class JointType { Revolute, FloatingBase };

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  int parent_link = -1;
  int child_link = -1;
  Vec3 origin = Vec3::Zero();   // joint anchor in parent link frame
  Mat3 frame = Mat3::Identity();// fixed rotation parent -> joint frame
  Vec3 axis = Vec3::UnitZ();    // unit, joint frame
  double pos_lower = -3.14, pos_upper = 3.14;  // rad
  double vel_limit = 10.0;                     // rad/s
  double torque_limit = 200.0;                 // N m
};

struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

class RobotModel {
 public:
  std::string name;
  std::vector<Link> links;     // links[0] is the base (floating by default)
  std::vector<Joint> joints;   // joints[j] drives links[j+1]; parent index < child
  std::vector<int> actuated;   // joint indices with an actuator
  bool floating = true;        // fixed-base models anchor link 0 at the identity pose
  uint64_t source_hash = 0;    // hash of the document the model was loaded from

  int n_links() const { return static_cast<int>(links.size()); }
  int n_joints() const { return static_cast<int>(joints.size()); }
  int n_actuated() const { return static_cast<int>(actuated.size()); }
  int base_nq() const { return floating ? 7 : 0; }
  int base_nv() const { return floating ? 6 : 0; }
  int nq() const { return base_nq() + n_joints(); }
  int nv() const { return base_nv() + n_joints(); }

  double total_mass() const {
    double m = 0;
    for (const Link& l : links) m += l.mass;
    return m;
  }

  int link_index(const std::string& link_name) const;
  int joint_index(const std::string& joint_name) const;
  bool is_actuated(int joint) const;

  // Selection: generalized-force vector from actuated torques (zero base rows).
  VecX actuation_to_generalized(const VecX& tau_actuated) const;

  // Neutral configuration: base at origin, identity orientation, zero angles.
  VecX neutral_q() const;

  void validate() const;  // throws ModelError on any invariant violation
};

RobotModel load_robot_model(const std::string& path);
RobotModel parse_robot_model(const std::string& text, const std::string& origin = "<string>");

}  // namespace dreflex
