#pragma once

#include "dreflex/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace dreflex {

enum class DamageCondition { Amputation, Passive, Locked };

enum class Side { Left, Right };

struct DamageSpec {
  Side leg = Side::Right;
  std::map<std::string, DamageCondition> joints;  // joint name -> condition

  bool empty() const { return joints.empty(); }
};

const char* to_string(DamageCondition c);
const char* to_string(Side s);
DamageCondition damage_condition_from_string(const std::string& s);
Side side_from_string(const std::string& s);

// Result of applying a damage spec at a given configuration. Locked joints are
// welded at their trigger angle (child link merged into parent); amputation
// drops the distal subtree; passive joints stay but lose actuation. Index
// maps convert between intact-model and damaged-model coordinate spaces.
struct DamagedRobot {
  RobotModel model;
  std::vector<int> intact_to_damaged_joint;  // -1 if the DoF no longer exists
  std::vector<int> damaged_to_intact_joint;
  std::vector<double> frozen_angle;          // per intact joint; angle to report for removed DoFs
  std::vector<bool> passive;                 // per damaged joint: commanded torque forced to 0

  VecX map_q(const VecX& intact_q) const;
  VecX map_dq(const VecX& intact_dq) const;
  VecX lift_q(const VecX& damaged_q) const;   // removed DoFs filled with frozen angles
  VecX lift_dq(const VecX& damaged_dq) const; // removed DoFs filled with zeros
};

// `q_at_damage` fixes the weld angle of locked joints. Throws ModelError if a
// damaged joint does not belong to the specified leg.
DamagedRobot apply_damage(const RobotModel& model, const DamageSpec& spec,
                          const VecX& q_at_damage);

// Joint names of one leg in root-to-tip order (model convention: prefixed
// "left_" / "right_").
std::vector<std::string> leg_joint_names(const RobotModel& model, Side side);

}  // namespace dreflex
