#pragma once

// Online reflex: query the classifier over the wall grid, pick the argmax
// cell, and (for left-leg damage) map the problem through the sagittal
// mirror before querying.

#include "dreflex/mlp.hpp"
#include "dreflex/scenario.hpp"
#include "dreflex/wbc.hpp"

#include <utility>

namespace dreflex {

struct ConfidenceMap {
  GridSpec grid;
  VecX values;  // row-major iy * nx + ix, in [0, 1]
};

// One batched forward pass over every grid cell; bit-identical to per-cell
// scalar mlp_forward calls.
ConfidenceMap predict_map(const MLPWeights& net, const FeatureSpec& spec, const VecX& q_act,
                          const VecX& dq_act, const VecX& mask, double d, double alpha,
                          const GridSpec& grid);

// Exact argmax; ties broken by lowest row-major index. Returns (ix, iy).
std::pair<int, int> select_contact(const ConfidenceMap& map);

// Grid cell the reflex reaches for in this scenario, in the scenario's own
// wall frame. Left-leg damage is handled by symmetrizing: posture and joint
// mask mirrored, alpha negated, and the selected x flipped back.
Vec2 choose_reflex_cell(const RobotModel& model, const MLPWeights& net, const FeatureSpec& spec,
                        const Scenario& scenario, const GridSpec& grid);

// Urgent-mode entry plus the hand target toward the selected cell; the
// episode loop calls this once, `delay` seconds after the damage trigger.
void trigger_reflex(WholeBodyController& wbc, const WallPlane& wall, const Vec2& cell,
                    int hand_link);

}  // namespace dreflex
