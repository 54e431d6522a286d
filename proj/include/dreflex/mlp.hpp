#pragma once

// Success classifier: a plain multilayer perceptron (ReLU hidden layers,
// sigmoid output) with binary cross-entropy loss, inverted-dropout
// regularization, and an Adam optimizer. All math is explicit Eigen so the
// backward pass can be verified against finite differences.

#include "dreflex/model.hpp"
#include "dreflex/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dreflex {

// Input variants probed in the evaluation: which blocks of the feature
// vector [q | d, alpha | x, y | J | dq] are present.
enum class InputVariant {
  Standard,         // q, d, alpha, x, y
  PostureAblation,  // drop q
  WallAblation,     // drop d, alpha
  BothAblation,     // drop q and d, alpha (cell coordinates only)
  JAddition,        // Standard + multi-hot damaged-joint mask
  JdqAddition,      // JAddition + normalized joint velocities
};

const char* to_string(InputVariant v);
InputVariant input_variant_from_string(const std::string& s);

// Feature construction contract shared by training and inference: joint
// angles scaled to [-1, 1] by position limits, velocities by velocity limits.
struct FeatureSpec {
  InputVariant variant = InputVariant::Standard;
  VecX q_lower, q_upper;  // per actuated joint
  VecX dq_limit;

  int n_joints() const { return static_cast<int>(q_lower.size()); }
  int dim() const;
};

FeatureSpec make_feature_spec(const RobotModel& model, InputVariant variant);

// One feature vector. `q_act`/`dq_act` are actuated joint angles/rates of the
// intact model; `damaged_mask` has one entry per actuated joint (1 = listed
// in the damage spec); (d, alpha) wall config; (x, y) grid cell.
VecX build_features(const FeatureSpec& spec, const VecX& q_act, const VecX& dq_act,
                    const VecX& damaged_mask, double d, double alpha, double x, double y);

struct MLPWeights {
  std::vector<int> sizes;  // [in, hidden..., 1]
  std::vector<MatX> W;     // W[l] is sizes[l+1] x sizes[l]
  std::vector<VecX> b;
  double dropout = 0.2;

  int n_layers() const { return static_cast<int>(W.size()); }
  MLPWeights zeros_like() const;
};

// He-initialized network. Deterministic in `seed`.
MLPWeights make_mlp(const std::vector<int>& sizes, double dropout, uint64_t seed);

// Batched inference (no dropout): X holds one sample per column; returns one
// confidence in [0, 1] per column. Deterministic and batch-size invariant.
VecX mlp_forward(const MLPWeights& net, const MatX& X);

// Inverted-dropout masks for the hidden layers (entries 0 or 1/(1-p)).
std::vector<MatX> sample_dropout_masks(const MLPWeights& net, int batch, SplitMix64& rng);

// Mean binary cross-entropy over the batch plus its gradient (reverse-mode).
// `masks` nullptr = no dropout (used at evaluation and for gradient checks).
double mlp_loss_and_gradient(const MLPWeights& net, const MatX& X, const VecX& labels,
                             const std::vector<MatX>* masks, MLPWeights& grad);

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct AdamState {
  MLPWeights m, v;  // first/second moments, same shapes as the weights
  int64_t t = 0;

  static AdamState init(const MLPWeights& net);
};

void adam_step(MLPWeights& net, const MLPWeights& grad, AdamState& state,
               const AdamConfig& cfg);

// Versioned binary weights file: header (magic, variant, layer sizes,
// dropout, normalization constants), body (row-major float64 matrices).
void save_weights(const std::string& path, const MLPWeights& net, const FeatureSpec& spec);
struct LoadedWeights {
  MLPWeights net;
  FeatureSpec spec;
};
LoadedWeights load_weights(const std::string& path);

}  // namespace dreflex
