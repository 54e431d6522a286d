#pragma once

// Training pipeline for the success classifier: scenario-level dataset
// splits, example extraction (one example per grid cell), minibatch Adam on
// binary cross-entropy, and weight selection by simulated validation success.

#include "dreflex/dataset.hpp"
#include "dreflex/mlp.hpp"

#include <cstdint>
#include <vector>

namespace dreflex {

struct TrainConfig {
  std::vector<int> hidden = {128, 128};  // paper-scale preset uses {1024, 1024}
  double dropout = 0.2;
  AdamConfig adam;  // lr 1e-5, betas (0.9, 0.999)
  int batch_size = 256;
  int epochs = 40;
  int eval_period = 4;  // simulated validation every this many epochs
  uint64_t seed = 0;
  double train_frac = 0.375, val_frac = 0.125, test_frac = 0.5;
  InputVariant variant = InputVariant::Standard;

  void validate() const;  // throws std::invalid_argument
};

// Scenario-granularity split: all cells of a scenario land in one part.
struct SplitIds {
  std::vector<int> train, validation, test;  // indices into dataset.records
};
SplitIds split_dataset(const Dataset& dataset, uint64_t seed, double train_frac,
                       double val_frac, double test_frac);

// Dense example matrix (one column per grid cell of every usable record).
struct ExampleSet {
  MatX X;   // features x examples
  VecX y;   // labels in {0, 1}
};
ExampleSet build_examples(const RobotModel& model, const Dataset& dataset,
                          const std::vector<int>& record_ids, const FeatureSpec& spec);

// For each avoidable scenario in `record_ids`: run one episode at the
// classifier's argmax cell; returns successes / count. -1 when no scenario
// is avoidable (reported as an error by callers).
double simulated_validation_success(const RobotModel& model, const World& world,
                                    const Dataset& dataset, const std::vector<int>& record_ids,
                                    const MLPWeights& net, const FeatureSpec& spec,
                                    const EpisodeConfig& ecfg, int workers);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<int> eval_epochs;            // epochs at which validation ran
  std::vector<double> validation_success;  // parallel to eval_epochs
  int selected_eval = -1;                  // index into the two arrays above
  double label_base_rate = 0.0;            // fraction of positive cells
  double wall_clock_s = 0.0;
};

struct TrainResult {
  MLPWeights weights;  // best checkpoint by validation success
  FeatureSpec spec;
  SplitIds split;
  TrainReport report;
};

// Full procedure: split, train with dropout, periodically evaluate simulated
// validation success, return the argmax checkpoint. Deterministic in
// (dataset, config). Throws on NaN loss.
TrainResult train_classifier(const RobotModel& model, const World& world,
                             const Dataset& dataset, const TrainConfig& cfg,
                             const EpisodeConfig& ecfg, int workers);

// Actuated joint angles of a configuration (helper shared with inference).
VecX actuated_angles(const RobotModel& model, const VecX& q);
VecX actuated_rates(const RobotModel& model, const VecX& dq);

}  // namespace dreflex
