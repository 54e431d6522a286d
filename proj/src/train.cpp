#include "dreflex/train.hpp"

#include "dreflex/eval.hpp"
#include "dreflex/reflex.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace dreflex {

void TrainConfig::validate() const {
  if (hidden.empty()) throw std::invalid_argument("TrainConfig: no hidden layers");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("TrainConfig: dropout must be in [0, 1)");
  if (batch_size <= 0 || epochs <= 0 || eval_period <= 0)
    throw std::invalid_argument("TrainConfig: batch size, epochs, eval period must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("TrainConfig: split fractions must sum to 1");
  if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0)
    throw std::invalid_argument("TrainConfig: split fractions must be positive");
}

VecX actuated_angles(const RobotModel& model, const VecX& q) {
  VecX out(model.n_actuated());
  for (int i = 0; i < model.n_actuated(); ++i) out[i] = q[model.base_nq() + model.actuated[i]];
  return out;
}

VecX actuated_rates(const RobotModel& model, const VecX& dq) {
  VecX out(model.n_actuated());
  for (int i = 0; i < model.n_actuated(); ++i) out[i] = dq[model.base_nv() + model.actuated[i]];
  return out;
}

SplitIds split_dataset(const Dataset& dataset, uint64_t seed, double train_frac,
                       double val_frac, double test_frac) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  std::vector<int> usable;
  for (int i = 0; i < static_cast<int>(dataset.records.size()); ++i)
    if (!dataset.records[i].scenario.discarded) usable.push_back(i);
  SplitMix64 rng(derive_seed(seed, 0x5p117, 0));
  for (int i = static_cast<int>(usable.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i + 1)));
    std::swap(usable[i], usable[j]);
  }
  const int n = static_cast<int>(usable.size());
  const int n_train = static_cast<int>(std::lround(train_frac * n));
  const int n_val = static_cast<int>(std::lround(val_frac * n));
  SplitIds split;
  for (int i = 0; i < n; ++i) {
    if (i < n_train)
      split.train.push_back(usable[i]);
    else if (i < n_train + n_val)
      split.validation.push_back(usable[i]);
    else
      split.test.push_back(usable[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ExampleSet build_examples(const RobotModel& model, const Dataset& dataset,
                          const std::vector<int>& record_ids, const FeatureSpec& spec) {
  int total = 0;
  for (int id : record_ids)
    if (!dataset.records[id].scenario.discarded)
      total += dataset.records[id].map.grid.cells();
  ExampleSet out;
  out.X.resize(spec.dim(), total);
  out.y.resize(total);
  int k = 0;
  for (int id : record_ids) {
    const DatasetRecord& rec = dataset.records[id];
    if (rec.scenario.discarded) continue;
    const GridSpec& g = rec.map.grid;
    const VecX q_act = actuated_angles(model, rec.scenario.q_trigger);
    const VecX dq_act = actuated_rates(model, rec.scenario.dq_trigger);
    const VecX mask = damage_mask(model, rec.scenario.damage);
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        out.X.col(k) = build_features(spec, q_act, dq_act, mask, rec.scenario.wall.distance,
                                      rec.scenario.wall.alpha, g.x_at(ix), g.y_at(iy));
        out.y[k] = rec.map.at(ix, iy) ? 1.0 : 0.0;
        ++k;
      }
  }
  return out;
}

double simulated_validation_success(const RobotModel& model, const World& world,
                                    const Dataset& dataset, const std::vector<int>& record_ids,
                                    const MLPWeights& net, const FeatureSpec& spec,
                                    const EpisodeConfig& ecfg, int workers) {
  Policy policy;
  policy.tag = PolicyTag::DReflex;
  policy.net = &net;
  policy.spec = &spec;
  const std::vector<int> avoidable = avoidable_ids(dataset, record_ids);
  if (avoidable.empty()) return -1.0;
  return evaluate_policy(model, world, dataset, avoidable, policy, ecfg, workers).success_rate;
}

TrainResult train_classifier(const RobotModel& model, const World& world,
                             const Dataset& dataset, const TrainConfig& cfg,
                             const EpisodeConfig& ecfg, int workers) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  result.spec = make_feature_spec(model, cfg.variant);
  result.split = split_dataset(dataset, cfg.seed, cfg.train_frac, cfg.val_frac, cfg.test_frac);

  std::vector<int> sizes;
  sizes.push_back(result.spec.dim());
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(1);
  MLPWeights net = make_mlp(sizes, cfg.dropout, derive_seed(cfg.seed, 1, 0));
  AdamState adam = AdamState::init(net);

  const ExampleSet train_set = build_examples(model, dataset, result.split.train, result.spec);
  const int n = static_cast<int>(train_set.y.size());
  if (n == 0) throw std::runtime_error("empty training set");
  result.report.label_base_rate = train_set.y.mean();

  SplitMix64 shuffle_rng(derive_seed(cfg.seed, 2, 0));
  SplitMix64 dropout_rng(derive_seed(cfg.seed, 3, 0));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  MLPWeights best = net;
  double best_success = -2.0;
  MLPWeights grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.next_below(static_cast<uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      MatX X(train_set.X.rows(), bs);
      VecX y(bs);
      for (int i = 0; i < bs; ++i) {
        X.col(i) = train_set.X.col(order[start + i]);
        y[i] = train_set.y[order[start + i]];
      }
      const std::vector<MatX> masks =
          cfg.dropout > 0 ? sample_dropout_masks(net, bs, dropout_rng) : std::vector<MatX>{};
      const double loss =
          mlp_loss_and_gradient(net, X, y, cfg.dropout > 0 ? &masks : nullptr, grad);
      adam_step(net, grad, adam, cfg.adam);
      epoch_loss += loss;
      ++batches;
    }
    result.report.epoch_loss.push_back(epoch_loss / batches);

    const bool last = epoch + 1 == cfg.epochs;
    if ((epoch + 1) % cfg.eval_period == 0 || last) {
      const double success = simulated_validation_success(
          model, world, dataset, result.split.validation, net, result.spec, ecfg, workers);
      result.report.eval_epochs.push_back(epoch);
      result.report.validation_success.push_back(success);
      if (success > best_success) {
        best_success = success;
        best = net;
        result.report.selected_eval =
            static_cast<int>(result.report.eval_epochs.size()) - 1;
      }
    }
  }

  result.weights = std::move(best);
  result.report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace dreflex
