#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "dtn/model.hpp"
#include "dtn/rng.hpp"

namespace dtn {

// ---- optimizer ---------------------------------------------------------------

enum class OptKind : std::uint8_t { kAdam = 0, kAdamW = 1 };

struct AdamConfig {
  OptKind kind = OptKind::kAdamW;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // kAdamW: decoupled weight decay, applied to the parameters directly and
  // never through the gradient moments. Ignored under kAdam (regularize
  // through the loss instead, see TrainConfig::l2).
  double weight_decay = 0.0;
};

class Adam {
public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const AdamConfig& config() const { return cfg_; }

private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// ---- learning-rate schedule ----------------------------------------------------

enum class SchedulerKind : std::uint8_t { kNone = 0, kStep = 1, kPlateau = 2 };

struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::kNone;
  double gamma = 0.5;
  int period = 20;    // kStep: decay every `period` epochs
  int patience = 10;  // kPlateau: decay after this many epochs w/o improvement
  double min_lr = 0.0;
};

class LrScheduler {
public:
  explicit LrScheduler(SchedulerConfig cfg) : cfg_(cfg) {}
  // Called once per epoch (1-based) with the monitored value, lower better.
  // Returns the new learning rate given the current one.
  double update(int epoch, double metric, double lr);

private:
  SchedulerConfig cfg_;
  double best_ = 0.0;
  bool have_best_ = false;
  int bad_epochs_ = 0;
};

// ---- losses --------------------------------------------------------------------

// -log softmax(logits)[label]
NodeId cross_entropy_node(Tape& tape, NodeId logits, std::size_t label);
double cross_entropy_value(std::span<const double> logits, std::size_t label);

// sum_j (pred_j - target_j)^2
NodeId squared_error_node(Tape& tape, std::span<const NodeId> preds,
                          std::span<const double> targets);

// l2 * sum of squared Frobenius norms over the bound parameters (the head's
// only, when head_only). kNoNode when there is nothing to penalize.
NodeId l2_penalty_node(Tape& tape, const NetBinding& bind, double l2,
                       bool head_only);

// ---- training loops --------------------------------------------------------------

struct ClassifierData {
  std::vector<std::vector<double>> xs;
  std::vector<std::size_t> ys;
};

struct SequenceData {
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> ys;
};

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool shuffle = true;
  // Coefficient of the squared-Frobenius penalty added to every batch loss
  // (gradient contribution exactly 2*l2*param). Independent of the
  // optimizer's decoupled weight decay.
  double l2 = 0.0;
  bool l2_head_only = false;  // restrict the penalty to the head's tensors
  std::size_t cv_folds = 0;   // carried for config round trips; see kfold_partition
  AdamConfig adam;
  SchedulerConfig sched;
  // Scored after each epoch when set; enables the val_* metric fields and
  // drives the plateau scheduler instead of the train loss.
  const ClassifierData* val_classifier = nullptr;
  const SequenceData* val_sequence = nullptr;
  // One JSON object per epoch when set:
  // {"epoch":..,"train_loss":..,"val_loss":..,"val_accuracy":..,"lr":..}
  // (val fields are null unless a validation set is configured).
  std::ostream* metrics_stream = nullptr;
};

// Invoked after every epoch; return false to stop training early.
using EpochCallback =
    std::function<bool(const DeepTensorNetwork& net, int epoch, double loss)>;

struct TrainStats {
  std::vector<double> epoch_loss;
  int epochs_run = 0;
  bool stopped_early = false;
};

// Mini-batch training of a classifier (cross-entropy) or a
// sequence-to-sequence network (summed squared error on decoded outputs).
// One tape is built per batch: parameters are bound once and every sample's
// graph is recorded against them, so a single backward pass yields the
// batch-summed gradient.
TrainStats train_classifier(DeepTensorNetwork& net, const ClassifierData& data,
                            const TrainConfig& cfg,
                            const EpochCallback& cb = {});
TrainStats train_sequence(DeepTensorNetwork& net, const SequenceData& data,
                          const TrainConfig& cfg, const EpochCallback& cb = {});

double classifier_accuracy(const DeepTensorNetwork& net,
                           const ClassifierData& data);

// ---- gradient verification ---------------------------------------------------------

struct GradCheckResult {
  double max_rel = 0.0;  // |analytic - fd| / max(|analytic|, |fd|, 0.01)
  double max_abs = 0.0;
  std::size_t checked = 0;
};

// Central finite differences on every parameter entry against one reverse
// sweep. The relative error uses an absolute floor of 0.01 so that noise on
// near-zero entries is judged against the gradient's working scale.
GradCheckResult grad_check_sequence(DeepTensorNetwork& net,
                                    std::span<const double> xs,
                                    std::span<const double> targets,
                                    double h = 1e-5);
GradCheckResult grad_check_classifier(DeepTensorNetwork& net,
                                      std::span<const double> xs,
                                      std::size_t label, double h = 1e-5);

// ---- data partitioning ----------------------------------------------------------

// k folds of near-equal size drawn from permutation(n, seed).
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n,
                                                      std::size_t k,
                                                      std::uint64_t seed);

}  // namespace dtn
