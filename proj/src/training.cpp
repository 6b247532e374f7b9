#include "dtn/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace dtn {

// ---- Adam ----------------------------------------------------------------

void Adam::step(std::span<Tensor* const> params,
                std::span<const Tensor> grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("Adam::step: parameter/gradient count mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].resize(params[i]->shape());
      v_[i].resize(params[i]->shape());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape())
      throw std::invalid_argument("Adam::step: gradient shape mismatch");
    double* pd = p.data();
    double* md = m_[i].data();
    double* vd = v_[i].data();
    const double* gd = g.data();
    for (std::size_t e = 0; e < p.size(); ++e) {
      md[e] = cfg_.beta1 * md[e] + (1.0 - cfg_.beta1) * gd[e];
      vd[e] = cfg_.beta2 * vd[e] + (1.0 - cfg_.beta2) * gd[e] * gd[e];
      const double mhat = md[e] / bc1;
      const double vhat = vd[e] / bc2;
      if (cfg_.kind == OptKind::kAdamW && cfg_.weight_decay != 0.0)
        pd[e] -= cfg_.lr * cfg_.weight_decay * pd[e];
      pd[e] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

// ---- scheduler -------------------------------------------------------------

double LrScheduler::update(int epoch, double metric, double lr) {
  switch (cfg_.kind) {
    case SchedulerKind::kNone:
      return lr;
    case SchedulerKind::kStep:
      if (cfg_.period > 0 && epoch % cfg_.period == 0) lr *= cfg_.gamma;
      break;
    case SchedulerKind::kPlateau:
      if (!have_best_ || metric < best_) {
        best_ = metric;
        have_best_ = true;
        bad_epochs_ = 0;
      } else if (++bad_epochs_ >= cfg_.patience) {
        lr *= cfg_.gamma;
        bad_epochs_ = 0;
      }
      break;
  }
  return std::max(lr, cfg_.min_lr);
}

// ---- losses ----------------------------------------------------------------

NodeId cross_entropy_node(Tape& tape, NodeId logits, std::size_t label) {
  if (label >= tape.val(logits).size())
    throw std::invalid_argument("cross_entropy_node: label out of range");
  return tape.sub(tape.log_sum_exp(logits), tape.pick(logits, 0, label));
}

double cross_entropy_value(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size())
    throw std::invalid_argument("cross_entropy_value: label out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return mx + std::log(z) - logits[label];
}

NodeId squared_error_node(Tape& tape, std::span<const NodeId> preds,
                          std::span<const double> targets) {
  if (preds.size() != targets.size())
    throw std::invalid_argument("squared_error_node: length mismatch");
  std::vector<NodeId> terms;
  terms.reserve(preds.size());
  for (std::size_t j = 0; j < preds.size(); ++j) {
    NodeId diff = tape.sub(preds[j], tape.constant(targets[j]));
    terms.push_back(tape.sum_squares(diff));
  }
  return terms.size() == 1 ? terms[0] : tape.sum_n(terms);
}

NodeId l2_penalty_node(Tape& tape, const NetBinding& bind, double l2,
                       bool head_only) {
  std::vector<NodeId> terms;
  if (!head_only) {
    for (const MpoBinding& lb : bind.layers) {
      for (NodeId c : lb.cores) terms.push_back(tape.sum_squares(c));
      terms.push_back(tape.sum_squares(lb.boundary));
    }
  }
  if (bind.head) {
    for (NodeId c : bind.head->cores) terms.push_back(tape.sum_squares(c));
    terms.push_back(tape.sum_squares(bind.head->class_tensor));
    terms.push_back(tape.sum_squares(bind.head->boundary));
  }
  if (l2 == 0.0 || terms.empty()) return kNoNode;
  NodeId sum = terms.size() == 1 ? terms[0] : tape.sum_n(terms);
  return tape.scale(sum, l2);
}

// ---- training loops -----------------------------------------------------------

namespace {

struct BatchLossFn {
  // Records one sample's loss graph and returns the loss node.
  std::function<NodeId(Tape&, const NetBinding&, std::size_t sample)> record;
};

double validation_loss(const DeepTensorNetwork& net,
                       const ClassifierData& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.xs.size(); ++i)
    total += cross_entropy_value(predict_logits(net, data.xs[i]), data.ys[i]);
  return total / static_cast<double>(data.xs.size());
}

double validation_loss(const DeepTensorNetwork& net, const SequenceData& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.xs.size(); ++i) {
    const std::vector<double> pred = predict_sequence(net, data.xs[i]);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double diff = pred[j] - data.ys[i][j];
      total += diff * diff;
    }
  }
  return total / static_cast<double>(data.xs.size());
}

TrainStats run_training(DeepTensorNetwork& net, std::size_t n_samples,
                        const TrainConfig& cfg, const BatchLossFn& loss_fn,
                        const EpochCallback& cb) {
  if (n_samples == 0)
    throw std::invalid_argument("training: empty dataset");
  if (cfg.batch_size == 0)
    throw std::invalid_argument("training: zero batch size");
  std::vector<Tensor*> params = parameters(net);
  Adam opt(cfg.adam);
  LrScheduler sched(cfg.sched);
  Rng shuffle_rng(cfg.seed);

  std::vector<std::size_t> order(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) order[i] = i;

  TrainStats stats;
  Tape tape;
  std::vector<NodeId> sample_losses;
  std::vector<Tensor> grads;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_samples; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, n_samples);
      tape.reset();
      NetBinding bind = bind_net(tape, net);
      sample_losses.clear();
      for (std::size_t i = start; i < stop; ++i)
        sample_losses.push_back(loss_fn.record(tape, bind, order[i]));
      NodeId total = sample_losses.size() == 1 ? sample_losses[0]
                                               : tape.sum_n(sample_losses);
      NodeId objective =
          tape.scale(total, 1.0 / static_cast<double>(sample_losses.size()));
      NodeId penalty = l2_penalty_node(tape, bind, cfg.l2, cfg.l2_head_only);
      if (penalty != kNoNode) objective = tape.add(objective, penalty);

      const double batch_total = tape.scalar_val(total);
      if (!std::isfinite(batch_total))
        throw std::runtime_error(
            "training: non-finite loss (" + std::to_string(batch_total) +
            ") in epoch " + std::to_string(epoch) + ", batch at sample " +
            std::to_string(start));
      tape.backward(objective);
      epoch_loss += batch_total;

      grads.clear();
      for (std::size_t i = 0; i < tape.num_params(); ++i)
        grads.push_back(tape.param_grad(i));
      opt.step(params, grads);
    }
    epoch_loss /= static_cast<double>(n_samples);
    stats.epoch_loss.push_back(epoch_loss);
    stats.epochs_run = epoch;

    // Validation metrics, when a held-out set is configured. The plateau
    // scheduler follows the validation loss in that case.
    double sched_metric = epoch_loss;
    nlohmann::json val_loss = nullptr;
    nlohmann::json val_accuracy = nullptr;
    if (cfg.val_classifier) {
      const double vl = validation_loss(net, *cfg.val_classifier);
      val_loss = vl;
      val_accuracy = classifier_accuracy(net, *cfg.val_classifier);
      sched_metric = vl;
    } else if (cfg.val_sequence) {
      const double vl = validation_loss(net, *cfg.val_sequence);
      val_loss = vl;
      sched_metric = vl;
    }

    opt.set_lr(sched.update(epoch, sched_metric, opt.lr()));
    if (cfg.metrics_stream) {
      nlohmann::json line = {{"epoch", epoch},
                             {"train_loss", epoch_loss},
                             {"val_loss", val_loss},
                             {"val_accuracy", val_accuracy},
                             {"lr", opt.lr()}};
      *cfg.metrics_stream << line.dump() << "\n";
    }
    if (cb && !cb(net, epoch, epoch_loss)) {
      stats.stopped_early = true;
      break;
    }
  }
  return stats;
}

}  // namespace

TrainStats train_classifier(DeepTensorNetwork& net, const ClassifierData& data,
                            const TrainConfig& cfg, const EpochCallback& cb) {
  if (data.xs.size() != data.ys.size())
    throw std::invalid_argument("train_classifier: ragged dataset");
  BatchLossFn fn;
  fn.record = [&](Tape& tape, const NetBinding& bind, std::size_t i) {
    NodeId logits = net_logits(tape, net, bind, data.xs[i]);
    return cross_entropy_node(tape, logits, data.ys[i]);
  };
  return run_training(net, data.xs.size(), cfg, fn, cb);
}

TrainStats train_sequence(DeepTensorNetwork& net, const SequenceData& data,
                          const TrainConfig& cfg, const EpochCallback& cb) {
  if (data.xs.size() != data.ys.size())
    throw std::invalid_argument("train_sequence: ragged dataset");
  BatchLossFn fn;
  fn.record = [&](Tape& tape, const NetBinding& bind, std::size_t i) {
    std::vector<NodeId> preds = net_decoded(tape, net, bind, data.xs[i]);
    return squared_error_node(tape, preds, data.ys[i]);
  };
  return run_training(net, data.xs.size(), cfg, fn, cb);
}

double classifier_accuracy(const DeepTensorNetwork& net,
                           const ClassifierData& data) {
  if (data.xs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.xs.size(); ++i)
    hits += predict_class(net, data.xs[i]) == data.ys[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.xs.size());
}

// ---- gradient verification -----------------------------------------------------

namespace {

GradCheckResult grad_check_impl(
    DeepTensorNetwork& net,
    const std::function<NodeId(Tape&, const NetBinding&)>& record,
    const std::function<double()>& value_loss, double h) {
  Tape tape;
  NetBinding bind = bind_net(tape, net);
  tape.backward(record(tape, bind));
  std::vector<Tensor> analytic;
  for (std::size_t i = 0; i < tape.num_params(); ++i)
    analytic.push_back(tape.param_grad(i));

  std::vector<Tensor*> params = parameters(net);
  GradCheckResult res;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (std::size_t e = 0; e < t.size(); ++e) {
      const double saved = t[e];
      const double he = h * (1.0 + std::abs(saved));
      t[e] = saved + he;
      const double lp = value_loss();
      t[e] = saved - he;
      const double lm = value_loss();
      t[e] = saved;
      const double fd = (lp - lm) / (2.0 * he);
      const double an = analytic[p][e];
      const double abs_err = std::abs(an - fd);
      const double rel =
          abs_err / std::max({std::abs(an), std::abs(fd), 0.01});
      res.max_abs = std::max(res.max_abs, abs_err);
      res.max_rel = std::max(res.max_rel, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace

GradCheckResult grad_check_sequence(DeepTensorNetwork& net,
                                    std::span<const double> xs,
                                    std::span<const double> targets,
                                    double h) {
  auto record = [&](Tape& tape, const NetBinding& bind) {
    std::vector<NodeId> preds = net_decoded(tape, net, bind, xs);
    return squared_error_node(tape, preds, targets);
  };
  auto value = [&]() {
    std::vector<double> preds = predict_sequence(net, xs);
    double loss = 0.0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      const double diff = preds[j] - targets[j];
      loss += diff * diff;
    }
    return loss;
  };
  return grad_check_impl(net, record, value, h);
}

GradCheckResult grad_check_classifier(DeepTensorNetwork& net,
                                      std::span<const double> xs,
                                      std::size_t label, double h) {
  auto record = [&](Tape& tape, const NetBinding& bind) {
    NodeId logits = net_logits(tape, net, bind, xs);
    return cross_entropy_node(tape, logits, label);
  };
  auto value = [&]() {
    return cross_entropy_value(predict_logits(net, xs), label);
  };
  return grad_check_impl(net, record, value, h);
}

// ---- partitioning -----------------------------------------------------------------

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n,
                                                      std::size_t k,
                                                      std::uint64_t seed) {
  if (k == 0 || k > n)
    throw std::invalid_argument("kfold_partition: need 1 <= k <= n");
  std::vector<std::size_t> idx = permutation(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  // First n % k folds get the extra element, matching sizes within one.
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + pos, idx.begin() + pos + len);
    pos += len;
  }
  return folds;
}

}  // namespace dtn
