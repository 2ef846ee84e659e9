#pragma once

// Mini-batch training with early stopping, shared by the model families.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "elsa/error.hpp"
#include "elsa/nn/optim.hpp"

namespace elsa::nn {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_metric = 0.0;  // higher is better
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
};

struct FitOptions {
  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int patience = 5;
  int max_epochs = 20;
  std::uint64_t seed = 0;
};

struct Evaluation {
  double loss = 0.0;
  double metric = 0.0;
};

// loss_of(i, tape) records example i and returns its 1x1 loss. weight_of(batch)
// gives each example's share of the batch loss. evaluate() runs after every
// epoch; training stops once the metric has not strictly improved for
// `patience` epochs, and the parameters are restored to the best epoch.
template <typename LossFn, typename WeightFn, typename EvalFn>
TrainingLog fit(const std::vector<Parameter*>& params, std::size_t n_train, const FitOptions& opt,
                LossFn&& loss_of, WeightFn&& weight_of, EvalFn&& evaluate) {
  if (n_train == 0) throw Error("empty training dataset");
  AdamConfig ac;
  ac.learning_rate = opt.learning_rate;
  ac.weight_decay = opt.weight_decay;
  Adam adam(params, ac);

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  TrainingLog log;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values = snapshot(params);
  int since_best = 0;
  const auto batch = static_cast<std::size_t>(std::max(1, opt.batch_size));

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n_train; b += batch) {
      const std::size_t e = std::min(n_train, b + batch);
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(b),
                                   order.begin() + static_cast<long>(e));
      std::vector<double> w = weight_of(idx);
      double batch_loss = 0.0;
      bool any = false;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (w[j] <= 0.0) continue;
        Tape t;
        Var l = loss_of(idx[j], t);
        batch_loss += w[j] * t.value(l)(0, 0);
        t.backward(scale(t, l, w[j]));
        any = true;
      }
      if (!any) continue;
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      adam.step();
      total += batch_loss;
      ++batches;
    }
    Evaluation ev = evaluate();
    if (!std::isfinite(ev.loss))
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    log.epochs.push_back(
        {epoch, batches ? total / static_cast<double>(batches) : 0.0, ev.loss, ev.metric});
    if (ev.metric > best) {
      best = ev.metric;
      best_values = snapshot(params);
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      log.early_stopped = true;
      break;
    }
  }
  restore(params, best_values);
  return log;
}

}  // namespace elsa::nn
