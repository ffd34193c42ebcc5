#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace kgmn {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  nn::AdamConfig adam;
  std::size_t patience = 5;   // epochs without validation gain before stopping
  double target_score = 2.0;  // stop as soon as validation reaches this
  std::uint64_t seed = 1;
  std::function<void(const std::string&)> log;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> valid_score;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::size_t best_epoch = 0;
  double best_score = -1.0;
  bool stopped_early = false;
};

// Shuffled mini-batch Adam with validation-based early stopping.
// `batch_step` runs forward/backward for the given example indices, leaves
// gradients of the mean batch loss in the store and returns that loss.
// `validate` returns a score to maximize, or nullopt when there is no
// validation data. The best-scoring parameters are restored at the end.
inline TrainLog fit(nn::ParamStore& ps, std::size_t n_examples,
                    const std::function<double(const std::vector<std::size_t>&)>& batch_step,
                    const std::function<std::optional<double>()>& validate, const TrainOptions& opt) {
  TrainLog log;
  if (opt.epochs == 0) return log;
  if (n_examples == 0) throw TrainingAborted("training corpus is empty");
  if (opt.batch_size == 0) throw std::invalid_argument("batch size must be positive");

  nn::Rng rng(opt.seed);
  std::vector<std::size_t> order(n_examples);
  std::iota(order.begin(), order.end(), 0);
  std::vector<nn::Matrix> best;
  std::size_t best_step = 0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    for (std::size_t i = n_examples; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_examples; start += opt.batch_size) {
      const std::size_t end = std::min(n_examples, start + opt.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      ps.zero_grad();
      const double loss = batch_step(batch);
      if (!std::isfinite(loss))
        throw TrainingAborted("non-finite loss at step " + std::to_string(ps.step()) + " (epoch " +
                              std::to_string(epoch) + ")");
      nn::adam_step(ps, opt.adam);
      log.step_losses.push_back(loss);
      epoch_loss += loss;
      ++batches;
    }
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(batches), validate ? validate() : std::nullopt};
    log.epochs.push_back(rec);
    if (opt.log) {
      std::string line = "epoch " + std::to_string(epoch) + " loss " + std::to_string(rec.train_loss);
      if (rec.valid_score) line += " valid " + std::to_string(*rec.valid_score);
      opt.log(line);
    }
    if (!rec.valid_score) {
      log.best_epoch = epoch;
      continue;
    }
    if (*rec.valid_score > log.best_score) {
      log.best_score = *rec.valid_score;
      log.best_epoch = epoch;
      best = ps.snapshot();
      best_step = ps.step();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (*rec.valid_score >= opt.target_score || since_best >= opt.patience) {
      log.stopped_early = epoch < opt.epochs;
      break;
    }
  }
  if (!best.empty()) {
    ps.restore(best);
    ps.set_step(best_step);
  }
  return log;
}

}  // namespace kgmn
