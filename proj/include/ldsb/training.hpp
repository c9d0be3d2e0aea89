#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ldsb/datasets.hpp"
#include "ldsb/error.hpp"
#include "ldsb/model.hpp"

namespace ldsb {

struct TrainConfig {
  std::size_t steps = 4000;
  std::size_t batch_size = 128;
  double peak_lr = 0.5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double warmup_frac = 0.05;
  std::uint64_t seed = 0;
  std::size_t eval_every = 200;
  bool track_effrank = true;

  void validate() const;
};

// Training grids: rich lr {0.5, 1.0}, lazy lr {0.01, 0.05},
// batch {128, 256}, weight decay {0, 1e-4}. Indices pick grid entries; the
// defaults take the first of each.
TrainConfig train_preset(Regime regime, std::size_t lr_index = 0, std::size_t batch_index = 0,
                         std::size_t wd_index = 0);

struct TrainRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double effrank_W = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  // Minibatch objective at every update, for trend checks.
  std::vector<double> step_loss;

  std::string to_csv() const;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, TrainLog last_log)
      : Error(ErrorKind::Divergence, "non-finite loss at step " + std::to_string(step)),
        step_(step), log_(std::move(last_log)) {}

  std::size_t step() const noexcept { return step_; }
  const TrainLog& log() const noexcept { return log_; }

 private:
  std::size_t step_;
  TrainLog log_;
};

// Warmup to peak_lr over floor(warmup_frac * steps) steps (at least one),
// then cosine decay reaching 0 at the final step.
double lr_at(const TrainConfig& config, std::size_t step);

struct TrainResult {
  MLP net;
  TrainLog log;
};

// Minibatch SGD with heavy-ball momentum (v <- mu v - lr g; theta <- theta + v).
// Batches come from epoch-wise shuffles of the "batches" stream of
// config.seed. Records are written at step 0, every eval_every updates and
// after the last update. When `val` is null, val_acc repeats train_acc.
TrainResult train(const MLP& net, const LabeledDataset& data, const TrainConfig& config,
                  const LabeledDataset* val = nullptr);

double evaluate(const MLP& net, const LabeledDataset& data);

}  // namespace ldsb
