#include "ldsb/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ldsb/sb_analysis.hpp"

namespace ldsb {

void TrainConfig::validate() const {
  if (steps < 1) throw Error(ErrorKind::InvalidInput, "steps must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::InvalidInput, "batch_size must be >= 1");
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw Error(ErrorKind::InvalidInput, "peak_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::InvalidInput, "momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
    throw Error(ErrorKind::InvalidInput, "weight_decay must be >= 0");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw Error(ErrorKind::InvalidInput, "warmup_frac must be in (0, 1)");
  if (eval_every < 1) throw Error(ErrorKind::InvalidInput, "eval_every must be >= 1");
}

TrainConfig train_preset(Regime regime, std::size_t lr_index, std::size_t batch_index, std::size_t wd_index) {
  constexpr std::array<double, 2> kRichLr{0.5, 1.0};
  constexpr std::array<double, 2> kLazyLr{0.01, 0.05};
  constexpr std::array<std::size_t, 2> kBatch{128, 256};
  constexpr std::array<double, 2> kWd{0.0, 1e-4};
  if (lr_index >= 2 || batch_index >= 2 || wd_index >= 2)
    throw Error(ErrorKind::InvalidInput, "train_preset: grid index out of range");
  TrainConfig c;
  c.peak_lr = regime == Regime::Rich ? kRichLr[lr_index] : kLazyLr[lr_index];
  c.batch_size = kBatch[batch_index];
  c.weight_decay = kWd[wd_index];
  return c;
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "step,train_loss,train_acc,val_acc,effrank_W,lr\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.train_loss, r.train_acc,
                  r.val_acc, r.effrank_W, r.lr);
    out << buf;
  }
  return out.str();
}

namespace {

std::size_t warmup_steps(const TrainConfig& config) {
  const auto w = static_cast<std::size_t>(std::floor(config.warmup_frac * static_cast<double>(config.steps)));
  return std::max<std::size_t>(1, w);
}

void axpy_update(std::vector<double>& param, std::vector<double>& vel, const std::vector<double>& grad,
                 double momentum, double lr) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    vel[i] = momentum * vel[i] - lr * grad[i];
    param[i] += vel[i];
  }
}

}  // namespace

double lr_at(const TrainConfig& config, std::size_t step) {
  const std::size_t w = warmup_steps(config);
  if (step < w) return config.peak_lr * static_cast<double>(step) / static_cast<double>(w);
  const std::size_t last = config.steps > 0 ? config.steps - 1 : 0;
  const double span = last > w ? static_cast<double>(last - w) : 0.0;
  const double t = span > 0.0 ? std::min(1.0, static_cast<double>(step - w) / span) : 1.0;
  return config.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double evaluate(const MLP& net, const LabeledDataset& data) {
  if (data.n() == 0) throw Error(ErrorKind::InvalidInput, "evaluate: empty dataset");
  const auto pred = predict(net, data.X);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.y[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.n());
}

TrainResult train(const MLP& net, const LabeledDataset& data, const TrainConfig& config, const LabeledDataset* val) {
  // steps = 0 is accepted here as "return the network untouched".
  TrainConfig checked = config;
  checked.steps = std::max<std::size_t>(1, config.steps);
  checked.validate();
  net.validate();
  if (net.d() != data.d()) throw Error(ErrorKind::ShapeError, "train: network d differs from dataset d");
  if (net.c() != static_cast<std::size_t>(data.num_classes))
    throw Error(ErrorKind::ShapeError, "train: network outputs differ from dataset classes");
  if (data.n() == 0) throw Error(ErrorKind::InvalidInput, "train: empty dataset");

  TrainResult result{net, {}};
  MLP& cur = result.net;
  TrainLog& log = result.log;

  auto record = [&](std::size_t step, double lr) {
    TrainRecord r;
    r.step = step;
    r.lr = lr;
    r.train_loss = loss_value(cur, data.X, data.y, config.weight_decay);
    if (!std::isfinite(r.train_loss)) throw DivergenceError(step, log);
    r.train_acc = evaluate(cur, data);
    r.val_acc = val ? evaluate(cur, *val) : r.train_acc;
    r.effrank_W = config.track_effrank ? effective_rank(cur.W) : 0.0;
    log.records.push_back(r);
  };
  record(0, lr_at(checked, 0));
  if (config.steps == 0) return result;

  Rng rng = Rng(config.seed).stream("batches");
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t batch = std::min(config.batch_size, data.n());

  Matrix xb(batch, data.d());
  std::vector<int> yb(batch);
  std::vector<double> vW(cur.W.size(), 0.0), vb(cur.b.size(), 0.0), vA(cur.A.size(), 0.0);
  log.step_loss.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t r = 0; r < batch; ++r) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      std::copy(data.X.row(idx).begin(), data.X.row(idx).end(), xb.row(r).begin());
      yb[r] = data.y[idx];
    }
    const double lr = lr_at(config, step);
    LossAndGrad lg = loss_and_grad(cur, xb, yb, config.weight_decay);
    if (!std::isfinite(lg.loss)) throw DivergenceError(step, log);
    log.step_loss.push_back(lg.loss);

    axpy_update(cur.W.data(), vW, lg.grad.dW.data(), config.momentum, lr);
    axpy_update(cur.b, vb, lg.grad.db, config.momentum, lr);
    axpy_update(cur.A.data(), vA, lg.grad.dA.data(), config.momentum, lr);

    const std::size_t done = step + 1;
    if (done % config.eval_every == 0 || done == config.steps) record(done, lr);
  }
  return result;
}

}  // namespace ldsb
