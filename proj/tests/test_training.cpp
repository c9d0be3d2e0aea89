#include <cmath>

#include "doctest.h"

#include "ldsb/datasets.hpp"
#include "ldsb/error.hpp"
#include "ldsb/training.hpp"

using namespace ldsb;

namespace {

IfmSpec tiny_spec() {
  IfmSpec s;
  s.d = 6;
  s.num_nonlinear = 5;
  s.n_train = 200;
  s.n_val = 0;
  s.n_test = 100;
  s.seed = 4;
  return s;
}

MLP tiny_net(Regime regime, std::uint64_t seed) {
  Rng rng = Rng(seed).stream("init");
  return init_network(regime, 20, 6, 2, rng);
}

}  // namespace

TEST_CASE("learning rate warms up then decays to zero") {
  TrainConfig c;
  c.steps = 100;
  c.peak_lr = 1.0;
  c.warmup_frac = 0.1;
  CHECK(lr_at(c, 0) == 0.0);
  CHECK(lr_at(c, 5) == doctest::Approx(0.5));
  CHECK(lr_at(c, 10) == doctest::Approx(1.0));
  CHECK(lr_at(c, 99) == doctest::Approx(0.0));
  double prev = lr_at(c, 10);
  for (std::size_t s = 11; s < 100; ++s) {
    const double lr = lr_at(c, s);
    CHECK(lr <= prev);
    CHECK(lr >= 0.0);
    prev = lr;
  }
}

TEST_CASE("presets pick grid entries") {
  CHECK(train_preset(Regime::Rich).peak_lr == 0.5);
  CHECK(train_preset(Regime::Rich, 1).peak_lr == 1.0);
  CHECK(train_preset(Regime::Lazy).peak_lr == 0.01);
  CHECK(train_preset(Regime::Lazy, 0, 1).batch_size == 256);
  CHECK(train_preset(Regime::Lazy, 0, 0, 1).weight_decay == 1e-4);
  CHECK_THROWS_AS(train_preset(Regime::Rich, 2), Error);
}

TEST_CASE("training is deterministic and fits the linear feature") {
  const DatasetSplits s = gen_ifm_splits(tiny_spec());
  TrainConfig c = train_preset(Regime::Rich);
  c.steps = 400;
  c.eval_every = 100;
  const TrainResult a = train(tiny_net(Regime::Rich, 0), s.train, c);
  const TrainResult b = train(tiny_net(Regime::Rich, 0), s.train, c);
  CHECK(a.net == b.net);
  CHECK(a.log.to_csv() == b.log.to_csv());
  CHECK(evaluate(a.net, s.test) == 1.0);
  REQUIRE(a.log.records.size() == 5);
  CHECK(a.log.records.front().step == 0);
  CHECK(a.log.records.back().step == 400);
  CHECK(a.log.step_loss.size() == 400);
  CHECK(a.log.records.back().train_loss < a.log.records.front().train_loss);
}

TEST_CASE("zero steps returns the initial network") {
  const DatasetSplits s = gen_ifm_splits(tiny_spec());
  TrainConfig c;
  c.steps = 0;
  const MLP net = tiny_net(Regime::Lazy, 1);
  const TrainResult r = train(net, s.train, c);
  CHECK(r.net == net);
  CHECK(r.log.records.size() == 1);
}

TEST_CASE("divergence is reported with the partial log") {
  const DatasetSplits s = gen_ifm_splits(tiny_spec());
  TrainConfig c = train_preset(Regime::Lazy);
  c.peak_lr = 1e6;
  c.steps = 200;
  c.eval_every = 10;
  bool thrown = false;
  try {
    train(tiny_net(Regime::Lazy, 2), s.train, c);
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(e.kind() == ErrorKind::Divergence);
    CHECK(!e.log().records.empty());
  }
  CHECK(thrown);
}

TEST_CASE("shape mismatches are rejected") {
  const DatasetSplits s = gen_ifm_splits(tiny_spec());
  Rng rng(0);
  const MLP wrong = init_rich(5, 3, 2, rng);
  CHECK_THROWS_AS(train(wrong, s.train, TrainConfig{}), Error);
  TrainConfig bad;
  bad.momentum = 1.5;
  CHECK_THROWS_AS(train(tiny_net(Regime::Rich, 0), s.train, bad), Error);
}
