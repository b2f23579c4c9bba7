#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sprout/callbacks.hpp"
#include "sprout/rng.hpp"

using namespace sprout;

namespace {

struct Trace {
  std::vector<std::size_t> saves;
  std::vector<double> lr_after;  // rate in effect after each epoch's callbacks
  std::size_t stopped_at = 0;
  std::size_t best_epoch = 0;
  std::vector<double> best;
};

/// Replays a val_loss sequence through the three callbacks in epoch order.
Trace replay(const std::vector<double>& losses, const CallbackConfig& cfg = {}) {
  auto s = CallbackState::initial(1e-3);
  Trace t;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const std::size_t epoch = i + 1;
    if (model_checkpoint_step(s, losses[i], epoch, cfg)) t.saves.push_back(epoch);
    s.current_lr = reduce_lr_on_plateau_step(s, losses[i], cfg);
    t.lr_after.push_back(s.current_lr);
    t.best.push_back(s.best_val_loss);
    if (early_stopping_step(s, losses[i], epoch, cfg) == StopDecision::stop) {
      t.stopped_at = epoch;
      break;
    }
  }
  t.best_epoch = s.es_best_epoch;
  return t;
}

}  // namespace

TEST_SUITE("callbacks") {
  TEST_CASE("checkpoint saves on strict improvement only") {
    CHECK(replay({1.0, 0.9, 0.95}).saves == std::vector<std::size_t>{1, 2});
    CHECK(replay({1.0, 1.0}).saves == std::vector<std::size_t>{1});
    CHECK(replay({5.0}).saves == std::vector<std::size_t>{1});
  }

  TEST_CASE("save_best_only off saves every epoch") {
    CallbackConfig cfg;
    cfg.save_best_only = false;
    CHECK(replay({1.0, 2.0, 3.0}, cfg).saves == std::vector<std::size_t>{1, 2, 3});
  }

  TEST_CASE("all-improving forty epochs: no stop, no rate change, saves every epoch") {
    std::vector<double> losses;
    for (int e = 0; e < 40; ++e) losses.push_back(2.0 - 0.01 * e);
    const auto t = replay(losses);
    CHECK(t.stopped_at == 0);
    CHECK(t.saves.size() == 40);
    for (double lr : t.lr_after) CHECK(lr == 1e-3);
  }

  TEST_CASE("plateau halves the rate after epochs 6 and 11") {
    std::vector<double> losses(12, 1.0);
    losses[0] = 0.5;
    for (std::size_t i = 1; i < losses.size(); ++i) losses[i] = 0.7;
    const auto t = replay(losses);
    for (std::size_t e = 1; e <= 5; ++e) CHECK(t.lr_after[e - 1] == 1e-3);
    for (std::size_t e = 6; e <= 10; ++e) CHECK(t.lr_after[e - 1] == 5e-4);
    CHECK(t.lr_after[10] == 2.5e-4);
  }

  TEST_CASE("the rate never drops below the floor") {
    auto s = CallbackState::initial(1e-6);
    s.lr_best = 0.1;
    for (int e = 0; e < 30; ++e) s.current_lr = reduce_lr_on_plateau_step(s, 1.0);
    CHECK(s.current_lr == 1e-6);
    auto t = CallbackState::initial(1.5e-6);
    t.lr_best = 0.1;
    for (int e = 0; e < 5; ++e) t.current_lr = reduce_lr_on_plateau_step(t, 1.0);
    CHECK(t.current_lr == 1e-6);
  }

  TEST_CASE("best at epoch seven then flat stops after epoch seventeen") {
    std::vector<double> losses;
    for (int e = 1; e <= 7; ++e) losses.push_back(1.0 - 0.05 * e);
    for (int e = 8; e <= 40; ++e) losses.push_back(0.9);
    const auto t = replay(losses);
    CHECK(t.stopped_at == 17);
    CHECK(t.best_epoch == 7);
  }

  TEST_CASE("best may precede the last epoch") {
    std::vector<double> losses;
    for (int e = 1; e <= 37; ++e) losses.push_back(1.0 / e);
    losses.push_back(0.5);
    losses.push_back(0.6);
    losses.push_back(0.7);
    const auto t = replay(losses);
    CHECK(t.stopped_at == 0);
    CHECK(t.best_epoch == 37);
    CHECK(t.saves.back() == 37);
  }

  TEST_CASE("min_delta tightens improvement") {
    CHECK(improves(0.9, 1.0, 0.0));
    CHECK_FALSE(improves(1.0, 1.0, 0.0));
    CHECK_FALSE(improves(0.95, 1.0, 0.1));
    CHECK(improves(0.85, 1.0, 0.1));
  }

  TEST_CASE("invariants hold on random traces") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> losses;
      const std::size_t n = 1 + rng.below(60);
      double level = 2.0;
      for (std::size_t i = 0; i < n; ++i) {
        level += rng.uniform(-0.1, 0.08);
        losses.push_back(rng.coin() ? level : std::round(level * 10) / 10);
      }
      const auto t = replay(losses);
      const std::size_t ran = t.stopped_at ? t.stopped_at : n;
      // Running minimum and strict-minimum save epochs.
      double run_min = CallbackState::kInf;
      std::vector<std::size_t> expect_saves;
      for (std::size_t i = 0; i < ran; ++i) {
        if (losses[i] < run_min) {
          run_min = losses[i];
          expect_saves.push_back(i + 1);
        }
        CHECK(t.best[i] == run_min);
      }
      CHECK(t.saves == expect_saves);
      for (std::size_t i = 0; i < t.lr_after.size(); ++i) {
        CHECK(t.lr_after[i] <= 1e-3);
        CHECK(t.lr_after[i] >= 1e-6);
        if (i > 0) CHECK(t.lr_after[i] <= t.lr_after[i - 1]);
      }
      if (t.stopped_at) {
        CHECK(t.stopped_at - t.best_epoch >= 10);
      } else {
        CHECK(t.lr_after.size() == n);
      }
      // Pure function of the inputs: replaying gives the same trace.
      const auto again = replay(losses);
      CHECK(again.saves == t.saves);
      CHECK(again.lr_after == t.lr_after);
      CHECK(again.stopped_at == t.stopped_at);
    }
  }
}
