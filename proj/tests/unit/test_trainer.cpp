#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sprout/csv.hpp"
#include "sprout/error.hpp"
#include "sprout/trainer.hpp"
#include "support.hpp"

using namespace sprout;

namespace {

constexpr std::size_t kSize = 32;

Model<float> tiny_model(std::size_t freeze = 80) {
  ModelOptions o;
  o.alpha = 0.25;
  o.input_size = kSize;
  o.freeze_prefix = freeze;
  return build_model<float>(o);
}

TensorSource synthetic(std::size_t per_class, std::size_t offset = 0) {
  std::vector<Tensor<float>> images;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < 7; ++k)
    for (std::size_t i = 0; i < per_class; ++i) {
      images.push_back(test::synthetic_image(k, offset + i, kSize));
      labels.push_back(k);
    }
  return TensorSource(std::move(images), std::move(labels), 7);
}

TrainConfig quiet(std::size_t epochs, std::size_t batch) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("config validation") {
    CHECK_NOTHROW(TrainConfig{}.validate());
    CHECK_THROWS_AS(quiet(0, 32).validate(), ValueError);
    CHECK_THROWS_AS(quiet(1, 0).validate(), ValueError);
    auto c = quiet(1, 1);
    c.initial_lr = 0.0;
    CHECK_THROWS_AS(c.validate(), ValueError);
  }

  TEST_CASE("one epoch on a one-batch set gives one history row at the initial rate") {
    test::TempDir dir;
    auto model = tiny_model();
    const auto train = synthetic(1);
    const auto val = synthetic(1, 50);
    auto cfg = quiet(1, 32);
    cfg.out_dir = dir.path();
    const auto r = run_training(model, train, val, cfg);
    REQUIRE(r.history.size() == 1);
    CHECK(r.history[0].epoch == 1);
    CHECK(r.history[0].lr == 0.001);
    CHECK(r.saved_epochs == std::vector<std::size_t>{1});
    CHECK(std::filesystem::exists(dir / "best.ckpt"));
    const auto rows = parse_csv(read_file(dir / "history.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"epoch", "train_loss", "train_acc", "val_loss",
                                              "val_acc", "lr"});
    CHECK(rows[1][0] == "1");
    CHECK(std::stod(rows[1][5]) == 0.001);
    CHECK(std::stod(rows[1][3]) == r.history[0].val_loss);
  }

  TEST_CASE("training loss is cross-entropy plus the penalty") {
    auto model = tiny_model();
    const auto src = synthetic(1);
    BatchLoader loader(src, 7, false, AugmentPipeline::evaluation(), 1);
    AdamW opt;
    const auto batch = loader.batch(0);
    const double penalty = l2_penalty(model, 0.01, false);
    const auto step = train_step(model, opt, batch, 0.01);
    CHECK(step.penalty == penalty);
    CHECK(std::abs(step.loss - (step.cce + step.penalty)) <= 1e-9);
    CHECK(step.cce > 0.0);
    CHECK(step.correct <= 7);
    CHECK(opt.state().step == 1);
  }

  TEST_CASE("a non-finite loss aborts with epoch and batch before updating") {
    auto model = tiny_model(87);
    std::vector<Tensor<float>> images{test::synthetic_image(0, 0, kSize)};
    images[0][5] = std::nanf("");
    TensorSource bad(images, {0}, 7);
    const auto before = model.snapshot();
    try {
      run_training(model, bad, synthetic(1), quiet(1, 1));
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch 1, batch 1") != std::string::npos);
    }
    CHECK(model.snapshot() == before);
  }

  TEST_CASE("evaluation is consistent with its predictions") {
    auto model = tiny_model();
    const auto src = synthetic(2);
    BatchLoader loader(src, 5, false, AugmentPipeline::evaluation(), 1);
    const auto ev = evaluate(model, loader, 0.0);
    REQUIRE(ev.y_true.size() == 14);
    REQUIRE(ev.probabilities.shape() == Shape{14, 7});
    std::size_t correct = 0;
    double cce = 0.0;
    for (std::size_t i = 0; i < 14; ++i) {
      double s = 0.0;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < 7; ++k) {
        s += ev.probabilities[i * 7 + k];
        if (ev.probabilities[i * 7 + k] > ev.probabilities[i * 7 + arg]) arg = k;
      }
      CHECK(std::abs(s - 1.0) < 1e-5);
      CHECK(arg == ev.y_pred[i]);
      correct += ev.y_pred[i] == ev.y_true[i];
      cce -= std::log(std::max<double>(ev.probabilities[i * 7 + ev.y_true[i]], 1e-12));
    }
    CHECK(ev.accuracy == static_cast<double>(correct) / 14.0);
    CHECK(ev.loss == doctest::Approx(cce / 14.0).epsilon(1e-6));
    const auto with_l2 = evaluate(model, loader, 0.01);
    CHECK(with_l2.loss == doctest::Approx(ev.loss + l2_penalty(model, 0.01, false)).epsilon(1e-9));
  }

  TEST_CASE("same seed reproduces the history exactly") {
    const auto train = synthetic(2);
    const auto val = synthetic(1, 40);
    auto a = tiny_model(), b = tiny_model();
    const auto ra = run_training(a, train, val, quiet(2, 4));
    const auto rb = run_training(b, train, val, quiet(2, 4));
    REQUIRE(ra.history.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
      CHECK(ra.history[i].val_loss == rb.history[i].val_loss);
    }
    CHECK(a.snapshot() == b.snapshot());
  }

  TEST_CASE("early stopping restores the best epoch's weights, not the last") {
    test::TempDir dir;
    const auto train = synthetic(2);
    const auto val = synthetic(1, 40);
    auto cfg = quiet(10, 7);
    cfg.out_dir = dir.path();
    cfg.callbacks.early_stop_patience = 2;
    // Nothing after the first epoch can beat best - 1e9: the best is epoch 1.
    cfg.callbacks.min_delta = 1e9;
    auto model = tiny_model();
    const auto r = run_training(model, train, val, cfg);
    CHECK(r.history.size() == 3);
    CHECK(r.callbacks.stopped);
    CHECK(r.callbacks.es_best_epoch == 1);
    CHECK(r.restored_best);
    CHECK(r.saved_epochs == std::vector<std::size_t>{1});

    auto from_disk = tiny_model();
    const auto state = load_checkpoint(dir / "best.ckpt", from_disk);
    CHECK(state.epoch == 1);
    CHECK(model.snapshot() == from_disk.snapshot());

    auto no_restore = tiny_model();
    cfg.callbacks.restore_best_weights = false;
    cfg.out_dir.clear();
    const auto r2 = run_training(no_restore, train, val, cfg);
    CHECK_FALSE(r2.restored_best);
    CHECK(no_restore.snapshot() != model.snapshot());
  }

  TEST_CASE("all epochs run when early stopping never fires") {
    auto model = tiny_model(87);
    std::ostringstream log;
    auto cfg = quiet(3, 7);
    cfg.log = &log;
    cfg.callbacks.early_stop_patience = 100;
    const auto r = run_training(model, synthetic(1), synthetic(1, 9), cfg);
    CHECK(r.history.size() == 3);
    CHECK_FALSE(r.callbacks.stopped);
    std::size_t lines = 0;
    for (char c : log.str()) lines += c == '\n';
    CHECK(lines == 3);
  }

  TEST_CASE("class-count mismatch is rejected") {
    auto model = tiny_model();
    std::vector<Tensor<float>> images{test::synthetic_image(0, 0, kSize)};
    TensorSource three(images, {0}, 3);
    CHECK_THROWS_AS(run_training(model, three, three, quiet(1, 1)), DimensionError);
  }
}
