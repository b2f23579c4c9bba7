// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every checked criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sprout/callbacks.hpp"
#include "sprout/commands.hpp"
#include "sprout/csv.hpp"
#include "sprout/dataset.hpp"
#include "sprout/grad_check.hpp"
#include "sprout/metrics.hpp"
#include "sprout/model.hpp"
#include "sprout/optim.hpp"
#include "sprout/parallel.hpp"
#include "sprout/trainer.hpp"
#include "oracles/param_oracle.hpp"
#include "support.hpp"

using namespace sprout;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Parameter accounting.
Outcome parameter_accounting() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto c = build_model<float>(ModelOptions{}).count_params();
  o.require(c.total == 3525063 && c.trainable == 1358087 && c.non_trainable == 2166976,
            "default counts " + std::to_string(c.total) + "/" + std::to_string(c.trainable) + "/" +
                std::to_string(c.non_trainable));
  const auto oracle = test::oracle_counts(1.0, 7, 80);
  o.require(c == ParamCounts{oracle.total, oracle.trainable, oracle.non_trainable},
            "formula oracle disagrees");
  char pct[64];
  std::snprintf(pct, sizeof pct, "%.2f/%.2f", 100.0 * c.trainable / c.total,
                100.0 * c.non_trainable / c.total);
  o.require(std::string(pct) == "38.53/61.47", std::string("percentages ") + pct);
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  o.detail = o.pass ? "3,525,063 / 1,358,087 (38.53%) / 2,166,976 (61.47%)" : o.detail;
  return o;
}

// 2. Gradient correctness over every layer kind, ten seeds each.
Outcome gradient_correctness() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_kind;
  auto run = [&](const std::string& kind, Layer<double>& layer, const Tensor<double>& x, Mode mode,
                 std::uint64_t seed) {
    Rng rng(seed);
    layer.initialize(rng);
    GradCheckOptions opts;
    opts.mode = mode;
    opts.weight_seed = seed + 100;
    const double e = grad_check(layer, x, opts).max_relative_error;
    if (e > worst) {
      worst = e;
      worst_kind = kind;
    }
  };
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Conv2D<double> conv("conv", 3, 2, 3, 2, Padding{0, 1, 0, 1});
    run("conv", conv, test::random_tensor<double>({2, 5, 5, 2}, s), Mode::inference, s);
    Conv2D<double> pw("pointwise", 1, 3, 4, 1);
    run("pointwise", pw, test::random_tensor<double>({2, 3, 3, 3}, s + 10), Mode::inference, s);
    DepthwiseConv2D<double> dw("depthwise", 3, 3, 1, Padding::uniform(1));
    run("depthwise", dw, test::random_tensor<double>({2, 4, 4, 3}, s + 20), Mode::inference, s);
    DepthwiseConv2D<double> dw2("depthwise/2", 3, 2, 2, Padding{0, 1, 0, 1});
    run("depthwise/2", dw2, test::random_tensor<double>({1, 5, 5, 2}, s + 30), Mode::inference, s);
    BatchNorm<double> bn_train("bn", 3);
    run("batchnorm/train", bn_train, test::random_tensor<double>({4, 2, 2, 3}, s + 40), Mode::train, s);
    BatchNorm<double> bn_inf("bn", 3);
    run("batchnorm/inference", bn_inf, test::random_tensor<double>({4, 2, 2, 3}, s + 50),
        Mode::inference, s);
    ActivationLayer<double> relu("relu", Activation::relu);
    run("relu", relu, test::random_away_from_zero<double>({3, 6}, s + 60, 0.05, 2.0), Mode::inference, s);
    ActivationLayer<double> relu6("relu6", Activation::relu6);
    auto x6 = test::random_away_from_zero<double>({3, 6}, s + 70, 0.05, 5.9);
    x6[0] = 6.5;
    run("relu6", relu6, x6, Mode::inference, s);
    ActivationLayer<double> softmax("softmax", Activation::softmax);
    run("softmax", softmax, test::random_tensor<double>({3, 5}, s + 80, -2, 2), Mode::inference, s);
    Dense<double> dense("dense", 4, 3, Activation::relu);
    run("dense/relu", dense, test::random_tensor<double>({3, 4}, s + 90), Mode::inference, s);
    Dense<double> out("dense/softmax", 4, 3, Activation::softmax);
    run("dense/softmax", out, test::random_tensor<double>({3, 4}, s + 95), Mode::inference, s);
    ZeroPad2D<double> pad("zeropad", Padding{0, 1, 0, 1});
    run("zeropad", pad, test::random_tensor<double>({1, 3, 3, 2}, s + 100), Mode::inference, s);
    GlobalAvgPool<double> gap("gap");
    run("gap", gap, test::random_tensor<double>({2, 3, 3, 4}, s + 110), Mode::inference, s);
    Dropout<double> drop("dropout", 0.25, s);
    drop.set_fixed_mask(true);
    run("dropout", drop, test::random_tensor<double>({3, 8}, s + 120), Mode::train, s);
  }
  const double secs = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "max relative error %.3g (%s), %.1f s", worst, worst_kind.c_str(),
                secs);
  o.require(worst <= 1e-4, buf);
  o.require(secs < 60.0, buf);
  if (o.pass) o.detail = buf;
  return o;
}

// 3. Callback semantics on scripted traces.
Outcome callback_semantics() {
  Outcome o;
  const auto t0 = Clock::now();

  // (a) improvement at epoch 1 then flat, floor reached after long plateau.
  {
    auto s = CallbackState::initial(1e-3);
    std::vector<double> lr;
    for (std::size_t e = 1; e <= 100; ++e) lr.push_back(reduce_lr_on_plateau_step(s, e == 1 ? 0.5 : 0.7));
    o.require(lr[4] == 1e-3 && lr[5] == 5e-4 && lr[9] == 5e-4 && lr[10] == 2.5e-4,
              "LR halvings not at epochs 6 and 11");
    o.require(lr.back() == 1e-6, "LR floor not reached exactly");
    for (std::size_t i = 1; i < lr.size(); ++i)
      o.require(lr[i] <= lr[i - 1] && lr[i] >= 1e-6, "LR not monotone within bounds");
  }

  // (b) best at epoch 7, stop after 17, weights restored bitwise.
  {
    ModelOptions mo;
    mo.alpha = 0.25;
    mo.input_size = 32;
    auto model = build_model<float>(mo);
    auto s = CallbackState::initial(1e-3);
    WeightSnapshot<float> best, at_epoch7;
    std::size_t stopped = 0;
    for (std::size_t e = 1; e <= 40; ++e) {
      // Stand-in for an epoch of training: every weight moves.
      for (auto& ref : model.parameters())
        for (auto& v : ref.param->value.data()) v += 0.001f * static_cast<float>(e);
      if (e == 7) at_epoch7 = model.snapshot();
      const double loss = e <= 7 ? 1.0 - 0.05 * static_cast<double>(e) : 0.9;
      const std::size_t before = s.es_best_epoch;
      const auto d = early_stopping_step(s, loss, e);
      if (s.es_best_epoch != before) best = model.snapshot();
      if (d == StopDecision::stop) {
        model.restore(best);
        stopped = e;
        break;
      }
    }
    o.require(stopped == 17, "early stop at epoch " + std::to_string(stopped));
    o.require(s.es_best_epoch == 7, "best epoch " + std::to_string(s.es_best_epoch));
    o.require(model.snapshot() == at_epoch7, "restored weights differ from epoch 7");
  }

  // (c) checkpoint saves at strict running-minimum epochs on random traces.
  {
    Rng rng(42);
    for (int t = 0; t < 200; ++t) {
      auto s = CallbackState::initial(1e-3);
      double run_min = CallbackState::kInf;
      double level = 1.0;
      for (std::size_t e = 1; e <= 40; ++e) {
        level += rng.uniform(-0.05, 0.04);
        const double v = rng.coin() ? level : std::round(level * 20) / 20;
        const bool expect = v < run_min;
        if (expect) run_min = v;
        o.require(model_checkpoint_step(s, v, e) == expect, "checkpoint save mismatch");
        o.require(s.best_val_loss == run_min, "best_val_loss is not the running minimum");
      }
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "LR 1e-3 -> 5e-4 (epoch 6) -> 2.5e-4 (epoch 11), floor 1e-6; stop at 17, best 7";
  return o;
}

// 4. Metrics on the reconstructed 7x7 test matrix.
Outcome metrics_reproduction() {
  Outcome o;
  const auto t0 = Clock::now();
  enum { BB, CV, HL, HGD, LHJ, LR, LV };
  ConfusionMatrix cm(7);
  const std::size_t errors[][3] = {{CV, BB, 1},  {CV, LR, 1}, {HL, BB, 1}, {HL, LHJ, 2},
                                   {LHJ, LR, 2}, {LR, BB, 2}, {LR, CV, 1}, {LR, LHJ, 1}};
  std::size_t wrong[7] = {};
  for (const auto& e : errors) {
    cm.add(e[0], e[1], e[2]);
    wrong[e[0]] += e[2];
  }
  for (std::size_t c = 0; c < 7; ++c) cm.add(c, c, 100 - wrong[c]);
  const double table[7][3] = {{0.96, 1.00, 0.98}, {0.99, 0.98, 0.98}, {1.00, 0.97, 0.98},
                              {1.00, 1.00, 1.00}, {0.97, 0.98, 0.98}, {0.97, 0.96, 0.96},
                              {1.00, 1.00, 1.00}};
  const auto rep = classification_report(cm);
  int matched = 0;
  for (std::size_t c = 0; c < 7; ++c) {
    matched += round_to(rep.classes[c].precision, 2) == table[c][0];
    matched += round_to(rep.classes[c].recall, 2) == table[c][1];
    matched += round_to(rep.classes[c].f1, 2) == table[c][2];
  }
  o.require(matched == 21, std::to_string(matched) + "/21 table values");
  o.require(cm.trace() == 689 && cm.total() == 700, "trace/total");
  const double shown = round_to(100.0 * rep.accuracy, 2);
  o.require(std::abs(shown - 98.42) <= 0.02, "accuracy " + std::to_string(shown));
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "21/21 values, accuracy 689/700 = %.2f%%", shown);
    o.detail = buf;
  }
  return o;
}

// 5. Overfit capacity on a 7 x 4 synthetic set. The whole network trains and
// accuracy is measured in inference mode over the training images. A random-init
// frozen backbone collapses activations, and batch 4 gives the moving statistics
// enough updates to track the batch statistics.
Outcome overfit_capacity() {
  Outcome o;
  const auto t0 = Clock::now();
  set_max_threads(1);
  ModelOptions mo;
  mo.alpha = 0.25;
  mo.input_size = 64;
  mo.freeze_prefix = 0;
  auto model = build_model<float>(mo);
  std::vector<Tensor<float>> images;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < 7; ++k)
    for (std::size_t i = 0; i < 4; ++i) {
      images.push_back(test::synthetic_image(k, i, 64));
      labels.push_back(k);
    }
  TensorSource src(images, labels, 7);
  BatchLoader train(src, 4, true, AugmentPipeline::evaluation(), 42);
  BatchLoader check(src, 32, false, AugmentPipeline::evaluation(), 42);
  AdamW opt;
  std::size_t reached = 0;
  double acc = 0.0;
  for (std::size_t epoch = 1; epoch <= 300; ++epoch) {
    train.start_epoch(epoch);
    for (std::size_t b = 0; b < train.num_batches(); ++b) train_step(model, opt, train.batch(b), 0.01);
    acc = evaluate(model, check, 0.01).accuracy;
    if (acc == 1.0) {
      reached = epoch;
      break;
    }
  }
  set_max_threads(0);
  const double secs = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "train accuracy %.4f at epoch %zu, %.1f s", acc,
                reached ? reached : std::size_t{300}, secs);
  o.require(reached != 0, buf);
  o.require(secs < 600.0, buf);
  o.detail = buf;
  return o;
}

// 6. Determinism of the micro pipeline.
Outcome determinism() {
  Outcome o;
  test::TempDir dir;
  test::write_image_tree(dir / "data", 7, 12, 40);
  std::vector<std::string> runs;
  for (const char* name : {"a", "b"}) {
    const std::string out = (dir / name).string();
    std::ostringstream sout, serr;
    const int train =
        run_cli({"train", "--data-dir", (dir / "data").string(), "--out", out, "--epochs", "2",
                 "--alpha", "0.25", "--image-size", "32", "--batch-size", "16", "--deterministic"},
                sout, serr);
    o.require(train == 0, std::string("train failed: ") + serr.str());
    const int eval = run_cli({"eval", "--weights", out + "/best.ckpt", "--data-dir",
                              (dir / "data").string(), "--split", out + "/split.csv", "--out",
                              out + "/eval", "--deterministic"},
                             sout, serr);
    o.require(eval == 0, std::string("eval failed: ") + serr.str());
    runs.push_back(out);
  }
  if (!o.pass) return o;
  for (const char* f : {"history.csv", "confusion.csv", "best.ckpt", "eval/confusion.csv"}) {
    o.require(read_file(fs::path(runs[0]) / f) == read_file(fs::path(runs[1]) / f),
              std::string(f) + " differs");
  }
  if (o.pass) o.detail = "history.csv, confusion.csv, best.ckpt byte-identical";
  return o;
}

// 7. Split arithmetic.
Outcome split_arithmetic() {
  Outcome o;
  Manifest m;
  for (std::size_t c = 0; c < 7; ++c) {
    m.class_names.push_back("class" + std::to_string(c));
    for (std::size_t i = 0; i < 1000; ++i)
      m.entries.push_back({m.class_names.back() + "/" + std::to_string(i) + ".jpg", c});
  }
  const auto s = split_dataset(m, SplitSpec{});
  o.require(s.train.size() == 5600 && s.val.size() == 700 && s.test.size() == 700, "subset sizes");
  for (std::size_t c = 0; c < 7; ++c) {
    o.require(s.train.class_counts()[c] == 800 && s.val.class_counts()[c] == 100 &&
                  s.test.class_counts()[c] == 100,
              "per-class counts for class " + std::to_string(c));
  }
  if (o.pass) o.detail = "5600 / 700 / 700, per class 800 / 100 / 100";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 parameter accounting", parameter_accounting},
      {"2 gradient correctness", gradient_correctness},
      {"3 callback semantics", callback_semantics},
      {"4 metrics reproduction", metrics_reproduction},
      {"5 overfit capacity", overfit_capacity},
      {"6 determinism", determinism},
      {"7 split arithmetic", split_arithmetic},
  };
  bool all = true;
  for (const auto& [name, fn] : criteria) {
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    all = all && r.pass;
    std::printf("%s %-26s %s\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("SKIP %-26s %s\n", "8 full-dataset accuracy",
              "excluded: needs the external 7,000-image dataset and hours of training");
  return all ? 0 : 1;
}
