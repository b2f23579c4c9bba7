#include "sprout/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "sprout/csv.hpp"
#include "sprout/error.hpp"

namespace sprout {

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t argmax_row(const Tensor<float>& t, std::size_t r) {
  const std::size_t k = t.dim(1);
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (t[r * k + j] > t[r * k + best]) best = j;
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ValueError("epochs must be >= 1");
  if (batch_size == 0) throw ValueError("batch size must be >= 1");
  if (!(initial_lr > 0.0)) throw ValueError("initial learning rate must be positive");
  if (lambda_l2 < 0.0) throw ValueError("L2 strength must be non-negative");
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string out = csv_line({"epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"});
  for (const auto& r : rows) {
    out += csv_line({std::to_string(r.epoch), g17(r.train_loss), g17(r.train_acc),
                     g17(r.val_loss), g17(r.val_acc), g17(r.lr)});
  }
  return out;
}

StepResult train_step(Model<float>& model, AdamW& optimizer, const Batch& batch,
                      double lambda_l2) {
  model.zero_grad();
  const Tensor<float> probs = model.forward(batch.images, Mode::train);
  auto cce = cce_loss(probs, batch.onehot);
  StepResult r;
  r.cce = cce.loss;
  r.penalty = l2_penalty(model, lambda_l2, false);
  r.loss = r.cce + r.penalty;
  if (!std::isfinite(r.loss)) {
    model.clear_caches();
    throw NumericError("non-finite loss " + g17(r.loss));
  }
  for (std::size_t i = 0; i < batch.labels.size(); ++i)
    if (argmax_row(probs, i) == batch.labels[i]) ++r.correct;
  model.backward_logits(cce.grad_logits);
  l2_penalty(model, lambda_l2, true);
  optimizer.step(model);
  model.clear_caches();
  return r;
}

Evaluation evaluate(Model<float>& model, const BatchLoader& loader, double lambda_l2) {
  const std::size_t n = loader.size();
  if (n == 0) throw ValueError("no samples to evaluate");
  const std::size_t k = model.num_outputs();
  Evaluation ev;
  ev.probabilities = Tensor<float>({n, k});
  double total = 0.0;
  std::size_t correct = 0, row = 0;
  for (std::size_t b = 0; b < loader.num_batches(); ++b) {
    const Batch batch = loader.batch(b);
    const Tensor<float> probs = model.forward(batch.images, Mode::inference, false);
    const auto cce = cce_loss(probs, batch.onehot);
    total += cce.loss * static_cast<double>(batch.labels.size());
    for (std::size_t i = 0; i < batch.labels.size(); ++i, ++row) {
      const std::size_t pred = argmax_row(probs, i);
      ev.y_true.push_back(batch.labels[i]);
      ev.y_pred.push_back(pred);
      if (pred == batch.labels[i]) ++correct;
      std::copy(probs.raw() + i * k, probs.raw() + (i + 1) * k, ev.probabilities.raw() + row * k);
    }
  }
  ev.loss = total / static_cast<double>(n) + l2_penalty(model, lambda_l2, false);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return ev;
}

TrainResult run_training(Model<float>& model, const SampleSource& train, const SampleSource& val,
                         const TrainConfig& config, const AugmentPolicy& policy) {
  config.validate();
  policy.validate();
  if (train.size() == 0 || val.size() == 0) throw ValueError("no samples: empty train or validation set");
  if (train.num_classes() != model.num_outputs() || val.num_classes() != model.num_outputs()) {
    throw DimensionError("dataset has " + std::to_string(train.num_classes()) +
                         " classes, model outputs " + std::to_string(model.num_outputs()));
  }

  AdamWConfig opt_cfg = config.optimizer;
  opt_cfg.learning_rate = config.initial_lr;
  AdamW optimizer(opt_cfg);
  BatchLoader train_loader(train, config.batch_size, config.shuffle,
                           AugmentPipeline::training(policy), config.seed);
  BatchLoader val_loader(val, config.batch_size, false,
                         AugmentPipeline::evaluation(policy.rescale), config.seed);

  const bool files = !config.out_dir.empty();
  if (files) std::filesystem::create_directories(config.out_dir);

  TrainResult result;
  CallbackState& cb = result.callbacks;
  cb = CallbackState::initial(config.initial_lr);
  WeightSnapshot<float> best_weights;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cb.current_lr;
    optimizer.set_learning_rate(lr);
    train_loader.start_epoch(epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < train_loader.num_batches(); ++b) {
      const Batch batch = train_loader.batch(b);
      StepResult step;
      try {
        step = train_step(model, optimizer, batch, config.lambda_l2);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) +
                           ": " + e.what());
      }
      loss_sum += step.loss * static_cast<double>(batch.labels.size());
      correct += step.correct;
    }
    const Evaluation ev = evaluate(model, val_loader, config.lambda_l2);
    if (!std::isfinite(ev.loss)) {
      throw NumericError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }

    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    row.val_loss = ev.loss;
    row.val_acc = ev.accuracy;
    row.lr = lr;
    result.history.push_back(row);
    if (files) write_file_atomic(config.out_dir / "history.csv", history_csv(result.history));

    if (model_checkpoint_step(cb, ev.loss, epoch, config.callbacks)) {
      result.saved_epochs.push_back(epoch);
      if (files) {
        try {
          TrainState ts{epoch, lr, optimizer.state()};
          save_checkpoint(model, ts, config.out_dir / config.checkpoint_file,
                          config.checkpoint_info);
        } catch (const std::exception& e) {
          if (config.log) *config.log << "warning: checkpoint not saved: " << e.what() << "\n";
        }
      }
    }
    reduce_lr_on_plateau_step(cb, ev.loss, config.callbacks);
    const std::size_t es_before = cb.es_best_epoch;
    const StopDecision stop = early_stopping_step(cb, ev.loss, epoch, config.callbacks);
    if (config.callbacks.restore_best_weights && cb.es_best_epoch != es_before) {
      best_weights = model.snapshot();
    }

    if (config.log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "epoch %zu/%zu  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  lr %.3g  "
                    "%.1fs\n",
                    epoch, config.epochs, row.train_loss, row.train_acc, row.val_loss, row.val_acc,
                    lr, secs);
      *config.log << buf << std::flush;
    }

    if (stop == StopDecision::stop) {
      if (config.callbacks.restore_best_weights && !best_weights.empty()) {
        model.restore(best_weights);
        result.restored_best = true;
        if (config.log) {
          *config.log << "early stopping at epoch " << epoch << "; restored weights of epoch "
                      << cb.es_best_epoch << "\n";
        }
      }
      break;
    }
  }
  return result;
}

}  // namespace sprout
