#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sprout/augment.hpp"
#include "sprout/callbacks.hpp"
#include "sprout/checkpoint.hpp"
#include "sprout/dataset.hpp"
#include "sprout/model.hpp"
#include "sprout/optim.hpp"

namespace sprout {

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double initial_lr = 1e-3;
  double lambda_l2 = 0.01;
  AdamWConfig optimizer;
  CallbackConfig callbacks;
  /// Drives batch order and augmentation.
  std::uint64_t seed = 42;
  bool shuffle = true;
  /// history.csv and the best checkpoint go here; empty disables file output.
  std::filesystem::path out_dir;
  std::string checkpoint_file = "best.ckpt";
  CheckpointInfo checkpoint_info;
  /// Receives one progress line per epoch; null silences progress.
  std::ostream* log = nullptr;

  /// Throws ValueError for epochs == 0, batch_size == 0 or initial_lr <= 0.
  void validate() const;
};

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  /// Rate used during the epoch.
  double lr = 0.0;
};

/// `epoch,train_loss,train_acc,val_loss,val_acc,lr` with %.17g values.
std::string history_csv(const std::vector<HistoryRow>& rows);

struct StepResult {
  double cce = 0.0;
  double penalty = 0.0;
  double loss = 0.0;
  std::size_t correct = 0;
};

/// Forward in training mode, CCE + L2, backward, one AdamW update.
/// Throws NumericError when the loss is not finite, before updating.
StepResult train_step(Model<float>& model, AdamW& optimizer, const Batch& batch, double lambda_l2);

struct Evaluation {
  /// Mean CCE over all samples plus the L2 penalty of the current weights.
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> y_true;
  std::vector<std::size_t> y_pred;
  /// [N, K] softmax outputs in loader order.
  Tensor<float> probabilities;
};

/// Inference-mode pass over every batch of the loader (its current epoch).
Evaluation evaluate(Model<float>& model, const BatchLoader& loader, double lambda_l2);

struct TrainResult {
  std::vector<HistoryRow> history;
  CallbackState callbacks;
  /// Epochs at which the checkpoint callback fired.
  std::vector<std::size_t> saved_epochs;
  /// True when early stopping fired and the best weights were put back.
  bool restored_best = false;
};

/**
 * Epoch loop: train over shuffled, augmented batches, evaluate the full
 * validation set, append a history row (rewriting history.csv), then run the
 * checkpoint, LR-plateau and early-stopping callbacks in that order.
 */
TrainResult run_training(Model<float>& model, const SampleSource& train, const SampleSource& val,
                         const TrainConfig& config,
                         const AugmentPolicy& policy = AugmentPolicy{});

}  // namespace sprout
