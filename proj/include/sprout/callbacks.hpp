#pragma once

#include <cstddef>
#include <limits>

namespace sprout {

struct CallbackConfig {
  /// A value counts as an improvement only if it is below best - min_delta.
  double min_delta = 0.0;
  bool save_best_only = true;
  std::size_t early_stop_patience = 10;
  bool restore_best_weights = true;
  double lr_factor = 0.5;
  std::size_t lr_patience = 5;
  double min_lr = 1e-6;
};

/**
 * Bookkeeping for checkpointing, LR reduction on plateau and early stopping.
 * Each callback keeps its own best value so that their order within an epoch
 * does not change any decision. Epochs are 1-based.
 */
struct CallbackState {
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double best_val_loss = kInf;  // checkpoint monitor
  std::size_t best_epoch = 0;
  double lr_best = kInf;
  std::size_t epochs_since_improve_lr = 0;
  double es_best = kInf;
  std::size_t es_best_epoch = 0;
  std::size_t epochs_since_improve_es = 0;
  double current_lr = 1e-3;
  bool stopped = false;
  std::size_t stopped_epoch = 0;

  static CallbackState initial(double learning_rate);
};

enum class StopDecision { proceed, stop };

/// True when the checkpoint should be written: strict improvement of the
/// running minimum (always true under save_best_only == false).
bool model_checkpoint_step(CallbackState& state, double val_loss, std::size_t epoch,
                           const CallbackConfig& config = {});

/// Returns the learning rate for the next epoch. After lr_patience
/// consecutive non-improving epochs the rate becomes max(lr * factor, min_lr)
/// and the counter resets.
double reduce_lr_on_plateau_step(CallbackState& state, double val_loss,
                                 const CallbackConfig& config = {});

/// Stops after early_stop_patience consecutive non-improving epochs.
/// es_best_epoch marks the epoch whose weights should be restored.
StopDecision early_stopping_step(CallbackState& state, double val_loss, std::size_t epoch,
                                 const CallbackConfig& config = {});

/// True when val_loss improves on best under min_delta.
bool improves(double val_loss, double best, double min_delta);

}  // namespace sprout
