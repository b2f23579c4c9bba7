#include "sprout/callbacks.hpp"

#include <algorithm>

namespace sprout {

CallbackState CallbackState::initial(double learning_rate) {
  CallbackState s;
  s.current_lr = learning_rate;
  return s;
}

bool improves(double val_loss, double best, double min_delta) {
  return val_loss < best - min_delta;
}

bool model_checkpoint_step(CallbackState& state, double val_loss, std::size_t epoch,
                           const CallbackConfig& config) {
  if (improves(val_loss, state.best_val_loss, config.min_delta)) {
    state.best_val_loss = val_loss;
    state.best_epoch = epoch;
    return true;
  }
  return !config.save_best_only;
}

double reduce_lr_on_plateau_step(CallbackState& state, double val_loss,
                                 const CallbackConfig& config) {
  if (improves(val_loss, state.lr_best, config.min_delta)) {
    state.lr_best = val_loss;
    state.epochs_since_improve_lr = 0;
    return state.current_lr;
  }
  if (++state.epochs_since_improve_lr >= config.lr_patience) {
    state.current_lr = std::max(state.current_lr * config.lr_factor, config.min_lr);
    state.epochs_since_improve_lr = 0;
  }
  return state.current_lr;
}

StopDecision early_stopping_step(CallbackState& state, double val_loss, std::size_t epoch,
                                 const CallbackConfig& config) {
  if (improves(val_loss, state.es_best, config.min_delta)) {
    state.es_best = val_loss;
    state.es_best_epoch = epoch;
    state.epochs_since_improve_es = 0;
    return StopDecision::proceed;
  }
  if (++state.epochs_since_improve_es >= config.early_stop_patience) {
    state.stopped = true;
    state.stopped_epoch = epoch;
    return StopDecision::stop;
  }
  return StopDecision::proceed;
}

}  // namespace sprout
