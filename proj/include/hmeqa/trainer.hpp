#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hmeqa/dataset.hpp"
#include "hmeqa/model.hpp"

namespace hmeqa {

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;  // "train" or "validation"
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::size_t> predictions;
};

struct TrainResult;

struct TrainOptions {
  /// Written whenever validation accuracy improves (or every epoch without a
  /// validation set).
  std::optional<std::string> checkpoint_path;
  std::optional<std::string> metrics_path;
  /// Progress lines, one per epoch.
  std::ostream* log = nullptr;
  /// Ends training after an epoch where both the running train accuracy and
  /// the validation accuracy reach this value.
  std::optional<double> stop_at_accuracy;
  /// Consulted after every epoch with the metrics so far; true ends training.
  std::function<bool(const TrainResult&)> stop_when;
  /// Restores the best-validation parameters into the model at the end.
  bool restore_best = true;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_validation_accuracy = -1.0;
};

/// Minibatch training with Adam. Per batch: one graph per sample in batch
/// order, gradients accumulated then scaled by 1/B, global-norm clipping,
/// one optimizer step. Epoch order is a permutation drawn from a generator
/// seeded with config.seed. Train metrics are running averages over the
/// epoch; validation metrics come from a full pass after the epoch.
template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& validation_set,
                  const TrainOptions& options = {});

/// Side-effect free: parameter values and gradients are left untouched.
template <typename T>
Evaluation evaluate(const Model<T>& model, const Dataset& data);

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path);
std::string format_metrics_csv(const std::vector<EpochMetrics>& metrics);

}  // namespace hmeqa
