#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrrpgnet/data.hpp"
#include "hrrpgnet/model.hpp"

namespace hrrpgnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Evaluate on the validation set after every epoch; otherwise only after the last.
  bool validate_every_epoch = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// Moment buffers for every trainable tensor of a model, plus the step count.
struct AdamState {
  std::vector<AdamMoments> moments;
  std::uint64_t step = 0;

  static AdamState for_params(ModelParams& params);
};

/// One bias-corrected Adam update of a single tensor at step t >= 1.
void adam_update(Matrix& param, const Matrix& grad, AdamMoments& moments, std::uint64_t t,
                 const TrainConfig& config);

/// Applies one Adam step to every trainable tensor using params.grad.
void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> per_class_accuracy;  ///< recall per class, percent
  std::vector<double> per_class_precision;
  std::vector<double> per_class_f1;
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;  ///< mean of per_class_accuracy
  double macro_recall = 0.0;
  double macro_precision = 0.0;
  double macro_f1 = 0.0;
  std::size_t total = 0;
  std::vector<std::string> warnings;
};

/// All rates are percentages in [0, 100]. A class with no members and no
/// predictions scores F1 = 0 and adds a warning.
Metrics compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                        std::size_t classes);

/// Eval-mode predictions over the whole dataset.
Metrics evaluate(const Dataset& dataset, const ModelParams& params, const ModelConfig& config);

/// Per-class rows plus an average row, two decimals.
std::string format_metrics(const Metrics& metrics, std::span<const std::string> class_names);
void write_metrics_csv(const Metrics& metrics, std::span<const std::string> class_names,
                       const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;  ///< NaN when no validation ran this epoch
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded mini-batch training from a fresh init_params(model_config). Returns
/// the final-epoch parameters and the per-epoch log. Throws NumericError if
/// the loss becomes non-finite.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

/// `epoch,train_loss,val_accuracy,val_macro_f1`
void write_epoch_log(std::span<const EpochRecord> log, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ablation

struct AblationRun {
  std::uint64_t seed = 0;
  Metrics metrics;
  double first_epoch_loss = 0.0;
  double final_epoch_loss = 0.0;
};

struct AblationRow {
  std::size_t number = 0;  ///< 1..7
  AblationConfig modules;
  std::vector<AblationRun> runs;
  double accuracy = 0.0;  ///< means over runs
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<std::string> error;

  /// Every run ended with a lower train loss than its first epoch.
  bool loss_decreased() const;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

using AblationProgress = std::function<void(const AblationRow& row, const AblationRun& run)>;

/// Trains every legal module combination in table order (a, b, c, ab, ac, bc,
/// abc), `seeds` times each from fresh initializations, and evaluates on the
/// test set. A failing row records its error and the suite continues.
AblationTable run_ablation_suite(const Dataset& train_set, const Dataset& test_set,
                                 const ModelConfig& base_model_config,
                                 const TrainConfig& train_config, std::size_t seeds = 1,
                                 const AblationProgress& progress = {});

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path);

/// Aligned plain-text table with check marks for the enabled modules.
std::string format_ablation_table(const AblationTable& table);

}  // namespace hrrpgnet
