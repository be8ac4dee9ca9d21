#include "hrrpgnet/trainkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (batch normalization)");
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_params(ModelParams& params) {
  AdamState state;
  for (const TensorRef& t : params.trainable()) {
    state.moments.push_back({Matrix(t.value->rows(), t.value->cols()),
                             Matrix(t.value->rows(), t.value->cols())});
  }
  return state;
}

void adam_update(Matrix& param, const Matrix& grad, AdamMoments& moments, std::uint64_t t,
                 const TrainConfig& config) {
  for (const Matrix* other : {&grad, static_cast<const Matrix*>(&moments.m),
                              static_cast<const Matrix*>(&moments.v)}) {
    if (!param.same_shape(*other)) {
      throw UsageError("adam_update: parameter " + param.shape_string() + " vs state " +
                       other->shape_string());
    }
  }
  if (t < 1) throw UsageError("adam_update: step must be >= 1");

  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  auto p = param.values();
  auto g = grad.values();
  auto m = moments.m.values();
  auto v = moments.v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config) {
  auto tensors = params.trainable();
  if (state.moments.size() != tensors.size()) {
    throw UsageError("adam_step: optimizer state holds " + std::to_string(state.moments.size()) +
                     " tensors, model has " + std::to_string(tensors.size()));
  }
  ++state.step;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    adam_update(*tensors[i].value, *tensors[i].grad, state.moments[i], state.step, config);
  }
  ++params.step;
}

// ---------------------------------------------------------------------------

Metrics compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                        std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw UsageError("compute_metrics: " + std::to_string(truth.size()) + " labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  if (classes < 1) throw UsageError("compute_metrics: no classes");
  Metrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) {
      throw UsageError("compute_metrics: class index out of range at sample " + std::to_string(i));
    }
    ++m.confusion[truth[i]][predicted[i]];
  }
  m.total = truth.size();

  std::size_t correct = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t tp = m.confusion[c][c];
    correct += tp;
    std::size_t members = 0, predictions = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      members += m.confusion[c][k];
      predictions += m.confusion[k][c];
    }
    const double recall = members ? 100.0 * static_cast<double>(tp) / static_cast<double>(members) : 0.0;
    const double precision =
        predictions ? 100.0 * static_cast<double>(tp) / static_cast<double>(predictions) : 0.0;
    double f1 = 0.0;
    if (recall + precision > 0.0) f1 = 2.0 * recall * precision / (recall + precision);
    if (members == 0 && predictions == 0) {
      m.warnings.push_back("class " + std::to_string(c) +
                           " has no samples and no predictions; F1 set to 0");
    }
    m.per_class_accuracy.push_back(recall);
    m.per_class_precision.push_back(precision);
    m.per_class_f1.push_back(f1);
  }
  const double k = static_cast<double>(classes);
  auto mean = [k](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / k; };
  m.average_accuracy = mean(m.per_class_accuracy);
  m.macro_recall = m.average_accuracy;
  m.macro_precision = mean(m.per_class_precision);
  m.macro_f1 = mean(m.per_class_f1);
  m.overall_accuracy =
      m.total ? 100.0 * static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

namespace {

constexpr std::size_t kEvalChunk = 64;

}  // namespace

Metrics evaluate(const Dataset& dataset, const ModelParams& params, const ModelConfig& config) {
  std::vector<std::size_t> truth, predicted;
  truth.reserve(dataset.samples.size());
  predicted.reserve(dataset.samples.size());
  std::span<const HrrpSample> all(dataset.samples);
  for (std::size_t start = 0; start < all.size(); start += kEvalChunk) {
    auto chunk = all.subspan(start, std::min(kEvalChunk, all.size() - start));
    BatchForward out = forward_batch(chunk, params, config, false);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      truth.push_back(chunk[i].label);
      predicted.push_back(argmax(out.log_probs[i]));
    }
  }
  return compute_metrics(truth, predicted, config.classes);
}

std::string format_metrics(const Metrics& metrics, std::span<const std::string> class_names) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(12) << "class" << std::right << std::setw(10) << "accuracy"
     << std::setw(11) << "precision" << std::setw(10) << "F1" << '\n';
  for (std::size_t c = 0; c < metrics.per_class_accuracy.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
    os << std::left << std::setw(12) << name << std::right << std::setw(10)
       << metrics.per_class_accuracy[c] << std::setw(11) << metrics.per_class_precision[c]
       << std::setw(10) << metrics.per_class_f1[c] << '\n';
  }
  os << std::left << std::setw(12) << "Average" << std::right << std::setw(10)
     << metrics.average_accuracy << std::setw(11) << metrics.macro_precision << std::setw(10)
     << metrics.macro_f1 << '\n';
  os << "overall accuracy " << metrics.overall_accuracy << " on " << metrics.total << " samples\n";
  return os.str();
}

void write_metrics_csv(const Metrics& metrics, std::span<const std::string> class_names,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << std::fixed << std::setprecision(2);
  out << "class,accuracy,precision,f1\n";
  for (std::size_t c = 0; c < metrics.per_class_accuracy.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
    out << name << ',' << metrics.per_class_accuracy[c] << ',' << metrics.per_class_precision[c]
        << ',' << metrics.per_class_f1[c] << '\n';
  }
  out << "Average," << metrics.average_accuracy << ',' << metrics.macro_precision << ','
      << metrics.macro_f1 << '\n';
}

// ---------------------------------------------------------------------------

namespace {

void require_compatible(const Dataset& d, const ModelConfig& config, const char* role) {
  if (d.cells != config.cells) {
    throw ConfigError(std::string(role) + " set has N = " + std::to_string(d.cells) +
                      ", model config has cells = " + std::to_string(config.cells));
  }
  if (d.classes != config.classes) {
    throw ConfigError(std::string(role) + " set has C = " + std::to_string(d.classes) +
                      ", model config has classes = " + std::to_string(config.classes));
  }
}

// Consecutive chunks of `order`; a trailing singleton joins the previous batch
// so batch statistics are always defined.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  model_config.validate();
  train_config.validate();
  if (train_set.empty()) throw UsageError("train: empty training set");
  require_compatible(train_set, model_config, "training");
  if (!val_set.empty()) require_compatible(val_set, model_config, "validation");
  if (model_config.ablation.local_conv && train_set.samples.size() < 2) {
    throw UsageError("train: batch normalization needs at least 2 training samples");
  }

  TrainResult result{init_params(model_config), {}};
  ModelParams& params = result.params;
  AdamState adam = AdamState::for_params(params);
  std::mt19937_64 shuffle_rng(train_config.seed);

  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<HrrpSample> batch_samples;
  std::vector<std::size_t> batch_labels;
  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    if (train_config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : make_batches(order, train_config.batch_size)) {
      batch_samples.clear();
      batch_labels.clear();
      for (std::size_t idx : batch) {
        batch_samples.push_back(train_set.samples[idx]);
        batch_labels.push_back(train_set.samples[idx].label);
      }
      BatchForward fwd = forward_batch(batch_samples, params, model_config, true);
      const double batch_mean = batch_loss(fwd.log_probs, batch_labels);
      if (!std::isfinite(batch_mean)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_mean * static_cast<double>(batch.size());
      seen += batch.size();
      backward(fwd.cache, batch_labels, params);
      apply_running_stats(fwd.cache, params);
      adam_step(params, adam, train_config);
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(seen),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
    const bool last = epoch + 1 == train_config.epochs;
    if (!val_set.empty() && (train_config.validate_every_epoch || last)) {
      const Metrics m = evaluate(val_set, params, model_config);
      record.val_accuracy = m.overall_accuracy;
      record.val_macro_f1 = m.macro_f1;
    }
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

void write_epoch_log(std::span<const EpochRecord> log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << "epoch,train_loss,val_accuracy,val_macro_f1\n";
  out << std::setprecision(10);
  for (const EpochRecord& r : log) {
    out << r.epoch << ',' << r.train_loss << ',';
    if (std::isnan(r.val_accuracy)) {
      out << ",\n";
    } else {
      out << r.val_accuracy << ',' << r.val_macro_f1 << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

bool AblationRow::loss_decreased() const {
  if (runs.empty() || error) return false;
  return std::all_of(runs.begin(), runs.end(),
                     [](const AblationRun& r) { return r.final_epoch_loss < r.first_epoch_loss; });
}

AblationTable run_ablation_suite(const Dataset& train_set, const Dataset& test_set,
                                 const ModelConfig& base_model_config,
                                 const TrainConfig& train_config, std::size_t seeds,
                                 const AblationProgress& progress) {
  if (seeds < 1) throw ConfigError("ablation: seeds must be >= 1");
  AblationTable table;
  const auto rows = AblationConfig::table_rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    AblationRow row;
    row.number = r + 1;
    row.modules = rows[r];
    try {
      for (std::size_t s = 0; s < seeds; ++s) {
        ModelConfig mc = base_model_config;
        mc.ablation = rows[r];
        mc.seed = base_model_config.seed + s;
        TrainConfig tc = train_config;
        tc.seed = train_config.seed + s;
        TrainResult trained = train(train_set, Dataset{}, mc, tc);
        AblationRun run{mc.seed, evaluate(test_set, trained.params, mc),
                        trained.log.front().train_loss, trained.log.back().train_loss};
        row.runs.push_back(std::move(run));
        if (progress) progress(row, row.runs.back());
      }
      for (const AblationRun& run : row.runs) {
        row.accuracy += run.metrics.overall_accuracy;
        row.recall += run.metrics.macro_recall;
        row.f1 += run.metrics.macro_f1;
      }
      const double n = static_cast<double>(row.runs.size());
      row.accuracy /= n;
      row.recall /= n;
      row.f1 /= n;
    } catch (const Error& e) {
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << "number,a,b,c,accuracy,recall,f1,runs,loss_decreased,error\n";
  out << std::fixed << std::setprecision(2);
  for (const AblationRow& row : table.rows) {
    out << row.number << ',' << int(row.modules.local_conv) << ',' << int(row.modules.graph_conv)
        << ',' << int(row.modules.attention) << ',';
    if (row.error) {
      out << ",,," << row.runs.size() << ",0,\"" << *row.error << "\"\n";
    } else {
      out << row.accuracy << ',' << row.recall << ',' << row.f1 << ',' << row.runs.size() << ','
          << int(row.loss_decreased()) << ",\n";
    }
  }
}

std::string format_ablation_table(const AblationTable& table) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::setw(6) << "Number" << std::setw(4) << "a" << std::setw(4) << "b" << std::setw(4)
     << "c" << std::setw(11) << "Accuracy" << std::setw(9) << "Recall" << std::setw(11)
     << "F1-score" << '\n';
  auto mark = [](bool on) { return on ? "   ✔" : "    "; };
  for (const AblationRow& row : table.rows) {
    os << std::setw(6) << row.number << mark(row.modules.local_conv) << mark(row.modules.graph_conv)
       << mark(row.modules.attention);
    if (row.error) {
      os << "  failed: " << *row.error << '\n';
    } else {
      os << std::setw(11) << row.accuracy << std::setw(9) << row.recall << std::setw(11) << row.f1
         << '\n';
    }
  }
  os << "a: local feature extraction, b: global (graph) feature extraction, "
        "c: attention-based classification\n";
  return os.str();
}

}  // namespace hrrpgnet
