#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <vector>

#include "config_layers.hpp"
#include "hrrpgnet/data.hpp"
#include "hrrpgnet/error.hpp"
#include "hrrpgnet/gradcheck.hpp"
#include "hrrpgnet/serialize.hpp"
#include "hrrpgnet/verify.hpp"

namespace hrrpgnet::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kCsvTrainFraction = 0.8;

// Flags shared by train and ablate.
struct ModelFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> d_out;
  std::optional<std::size_t> g_out;
  std::optional<std::string> ablation;
  std::optional<std::uint64_t> seed;
};

void add_model_flags(CLI::App& cmd, ModelFlags& f, bool with_ablation) {
  cmd.add_option("--config", f.config_path, "JSON file with \"model\" and \"train\" sections")
      ->check(CLI::ExistingFile);
  cmd.add_option("--set", f.overrides, "Override one setting, e.g. train.epochs=20 (repeatable)");
  cmd.add_option("--epochs", f.epochs, "Training epochs (default 100)");
  cmd.add_option("--batch-size", f.batch_size, "Mini-batch size, >= 2 (default 32)");
  cmd.add_option("--lr", f.lr, "Adam learning rate (default 1e-3)");
  cmd.add_option("--d-out", f.d_out, "Local convolution channels (default 16)");
  cmd.add_option("--g-out", f.g_out, "Graph convolution channels (default 32)");
  if (with_ablation) {
    cmd.add_option("--ablation", f.ablation, "Enabled modules, a subset of \"abc\" (default abc)");
  }
  cmd.add_option("--seed", f.seed, "Seed for initialization, shuffling and splits (default 0)");
}

RunConfig resolve(const ModelFlags& f) {
  RunConfig rc;
  if (!f.config_path.empty()) rc = merge_config_file(rc, f.config_path);
  rc = apply_overrides(rc, f.overrides);
  if (f.epochs) rc.train.epochs = *f.epochs;
  if (f.batch_size) rc.train.batch_size = *f.batch_size;
  if (f.lr) rc.train.learning_rate = *f.lr;
  if (f.d_out) rc.model.conv_channels = *f.d_out;
  if (f.g_out) rc.model.graph_channels = *f.g_out;
  if (f.ablation) rc.model.ablation = AblationConfig::parse(*f.ablation);
  if (f.seed) {
    rc.model.seed = *f.seed;
    rc.train.seed = *f.seed;
  }
  return rc;
}

void adopt_dataset_shape(RunConfig& rc, const Dataset& train_set, const Dataset& test_set) {
  if (!test_set.empty() && (test_set.cells != train_set.cells || test_set.classes != train_set.classes)) {
    throw FormatError("train and test sets disagree on N or C");
  }
  rc.model.cells = train_set.cells;
  rc.model.classes = train_set.classes;
  rc.model.validate();
  rc.train.validate();
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << text;
}

fs::path require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw FormatError("no such file: " + p.string());
  return p;
}

struct SplitData {
  Dataset train;
  Dataset test;
  std::string description;
};

SplitData load_training_data(const fs::path& data, std::uint64_t seed) {
  if (fs::is_directory(data)) {
    return {load_csv(require_file(data / "train.csv")), load_csv(require_file(data / "test.csv")),
            data.string()};
  }
  Dataset all = load_csv(require_file(data));
  auto [train_set, val_set] = split(all, kCsvTrainFraction, seed, true);
  return {std::move(train_set), std::move(val_set),
          data.string() + " (stratified 80/20 split)"};
}

std::string fmt(double v, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string spec;
  std::size_t per_class = 300;
  std::optional<std::size_t> cells;
  std::uint64_t seed = 0;
  std::string out;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  GeneratorSpec spec = a.spec.empty() ? default_three_class_spec() : load_generator_spec(a.spec);
  if (a.cells) spec.cells = *a.cells;
  spec.validate();
  if (a.per_class < 2) throw ConfigError("--per-class must be >= 2");
  const Benchmark bench = generate_benchmark(spec, a.per_class, a.seed);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  save_csv(bench.train, dir / "train.csv");
  save_csv(bench.test, dir / "test.csv");
  save_generator_spec(spec, dir / "spec.json");
  out << "wrote " << bench.train.samples.size() << " train and " << bench.test.samples.size()
      << " test profiles (N = " << spec.cells << ", C = " << spec.classes.size() << ") to "
      << dir.string() << '\n';
  return kSuccess;
}

struct TrainArgs {
  std::string data;
  std::string out;
  ModelFlags flags;
};

int train_command(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = resolve(a.flags);
  SplitData data = load_training_data(a.data, rc.train.seed);
  adopt_dataset_shape(rc, data.train, data.test);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  nlohmann::json resolved = to_json(rc);
  resolved["data"] = data.description;
  write_json(resolved, dir / "config.json");

  const std::size_t epochs = rc.train.epochs;
  TrainResult result = train(data.train, data.test, rc.model, rc.train, [&](const EpochRecord& e) {
    out << "epoch " << e.epoch + 1 << '/' << epochs << "  loss " << fmt(e.train_loss, 4);
    if (!std::isnan(e.val_accuracy)) out << "  val_acc " << fmt(e.val_accuracy, 2);
    out << '\n' << std::flush;
  });

  save_checkpoint(dir / "model.ckpt", rc.model, result.params);
  write_epoch_log(result.log, dir / "epoch_log.csv");
  const Metrics m = evaluate(data.test, result.params, rc.model);
  write_metrics_csv(m, data.test.class_names, dir / "metrics.csv");
  const std::string table = format_metrics(m, data.test.class_names);
  write_text(table, dir / "metrics.txt");
  out << table;
  return kSuccess;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
};

int eval_command(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(require_file(a.checkpoint));
  const Dataset data = load_csv(require_file(a.data));
  if (data.cells != ckpt.config.cells || data.classes != ckpt.config.classes) {
    throw FormatError("dataset has N = " + std::to_string(data.cells) + ", C = " +
                      std::to_string(data.classes) + " but the checkpoint expects N = " +
                      std::to_string(ckpt.config.cells) + ", C = " +
                      std::to_string(ckpt.config.classes));
  }
  const Metrics m = evaluate(data, ckpt.params, ckpt.config);
  const fs::path csv = a.out.empty()
                           ? fs::path(a.checkpoint).parent_path() /
                                 ("eval_" + fs::path(a.data).stem().string() + ".csv")
                           : fs::path(a.out);
  write_metrics_csv(m, data.class_names, csv);
  out << format_metrics(m, data.class_names);
  out << "metrics written to " << csv.string() << '\n';
  return kSuccess;
}

struct AblateArgs {
  std::string data;
  std::string out;
  std::size_t seeds = 5;
  ModelFlags flags;
};

int ablate_command(const AblateArgs& a, std::ostream& out) {
  RunConfig rc = resolve(a.flags);
  if (!fs::is_directory(a.data)) throw FormatError("--data must be a directory with train.csv and test.csv");
  SplitData data = load_training_data(a.data, rc.train.seed);
  adopt_dataset_shape(rc, data.train, data.test);
  if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");

  const fs::path dir = a.out;
  fs::create_directories(dir);
  nlohmann::json resolved = to_json(rc);
  resolved["data"] = data.description;
  resolved["seeds"] = a.seeds;
  write_json(resolved, dir / "config.json");

  const AblationTable table = run_ablation_suite(
      data.train, data.test, rc.model, rc.train, a.seeds,
      [&](const AblationRow& row, const AblationRun& run) {
        out << "row " << row.number << " (" << row.modules.code() << ") seed " << run.seed
            << "  accuracy " << fmt(run.metrics.overall_accuracy, 2) << "  loss "
            << fmt(run.first_epoch_loss, 4) << " -> " << fmt(run.final_epoch_loss, 4) << '\n'
            << std::flush;
      });
  write_ablation_csv(table, dir / "ablation.csv");
  const std::string text = format_ablation_table(table);
  write_text(text, dir / "ablation.txt");
  out << text;
  const bool failed = std::any_of(table.rows.begin(), table.rows.end(),
                                  [](const AblationRow& r) { return r.error.has_value(); });
  return failed ? kNumeric : kSuccess;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string layer;
};

int gradcheck_command(const GradcheckArgs& a, std::ostream& out) {
  std::vector<std::string> layers = gradcheck_layers();
  if (!a.layer.empty()) layers = {a.layer};
  bool ok = true;
  for (const std::string& layer : layers) {
    for (const GradcheckEntry& e : run_gradient_checks(layer, a.seed)) {
      const bool pass = e.max_relative_error <= kGradientTolerance;
      ok = ok && pass;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", e.max_relative_error);
      out << std::left << std::setw(18) << e.layer << std::setw(18) << e.tensor << buf
          << (pass ? "  ok" : "  FAIL") << '\n';
    }
  }
  out << (ok ? "all gradients within " : "gradient check failed, tolerance ")
      << kGradientTolerance << '\n';
  return ok ? kSuccess : kNumeric;
}

// ---------------------------------------------------------------------------

std::vector<std::string> option_names(const CLI::App& app) {
  std::vector<std::string> names;
  for (const CLI::Option* opt : app.get_options()) {
    for (const std::string& n : opt->get_lnames()) names.push_back("--" + n);
  }
  return names;
}

std::string suggest(const std::string& token, const std::vector<std::string>& candidates) {
  const std::string bare = token.substr(0, token.find('='));
  std::string best;
  std::size_t best_d = 4;
  for (const std::string& c : candidates) {
    const std::size_t d = edit_distance(bare, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best.empty() ? "" : " (did you mean " + best + "?)";
}

void reject_extras(const CLI::App& app, const std::vector<std::string>& candidates) {
  const std::vector<std::string> extras = app.remaining();
  if (extras.empty()) return;
  throw UsageError("unknown argument '" + extras.front() + "'" + suggest(extras.front(), candidates));
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HRRP graph network: data generation, training, evaluation and verification",
               "hrrpgnet"};
  app.require_subcommand(1);
  app.allow_extras();

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate synthetic train/test HRRP sets");
  gen_cmd->add_option("--spec", gen.spec, "Generator spec JSON (default: built-in 3-class scenario)")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--per-class", gen.per_class, "Profiles per class in each split (default 300)");
  gen_cmd->add_option("--n-cells", gen.cells, "Range cells N (default: the spec's value, 501 built-in)");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed (default 0)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, log and metrics");
  train_cmd->add_option("--data", tr.data, "Directory with train.csv/test.csv, or one CSV to split 80/20")
      ->required();
  train_cmd->add_option("--out", tr.out, "Run directory")->required();
  add_model_flags(*train_cmd, tr.flags, true);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset CSV");
  eval_cmd->add_option("--data", ev.data, "Dataset CSV")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "model.ckpt from a train run")->required();
  eval_cmd->add_option("--out", ev.out, "Metrics CSV (default: eval_<data>.csv next to the checkpoint)");

  AblateArgs ab;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Train all seven module combinations");
  ablate_cmd->add_option("--data", ab.data, "Directory with train.csv and test.csv")->required();
  ablate_cmd->add_option("--out", ab.out, "Output directory")->required();
  ablate_cmd->add_option("--seeds", ab.seeds, "Runs per row with consecutive seeds (default 5)");
  add_model_flags(*ablate_cmd, ab.flags, false);

  GradcheckArgs gc;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  grad_cmd->add_option("--seed", gc.seed, "Seed for the random shapes and values (default 0)");
  grad_cmd->add_option("--layer", gc.layer, "Check one layer only")
      ->check(CLI::IsMember(gradcheck_layers()));

  for (CLI::App* sub : app.get_subcommands({})) sub->allow_extras();

  std::vector<std::string> commands;
  for (const CLI::App* sub : app.get_subcommands({})) commands.push_back(sub->get_name());

  try {
    if (!args.empty() && !args.front().starts_with('-') &&
        std::find(commands.begin(), commands.end(), args.front()) == commands.end()) {
      throw UsageError("unknown command '" + args.front() + "'" + suggest(args.front(), commands));
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    reject_extras(app, commands);
    CLI::App* chosen = app.get_subcommands().front();
    reject_extras(*chosen, option_names(*chosen));

    if (chosen == gen_cmd) return gen_data(gen, out);
    if (chosen == train_cmd) return train_command(tr, out);
    if (chosen == eval_cmd) return eval_command(ev, out);
    if (chosen == ablate_cmd) return ablate_command(ab, out);
    return gradcheck_command(gc, out);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << target->help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "hrrpgnet: usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "hrrpgnet: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "hrrpgnet: configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "hrrpgnet: data error: " << e.what() << '\n';
    return kData;
  } catch (const ShapeError& e) {
    err << "hrrpgnet: data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "hrrpgnet: data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "hrrpgnet: numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "hrrpgnet: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace hrrpgnet::cli
