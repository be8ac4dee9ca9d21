#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hrrpgnet/graphgen.hpp"

namespace hrrpgnet {

/// A point scatterer rendered as a Gaussian pulse along range.
struct ScattererSpec {
  double position = 0.0;   ///< range-cell index, may be fractional
  double amplitude = 1.0;  ///< > 0
  double width = 1.0;      ///< pulse standard deviation in cells, > 0

  friend bool operator==(const ScattererSpec&, const ScattererSpec&) = default;
};

struct SynthClassSpec {
  std::string name;
  std::vector<ScattererSpec> scatterers;
  double position_jitter = 0.0;   ///< per-sample shift ~ U(-j, +j) cells
  double amplitude_jitter = 0.0;  ///< per-scatterer factor ~ U(1 - a, 1 + a), a in [0, 1)
  double dropout_prob = 0.0;      ///< per-scatterer occlusion probability in [0, 1)
  double noise_sigma = 0.0;       ///< additive Gaussian noise before the magnitude

  /// Throws ConfigError naming the class and the offending field.
  void validate(std::size_t cells) const;

  friend bool operator==(const SynthClassSpec&, const SynthClassSpec&) = default;
};

enum class NormalizationMode { none, max_abs, l2 };

std::string_view to_string(NormalizationMode mode);
NormalizationMode parse_normalization(std::string_view text);

/// Where a dataset came from.
struct DatasetManifest {
  std::string origin;                                  ///< "synthetic", "csv:<path>", ...
  std::optional<std::vector<SynthClassSpec>> generator;
  std::uint64_t seed = 0;
  NormalizationMode normalization = NormalizationMode::none;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  std::vector<HrrpSample> samples;
  std::size_t cells = 0;
  std::size_t classes = 0;
  std::vector<std::string> class_names;
  DatasetManifest manifest;

  /// Throws FormatError when samples disagree on N or labels fall outside [0, C).
  void validate() const;
  std::vector<std::size_t> class_counts() const;
  bool empty() const noexcept { return samples.empty(); }
};

/// Renders per_class profiles per class spec. For each sample: one shift j,
/// per-scatterer amplitude factor f_k and keep flag, then
///   h_n = | sum_k keep_k a_k f_k exp(-(n - p_k - j)^2 / (2 w_k^2)) + noise_n |.
/// Deterministic given seed.
Dataset synth_generate(std::span<const SynthClassSpec> specs, std::size_t per_class,
                       std::size_t cells, std::uint64_t seed);

/// max_abs divides each sample by its peak, l2 by its Euclidean norm. All-zero
/// samples are left untouched.
Dataset normalize(Dataset dataset, NormalizationMode mode);

/// Stratified splits keep each class's share within one sample of
/// train_fraction and leave at least one sample of every class on each side.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed, bool stratified = true);

// ---------------------------------------------------------------------------
// Shipped scenarios

/// A generator scenario: class specs, profile length, and the range offset
/// applied to the held-out split to emulate an acquisition-geometry change.
struct GeneratorSpec {
  std::size_t cells = 501;
  std::vector<SynthClassSpec> classes;
  double test_position_offset = 0.5;

  void validate() const;
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

/// Three aircraft-like classes whose scatterer spans follow 19.45 m,
/// 17.07 m and 14.48 m fuselage lengths at 0.15 m range resolution.
GeneratorSpec default_three_class_spec();

/// Two classes, one well-separated scatterer each, N = 32.
GeneratorSpec separable_toy_spec();

struct Benchmark {
  Dataset train;
  Dataset test;
};

/// Train and test sets with per_class samples per class each, max_abs
/// normalized. The test set uses an independent seed stream and scatterer
/// positions shifted by spec.test_position_offset.
Benchmark generate_benchmark(const GeneratorSpec& spec, std::size_t per_class,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

/// Header `label,h_0,...,h_{N-1}`, one sample per row, shortest round-trip
/// decimal doubles, LF line endings.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Reads a dataset CSV. When a sidecar manifest (see manifest_path) exists it
/// supplies C, class names and provenance; otherwise C = max label + 1.
Dataset load_csv(const std::filesystem::path& path);

/// `data/train.csv` -> `data/train.manifest.json`.
std::filesystem::path manifest_path(const std::filesystem::path& csv_path);

void save_manifest(const Dataset& dataset, const std::filesystem::path& path);

GeneratorSpec load_generator_spec(const std::filesystem::path& path);
void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path);

}  // namespace hrrpgnet
