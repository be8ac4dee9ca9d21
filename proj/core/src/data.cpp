#include "hrrpgnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hrrpgnet/error.hpp"
#include "hrrpgnet/serialize.hpp"

namespace hrrpgnet {

void SynthClassSpec::validate(std::size_t cells) const {
  const std::string who = "class \"" + name + "\": ";
  if (scatterers.empty()) throw ConfigError(who + "needs at least one scatterer");
  for (std::size_t k = 0; k < scatterers.size(); ++k) {
    const ScattererSpec& s = scatterers[k];
    const std::string at = who + "scatterer " + std::to_string(k) + " ";
    if (!(s.position >= 0.0 && s.position < static_cast<double>(cells))) {
      throw ConfigError(at + "position " + std::to_string(s.position) + " outside [0, " +
                        std::to_string(cells) + ")");
    }
    if (!(s.amplitude > 0.0) || !std::isfinite(s.amplitude)) {
      throw ConfigError(at + "amplitude must be positive");
    }
    if (!(s.width > 0.0) || !std::isfinite(s.width)) throw ConfigError(at + "width must be positive");
  }
  if (!(position_jitter >= 0.0)) throw ConfigError(who + "position_jitter must be >= 0");
  if (!(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0)) {
    throw ConfigError(who + "amplitude_jitter must be in [0, 1)");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) {
    throw ConfigError(who + "dropout_prob must be in [0, 1)");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError(who + "noise_sigma must be >= 0");
}

std::string_view to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::none: return "none";
    case NormalizationMode::max_abs: return "max_abs";
    case NormalizationMode::l2: return "l2";
  }
  return "none";
}

NormalizationMode parse_normalization(std::string_view text) {
  if (text == "none") return NormalizationMode::none;
  if (text == "max_abs") return NormalizationMode::max_abs;
  if (text == "l2") return NormalizationMode::l2;
  throw ConfigError("unknown normalization mode \"" + std::string(text) +
                    "\" (expected none, max_abs or l2)");
}

void Dataset::validate() const {
  if (class_names.size() != classes) {
    throw FormatError("dataset has " + std::to_string(class_names.size()) + " class names for " +
                      std::to_string(classes) + " classes");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].cells() != cells) {
      throw FormatError("sample " + std::to_string(i) + " has " +
                        std::to_string(samples[i].cells()) + " cells, dataset has " +
                        std::to_string(cells));
    }
    if (samples[i].label >= classes) {
      throw FormatError("sample " + std::to_string(i) + " has label " +
                        std::to_string(samples[i].label) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (const HrrpSample& s : samples) {
    if (s.label < classes) ++counts[s.label];
  }
  return counts;
}

// ---------------------------------------------------------------------------

Dataset synth_generate(std::span<const SynthClassSpec> specs, std::size_t per_class,
                       std::size_t cells, std::uint64_t seed) {
  if (specs.empty()) throw ConfigError("synth_generate: no class specs");
  if (per_class < 1) throw ConfigError("synth_generate: per_class must be >= 1");
  if (cells < 3) throw ConfigError("synth_generate: cells must be >= 3");
  for (const SynthClassSpec& s : specs) s.validate(cells);

  Dataset d;
  d.cells = cells;
  d.classes = specs.size();
  d.manifest = {"synthetic", std::vector<SynthClassSpec>(specs.begin(), specs.end()), seed,
                NormalizationMode::none};
  d.samples.reserve(specs.size() * per_class);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t c = 0; c < specs.size(); ++c) {
    const SynthClassSpec& spec = specs[c];
    d.class_names.push_back(spec.name.empty() ? "class_" + std::to_string(c) : spec.name);
    for (std::size_t s = 0; s < per_class; ++s) {
      const double shift = spec.position_jitter * (2.0 * unit(rng) - 1.0);
      std::vector<double> gain(spec.scatterers.size());
      for (std::size_t k = 0; k < gain.size(); ++k) {
        const double factor = 1.0 + spec.amplitude_jitter * (2.0 * unit(rng) - 1.0);
        const bool keep = unit(rng) >= spec.dropout_prob;
        gain[k] = keep ? spec.scatterers[k].amplitude * factor : 0.0;
      }
      HrrpSample sample{std::vector<double>(cells, 0.0), c};
      for (std::size_t n = 0; n < cells; ++n) {
        double echo = 0.0;
        for (std::size_t k = 0; k < gain.size(); ++k) {
          if (gain[k] == 0.0) continue;
          const ScattererSpec& sc = spec.scatterers[k];
          const double offset = static_cast<double>(n) - sc.position - shift;
          echo += gain[k] * std::exp(-(offset * offset) / (2.0 * sc.width * sc.width));
        }
        if (spec.noise_sigma > 0.0) echo += spec.noise_sigma * gauss(rng);
        sample.amplitudes[n] = std::abs(echo);
      }
      d.samples.push_back(std::move(sample));
    }
  }
  return d;
}

Dataset normalize(Dataset dataset, NormalizationMode mode) {
  if (dataset.empty()) throw UsageError("normalize: empty dataset");
  for (HrrpSample& s : dataset.samples) {
    double scale = 0.0;
    if (mode == NormalizationMode::max_abs) {
      for (double v : s.amplitudes) scale = std::max(scale, std::abs(v));
    } else if (mode == NormalizationMode::l2) {
      double sq = 0.0;
      for (double v : s.amplitudes) sq += v * v;
      scale = std::sqrt(sq);
    }
    if (scale > 0.0) {
      for (double& v : s.amplitudes) v /= scale;
    }
  }
  if (mode != NormalizationMode::none) dataset.manifest.normalization = mode;
  return dataset;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed, bool stratified) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split: train_fraction must be in (0, 1)");
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> to_train(dataset.samples.size(), false);

  auto take = [&](std::vector<std::size_t> members, std::size_t count) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < count; ++i) to_train[members[i]] = true;
  };

  if (stratified) {
    std::vector<std::vector<std::size_t>> by_class(dataset.classes);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      by_class.at(dataset.samples[i].label).push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      const std::size_t total = by_class[c].size();
      if (total == 0) continue;
      if (total < 2) {
        throw ConfigError("split: class " + std::to_string(c) +
                          " has fewer than 2 samples, cannot stratify");
      }
      auto count = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
      count = std::clamp<std::size_t>(count, 1, total - 1);
      take(std::move(by_class[c]), count);
    }
  } else {
    std::vector<std::size_t> all(dataset.samples.size());
    std::iota(all.begin(), all.end(), 0);
    const auto count = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(all.size())));
    take(std::move(all), count);
  }

  Dataset train_part, test_part;
  for (Dataset* part : {&train_part, &test_part}) {
    part->cells = dataset.cells;
    part->classes = dataset.classes;
    part->class_names = dataset.class_names;
    part->manifest = dataset.manifest;
  }
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (to_train[i] ? train_part : test_part).samples.push_back(dataset.samples[i]);
  }
  return {std::move(train_part), std::move(test_part)};
}

// ---------------------------------------------------------------------------

void GeneratorSpec::validate() const {
  if (cells < 3) throw ConfigError("generator spec: cells must be >= 3");
  if (classes.empty()) throw ConfigError("generator spec: no classes");
  for (const SynthClassSpec& c : classes) c.validate(cells);
  if (!std::isfinite(test_position_offset)) {
    throw ConfigError("generator spec: test_position_offset must be finite");
  }
}

namespace {

constexpr double kRangeResolution = 0.15;  // metres per cell for a 1 GHz bandwidth

struct PartSpec {
  double fraction;  // position along the fuselage, 0 = nose
  double amplitude;
  double width;
};

SynthClassSpec aircraft(std::string name, double length_m, std::initializer_list<PartSpec> parts,
                        double centre) {
  const double span = length_m / kRangeResolution;
  const double start = centre - span / 2.0;
  SynthClassSpec spec;
  spec.name = std::move(name);
  for (const PartSpec& p : parts) {
    spec.scatterers.push_back({start + p.fraction * span, p.amplitude, p.width});
  }
  spec.position_jitter = 8.0;
  spec.amplitude_jitter = 0.3;
  spec.dropout_prob = 0.1;
  spec.noise_sigma = 0.02;
  return spec;
}

}  // namespace

GeneratorSpec default_three_class_spec() {
  GeneratorSpec spec;
  spec.cells = 501;
  spec.test_position_offset = 0.5;
  const double centre = 250.0;
  spec.classes.push_back(aircraft("F15", 19.45,
                                  {{0.00, 0.50, 1.5},
                                   {0.18, 0.70, 2.0},
                                   {0.30, 1.00, 2.0},
                                   {0.50, 0.80, 2.5},
                                   {0.62, 0.55, 1.5},
                                   {0.85, 0.90, 2.0},
                                   {1.00, 0.75, 1.5}},
                                  centre));
  spec.classes.push_back(aircraft("F18", 17.07,
                                  {{0.00, 0.45, 1.5},
                                   {0.20, 0.80, 2.0},
                                   {0.33, 0.60, 1.5},
                                   {0.42, 1.00, 2.0},
                                   {0.58, 0.70, 2.5},
                                   {0.82, 0.85, 2.0},
                                   {1.00, 0.60, 1.5}},
                                  centre));
  spec.classes.push_back(aircraft("IDF", 14.48,
                                  {{0.00, 0.50, 1.5},
                                   {0.22, 0.90, 2.0},
                                   {0.38, 0.80, 2.0},
                                   {0.55, 1.00, 2.5},
                                   {0.80, 0.70, 2.0},
                                   {1.00, 0.65, 1.5}},
                                  centre));
  return spec;
}

GeneratorSpec separable_toy_spec() {
  GeneratorSpec spec;
  spec.cells = 32;
  spec.test_position_offset = 0.5;
  SynthClassSpec near{"near", {{8.0, 1.0, 1.5}}, 1.0, 0.2, 0.0, 0.02};
  SynthClassSpec far{"far", {{24.0, 1.0, 1.5}}, 1.0, 0.2, 0.0, 0.02};
  spec.classes = {near, far};
  return spec;
}

Benchmark generate_benchmark(const GeneratorSpec& spec, std::size_t per_class,
                             std::uint64_t seed) {
  spec.validate();
  std::vector<SynthClassSpec> shifted = spec.classes;
  for (SynthClassSpec& c : shifted) {
    for (ScattererSpec& s : c.scatterers) {
      s.position = std::clamp(s.position + spec.test_position_offset, 0.0,
                              std::nextafter(static_cast<double>(spec.cells), 0.0));
    }
  }
  // Independent stream for the held-out set (splitmix64 of the train seed).
  std::uint64_t test_seed = seed + 0x9E3779B97F4A7C15ull;
  test_seed = (test_seed ^ (test_seed >> 30)) * 0xBF58476D1CE4E5B9ull;
  test_seed = (test_seed ^ (test_seed >> 27)) * 0x94D049BB133111EBull;
  test_seed ^= test_seed >> 31;

  Benchmark b{normalize(synth_generate(spec.classes, per_class, spec.cells, seed),
                        NormalizationMode::max_abs),
              normalize(synth_generate(shifted, per_class, spec.cells, test_seed),
                        NormalizationMode::max_abs)};
  return b;
}

// ---------------------------------------------------------------------------
// Files

namespace {

void write_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::string text = "label";
  for (std::size_t n = 0; n < dataset.cells; ++n) text += ",h_" + std::to_string(n);
  text += '\n';
  for (const HrrpSample& s : dataset.samples) {
    text += std::to_string(s.label);
    for (double v : s.amplitudes) {
      text += ',';
      write_double(text, v);
    }
    text += '\n';
  }
  std::ofstream out = open_for_write(path);
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
  save_manifest(dataset, manifest_path(path));
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file, no samples");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 2 || header.front() != "label") {
    throw ParseError(1, "header must be label,h_0,...,h_{N-1}");
  }
  for (std::size_t n = 1; n < header.size(); ++n) {
    if (header[n] != "h_" + std::to_string(n - 1)) {
      throw ParseError(1, "unexpected header field \"" + std::string(header[n]) + "\"");
    }
  }
  const std::size_t cells = header.size() - 1;

  Dataset d;
  d.cells = cells;
  std::size_t line_no = 1;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != cells + 1) {
      throw ParseError(line_no, "expected " + std::to_string(cells + 1) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    HrrpSample s{std::vector<double>(cells), 0};
    {
      const auto f = fields[0];
      auto res = std::from_chars(f.data(), f.data() + f.size(), s.label);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw ParseError(line_no, "label \"" + std::string(f) + "\" is not a class index");
      }
    }
    for (std::size_t n = 0; n < cells; ++n) {
      const auto f = fields[n + 1];
      auto res = std::from_chars(f.data(), f.data() + f.size(), s.amplitudes[n]);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size() ||
          !std::isfinite(s.amplitudes[n])) {
        throw ParseError(line_no, "field h_" + std::to_string(n) + " = \"" + std::string(f) +
                                      "\" is not a finite number");
      }
    }
    max_label = std::max(max_label, s.label);
    d.samples.push_back(std::move(s));
  }
  if (d.samples.empty()) throw FormatError(path.string() + ": no samples");

  const auto sidecar = manifest_path(path);
  if (std::filesystem::exists(sidecar)) {
    const nlohmann::json doc = read_json_file(sidecar);
    try {
      if (doc.at("N").get<std::size_t>() != cells) {
        throw FormatError(sidecar.string() + ": N disagrees with " + path.string());
      }
      d.classes = doc.at("C").get<std::size_t>();
      d.class_names = doc.at("class_names").get<std::vector<std::string>>();
      d.manifest = doc.at("provenance").get<DatasetManifest>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed manifest " + sidecar.string() + ": " + e.what());
    } catch (const ConfigError& e) {
      throw FormatError("malformed manifest " + sidecar.string() + ": " + e.what());
    }
  } else {
    d.classes = max_label + 1;
    for (std::size_t c = 0; c < d.classes; ++c) d.class_names.push_back("class_" + std::to_string(c));
    d.manifest.origin = "csv:" + path.string();
  }
  d.validate();
  return d;
}

std::filesystem::path manifest_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".manifest.json");
  return p;
}

void save_manifest(const Dataset& dataset, const std::filesystem::path& path) {
  nlohmann::json doc{{"N", dataset.cells},
                     {"C", dataset.classes},
                     {"class_names", dataset.class_names},
                     {"provenance", dataset.manifest}};
  std::ofstream out = open_for_write(path);
  out << doc.dump(2) << '\n';
}

GeneratorSpec load_generator_spec(const std::filesystem::path& path) {
  const nlohmann::json doc = read_json_file(path);
  GeneratorSpec spec;
  try {
    spec = doc.get<GeneratorSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("generator spec " + path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << nlohmann::json(spec).dump(2) << '\n';
}

}  // namespace hrrpgnet
