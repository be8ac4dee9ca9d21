#include "hrrpgnet/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hrrpgnet_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthClassSpec two_peak_class() {
  SynthClassSpec spec;
  spec.name = "two_peaks";
  spec.scatterers = {{10.0, 1.0, 2.0}, {30.0, 0.5, 2.0}};
  return spec;
}

Dataset from_rows(std::vector<std::vector<double>> rows) {
  Dataset d;
  d.cells = rows.front().size();
  d.classes = 1;
  d.class_names = {"x"};
  for (auto& r : rows) d.samples.push_back({std::move(r), 0});
  return d;
}

// ---------------------------------------------------------------------------

TEST(SynthGenerate, TwoScattererPeaks) {
  const std::vector<SynthClassSpec> specs{two_peak_class()};
  const Dataset d = synth_generate(specs, 5, 48, 1);
  ASSERT_EQ(d.samples.size(), 5u);
  for (const auto& s : d.samples) {
    const auto& h = s.amplitudes;
    const auto peak = std::max_element(h.begin(), h.end());
    EXPECT_EQ(peak - h.begin(), 10);
    EXPECT_NEAR(*peak, 1.0, 1e-9);
    EXPECT_NEAR(h[30], 0.5, 1e-9);
    EXPECT_GT(h[30], h[29]);
    EXPECT_GT(h[30], h[31]);
  }
}

TEST(SynthGenerate, NoRandomnessGivesIdenticalSamples) {
  const std::vector<SynthClassSpec> specs{two_peak_class()};
  const Dataset d = synth_generate(specs, 4, 48, 99);
  for (const auto& s : d.samples) EXPECT_EQ(s.amplitudes, d.samples.front().amplitudes);
}

TEST(SynthGenerate, SameSeedSameDataset) {
  const auto spec = default_three_class_spec();
  const Dataset a = synth_generate(spec.classes, 4, spec.cells, 5);
  const Dataset b = synth_generate(spec.classes, 4, spec.cells, 5);
  const Dataset c = synth_generate(spec.classes, 4, spec.cells, 6);
  ASSERT_EQ(a.samples.size(), 12u);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].amplitudes, b.samples[i].amplitudes);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
  }
  EXPECT_NE(a.samples[0].amplitudes, c.samples[0].amplitudes);
}

TEST(SynthGenerate, AmplitudesFiniteAndNonNegative) {
  const auto spec = default_three_class_spec();
  const Dataset d = synth_generate(spec.classes, 10, spec.cells, 7);
  EXPECT_EQ(d.class_counts(), (std::vector<std::size_t>{10, 10, 10}));
  for (const auto& s : d.samples)
    for (double v : s.amplitudes) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
}

TEST(SynthGenerate, PeakFidelityOverRandomSpecs) {
  std::mt19937_64 rng(321);
  std::uniform_real_distribution<double> width_dist(0.5, 3.0);
  std::uniform_real_distribution<double> amp_dist(0.1, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cells = 128;
    const double width = width_dist(rng);
    const double gap = 4.0 * width + 1.0;
    SynthClassSpec spec;
    spec.name = "random";
    double pos = 5.0 + std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    const int count = 1 + int(rng() % 4);
    for (int k = 0; k < count && pos < cells - 5.0; ++k) {
      spec.scatterers.push_back({pos, amp_dist(rng), width});
      pos += gap + std::uniform_real_distribution<double>(0.0, 10.0)(rng);
    }
    // Make the strongest scatterer unambiguous.
    auto& strongest = spec.scatterers[rng() % spec.scatterers.size()];
    strongest.amplitude = 2.0;
    const std::vector<SynthClassSpec> specs{spec};
    const Dataset d = synth_generate(specs, 1, cells, trial);
    const auto& h = d.samples[0].amplitudes;
    const auto idx = std::max_element(h.begin(), h.end()) - h.begin();
    EXPECT_EQ(idx, std::lround(strongest.position)) << "trial " << trial;
  }
}

TEST(SynthGenerate, RejectsInvalidSpecs) {
  SynthClassSpec bad = two_peak_class();
  bad.scatterers.clear();
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{bad}, 1, 48, 0), ConfigError);
  bad = two_peak_class();
  bad.scatterers[0].width = 0.0;
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{bad}, 1, 48, 0), ConfigError);
  bad = two_peak_class();
  bad.scatterers[1].position = 48.0;
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{bad}, 1, 48, 0), ConfigError);
  bad = two_peak_class();
  bad.amplitude_jitter = 1.0;
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{bad}, 1, 48, 0), ConfigError);
  bad = two_peak_class();
  bad.dropout_prob = -0.1;
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{bad}, 1, 48, 0), ConfigError);
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{}, 1, 48, 0), ConfigError);
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{two_peak_class()}, 0, 48, 0), ConfigError);
  EXPECT_THROW(synth_generate(std::vector<SynthClassSpec>{two_peak_class()}, 1, 2, 0), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Normalize, MaxAbsExample) {
  const Dataset d = normalize(from_rows({{2.0, 4.0, 8.0}}), NormalizationMode::max_abs);
  EXPECT_EQ(d.samples[0].amplitudes, (std::vector<double>{0.25, 0.5, 1.0}));
  EXPECT_EQ(d.manifest.normalization, NormalizationMode::max_abs);
}

TEST(Normalize, L2Example) {
  const Dataset d = normalize(from_rows({{3.0, 4.0}}), NormalizationMode::l2);
  EXPECT_NEAR(d.samples[0].amplitudes[0], 0.6, 1e-15);
  EXPECT_NEAR(d.samples[0].amplitudes[1], 0.8, 1e-15);
}

TEST(Normalize, ZeroSampleUnchanged) {
  for (auto mode : {NormalizationMode::none, NormalizationMode::max_abs, NormalizationMode::l2}) {
    const Dataset d = normalize(from_rows({{0.0, 0.0, 0.0}}), mode);
    EXPECT_EQ(d.samples[0].amplitudes, (std::vector<double>{0.0, 0.0, 0.0}));
  }
}

TEST(Normalize, Idempotent) {
  const auto spec = default_three_class_spec();
  const Dataset raw = synth_generate(spec.classes, 5, spec.cells, 3);
  for (auto mode : {NormalizationMode::max_abs, NormalizationMode::l2}) {
    const Dataset once = normalize(raw, mode);
    const Dataset twice = normalize(once, mode);
    for (std::size_t i = 0; i < once.samples.size(); ++i)
      for (std::size_t n = 0; n < once.cells; ++n)
        EXPECT_NEAR(twice.samples[i].amplitudes[n], once.samples[i].amplitudes[n], 1e-15);
  }
}

TEST(Normalize, ModeNamesRoundTrip) {
  for (auto mode : {NormalizationMode::none, NormalizationMode::max_abs, NormalizationMode::l2})
    EXPECT_EQ(parse_normalization(to_string(mode)), mode);
  EXPECT_THROW(parse_normalization("minmax"), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Csv, RoundTripIsBitExact) {
  const fs::path dir = scratch_dir("roundtrip");
  const auto bench = generate_benchmark(default_three_class_spec(), 4, 11);
  save_csv(bench.train, dir / "train.csv");
  EXPECT_TRUE(fs::exists(dir / "train.manifest.json"));
  const Dataset back = load_csv(dir / "train.csv");
  EXPECT_EQ(back.cells, bench.train.cells);
  EXPECT_EQ(back.classes, bench.train.classes);
  EXPECT_EQ(back.class_names, bench.train.class_names);
  EXPECT_EQ(back.manifest, bench.train.manifest);
  ASSERT_EQ(back.samples.size(), bench.train.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, bench.train.samples[i].label);
    EXPECT_EQ(back.samples[i].amplitudes, bench.train.samples[i].amplitudes);
  }
  fs::remove_all(dir);
}

TEST(Csv, ExtremeDoublesRoundTrip) {
  const fs::path dir = scratch_dir("extreme");
  Dataset d = from_rows({{0.1, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, 0.0}});
  save_csv(d, dir / "x.csv");
  EXPECT_EQ(load_csv(dir / "x.csv").samples[0].amplitudes, d.samples[0].amplitudes);
  fs::remove_all(dir);
}

TEST(Csv, WithoutManifestInfersClassCount) {
  const fs::path dir = scratch_dir("bare");
  {
    std::ofstream out(dir / "bare.csv");
    out << "label,h_0,h_1,h_2\n0,1,2,3\n2,0.5,0.25,0\n";
  }
  const Dataset d = load_csv(dir / "bare.csv");
  EXPECT_EQ(d.cells, 3u);
  EXPECT_EQ(d.classes, 3u);
  EXPECT_EQ(d.class_names.size(), 3u);
  EXPECT_EQ(d.samples[1].amplitudes, (std::vector<double>{0.5, 0.25, 0.0}));
  fs::remove_all(dir);
}

TEST(Csv, ShortRowReportsLine) {
  const fs::path dir = scratch_dir("short");
  {
    std::ofstream out(dir / "bad.csv");
    out << "label,h_0,h_1,h_2\n0,1,2,3\n1,1,2\n";
  }
  try {
    load_csv(dir / "bad.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Csv, NonNumericFieldReportsLine) {
  const fs::path dir = scratch_dir("nan");
  {
    std::ofstream out(dir / "bad.csv");
    out << "label,h_0,h_1\n0,1,abc\n";
  }
  try {
    load_csv(dir / "bad.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  fs::remove_all(dir);
}

TEST(Csv, HeaderOnlyIsNoSamples) {
  const fs::path dir = scratch_dir("empty");
  {
    std::ofstream out(dir / "empty.csv");
    out << "label,h_0,h_1\n";
  }
  try {
    load_csv(dir / "empty.csv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("no samples"), std::string::npos);
  }
  EXPECT_THROW(load_csv(dir / "missing.csv"), FormatError);
  fs::remove_all(dir);
}

TEST(Csv, ManifestPathNaming) {
  EXPECT_EQ(manifest_path("data/train.csv"), fs::path("data/train.manifest.json"));
}

// ---------------------------------------------------------------------------

Dataset labelled(std::size_t per_class, std::size_t classes) {
  Dataset d;
  d.cells = 1;
  d.classes = classes;
  for (std::size_t c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i)
      d.samples.push_back({{double(c * per_class + i)}, c});
  return d;
}

TEST(Split, StratifiedCounts) {
  const Dataset d = labelled(900, 3);
  const auto [train, test] = split(d, 2.0 / 3.0, 1);
  EXPECT_EQ(train.class_counts(), (std::vector<std::size_t>{600, 600, 600}));
  EXPECT_EQ(test.class_counts(), (std::vector<std::size_t>{300, 300, 300}));
}

TEST(Split, IsAPartition) {
  const Dataset d = labelled(37, 3);
  const auto [train, test] = split(d, 0.7, 2);
  std::multiset<double> all;
  for (const auto& s : train.samples) all.insert(s.amplitudes[0]);
  for (const auto& s : test.samples) all.insert(s.amplitudes[0]);
  std::multiset<double> original;
  for (const auto& s : d.samples) original.insert(s.amplitudes[0]);
  EXPECT_EQ(all, original);
  std::set<double> unique(all.begin(), all.end());
  EXPECT_EQ(unique.size(), all.size());
}

TEST(Split, ProportionWithinOneSample) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t per_class = 2 + rng() % 50;
    const double frac = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const auto [train, test] = split(labelled(per_class, 3), frac, trial);
    for (std::size_t n : train.class_counts())
      EXPECT_LE(std::abs(double(n) - frac * double(per_class)), 1.0);
    for (std::size_t n : test.class_counts()) EXPECT_GE(n, 1u);
  }
}

TEST(Split, DeterministicGivenSeed) {
  const Dataset d = labelled(20, 2);
  const auto a = split(d, 0.5, 9);
  const auto b = split(d, 0.5, 9);
  for (std::size_t i = 0; i < a.first.samples.size(); ++i)
    EXPECT_EQ(a.first.samples[i].amplitudes, b.first.samples[i].amplitudes);
}

TEST(Split, Errors) {
  EXPECT_THROW(split(labelled(1, 2), 0.5, 0), ConfigError);
  EXPECT_THROW(split(labelled(5, 2), 0.0, 0), ConfigError);
  EXPECT_THROW(split(labelled(5, 2), 1.0, 0), ConfigError);
  EXPECT_NO_THROW(split(labelled(1, 2), 0.5, 0, false));
}

// ---------------------------------------------------------------------------

TEST(Benchmark, ShippedSpecFilesMatchBuiltIns) {
  const fs::path specs = HRRPGNET_SPECS_DIR;
  EXPECT_EQ(load_generator_spec(specs / "default3.json"), default_three_class_spec());
  EXPECT_EQ(load_generator_spec(specs / "toy2.json"), separable_toy_spec());
}

TEST(Benchmark, DefaultScenarioShape) {
  const auto spec = default_three_class_spec();
  EXPECT_EQ(spec.cells, 501u);
  EXPECT_EQ(spec.classes.size(), 3u);
  const auto bench = generate_benchmark(spec, 6, 1);
  EXPECT_EQ(bench.train.samples.size(), 18u);
  EXPECT_EQ(bench.test.samples.size(), 18u);
  EXPECT_EQ(bench.train.manifest.normalization, NormalizationMode::max_abs);
  for (const Dataset* d : {&bench.train, &bench.test}) {
    for (const auto& s : d->samples) {
      const double peak = *std::max_element(s.amplitudes.begin(), s.amplitudes.end());
      EXPECT_DOUBLE_EQ(peak, 1.0);
    }
  }
  EXPECT_NE(bench.train.samples[0].amplitudes, bench.test.samples[0].amplitudes);
}

TEST(Benchmark, SpecFileRoundTrip) {
  const fs::path dir = scratch_dir("spec");
  GeneratorSpec spec = separable_toy_spec();
  spec.test_position_offset = 0.25;
  save_generator_spec(spec, dir / "s.json");
  EXPECT_EQ(load_generator_spec(dir / "s.json"), spec);
  {
    std::ofstream out(dir / "typo.json");
    out << R"({"cells": 32, "clases": []})";
  }
  EXPECT_THROW(load_generator_spec(dir / "typo.json"), ConfigError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace hrrpgnet
