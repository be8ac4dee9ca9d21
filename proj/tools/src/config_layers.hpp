#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "hrrpgnet/model.hpp"
#include "hrrpgnet/trainkit.hpp"

namespace hrrpgnet::cli {

/// Model and training settings resolved from defaults, a config file and
/// `--set section.key=value` overrides, in that order.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

/// {"model": {...}, "train": {...}}
nlohmann::json to_json(const RunConfig& config);

/// Applies a config file on top of `base`. Unknown sections or keys are
/// configuration errors naming the field.
RunConfig merge_config_file(const RunConfig& base, const std::filesystem::path& path);

/// Applies overrides such as `train.epochs=20` or `model.ablation=ab`. The
/// value is read as JSON when it parses, otherwise as a string.
RunConfig apply_overrides(const RunConfig& base, std::span<const std::string> overrides);

/// Levenshtein distance, used for "did you mean" hints.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace hrrpgnet::cli
