#include "config_layers.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <vector>

#include "hrrpgnet/error.hpp"
#include "hrrpgnet/serialize.hpp"

namespace hrrpgnet::cli {

namespace {

RunConfig from_json_layers(const nlohmann::json& merged) {
  RunConfig out;
  try {
    out.model = merged.at("model").get<ModelConfig>();
    out.train = merged.at("train").get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return out;
}

void merge_section(nlohmann::json& target, const nlohmann::json& patch, const std::string& origin) {
  if (!patch.is_object()) throw ConfigError(origin + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    if (key != "model" && key != "train") {
      throw ConfigError(origin + ": unknown section '" + key + "' (expected model or train)");
    }
    if (!value.is_object()) throw ConfigError(origin + ": section '" + key + "' must be an object");
    for (const auto& [field, v] : value.items()) target[key][field] = v;
  }
}

}  // namespace

nlohmann::json to_json(const RunConfig& config) {
  return nlohmann::json{{"model", config.model}, {"train", config.train}};
}

RunConfig merge_config_file(const RunConfig& base, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json patch;
  try {
    patch = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  nlohmann::json merged = to_json(base);
  merge_section(merged, patch, path.string());
  return from_json_layers(merged);
}

RunConfig apply_overrides(const RunConfig& base, std::span<const std::string> overrides) {
  nlohmann::json merged = to_json(base);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("--set expects section.key=value, got '" + item + "'");
    }
    const std::string section = item.substr(0, dot);
    const std::string key = item.substr(dot + 1, eq - dot - 1);
    const std::string text = item.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    merge_section(merged, nlohmann::json{{section, {{key, value}}}}, "--set " + item);
  }
  return from_json_layers(merged);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace hrrpgnet::cli
