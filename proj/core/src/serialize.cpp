#include "hrrpgnet/serialize.hpp"

#include <algorithm>
#include <initializer_list>
#include <string>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {

namespace {

void require_object(const nlohmann::json& j, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
}

// Rejects keys outside `allowed` so typos in config files do not pass silently.
void require_known_keys(const nlohmann::json& j, const char* what,
                        std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError(std::string(what) + ": unknown field \"" + item.key() + "\"");
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      dst = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("field \"") + key + "\" has the wrong type");
    }
  }
}

}  // namespace

void to_json(nlohmann::json& j, const AblationConfig& v) { j = v.code(); }

void from_json(const nlohmann::json& j, AblationConfig& v) {
  if (!j.is_string()) throw ConfigError("ablation: expected a string such as \"abc\"");
  v = AblationConfig::parse(j.get<std::string>());
}

void to_json(nlohmann::json& j, const ModelConfig& v) {
  j = nlohmann::json{{"cells", v.cells},
                     {"conv_channels", v.conv_channels},
                     {"graph_channels", v.graph_channels},
                     {"classes", v.classes},
                     {"leaky_slope", v.leaky_slope},
                     {"bn_eps", v.bn_eps},
                     {"bn_momentum", v.bn_momentum},
                     {"shared_graph_bias", v.shared_graph_bias},
                     {"ablation", v.ablation},
                     {"seed", v.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& v) {
  require_object(j, "model config");
  require_known_keys(j, "model config",
                     {"cells", "conv_channels", "graph_channels", "classes", "leaky_slope",
                      "bn_eps", "bn_momentum", "shared_graph_bias", "ablation", "seed"});
  read_optional(j, "cells", v.cells);
  read_optional(j, "conv_channels", v.conv_channels);
  read_optional(j, "graph_channels", v.graph_channels);
  read_optional(j, "classes", v.classes);
  read_optional(j, "leaky_slope", v.leaky_slope);
  read_optional(j, "bn_eps", v.bn_eps);
  read_optional(j, "bn_momentum", v.bn_momentum);
  read_optional(j, "shared_graph_bias", v.shared_graph_bias);
  if (auto it = j.find("ablation"); it != j.end()) v.ablation = it->get<AblationConfig>();
  read_optional(j, "seed", v.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& v) {
  j = nlohmann::json{{"learning_rate", v.learning_rate},
                     {"beta1", v.beta1},
                     {"beta2", v.beta2},
                     {"adam_eps", v.adam_eps},
                     {"epochs", v.epochs},
                     {"batch_size", v.batch_size},
                     {"seed", v.seed},
                     {"shuffle", v.shuffle},
                     {"validate_every_epoch", v.validate_every_epoch}};
}

void from_json(const nlohmann::json& j, TrainConfig& v) {
  require_object(j, "train config");
  require_known_keys(j, "train config",
                     {"learning_rate", "beta1", "beta2", "adam_eps", "epochs", "batch_size",
                      "seed", "shuffle", "validate_every_epoch"});
  read_optional(j, "learning_rate", v.learning_rate);
  read_optional(j, "beta1", v.beta1);
  read_optional(j, "beta2", v.beta2);
  read_optional(j, "adam_eps", v.adam_eps);
  read_optional(j, "epochs", v.epochs);
  read_optional(j, "batch_size", v.batch_size);
  read_optional(j, "seed", v.seed);
  read_optional(j, "shuffle", v.shuffle);
  read_optional(j, "validate_every_epoch", v.validate_every_epoch);
}

void to_json(nlohmann::json& j, const ScattererSpec& v) {
  j = nlohmann::json{{"position", v.position}, {"amplitude", v.amplitude}, {"width", v.width}};
}

void from_json(const nlohmann::json& j, ScattererSpec& v) {
  require_object(j, "scatterer");
  require_known_keys(j, "scatterer", {"position", "amplitude", "width"});
  if (!j.contains("position")) throw ConfigError("scatterer: missing \"position\"");
  read_optional(j, "position", v.position);
  read_optional(j, "amplitude", v.amplitude);
  read_optional(j, "width", v.width);
}

void to_json(nlohmann::json& j, const SynthClassSpec& v) {
  j = nlohmann::json{{"name", v.name},
                     {"scatterers", v.scatterers},
                     {"position_jitter", v.position_jitter},
                     {"amplitude_jitter", v.amplitude_jitter},
                     {"dropout_prob", v.dropout_prob},
                     {"noise_sigma", v.noise_sigma}};
}

void from_json(const nlohmann::json& j, SynthClassSpec& v) {
  require_object(j, "class spec");
  require_known_keys(j, "class spec",
                     {"name", "scatterers", "position_jitter", "amplitude_jitter", "dropout_prob",
                      "noise_sigma"});
  read_optional(j, "name", v.name);
  if (auto it = j.find("scatterers"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("class spec: \"scatterers\" must be an array");
    v.scatterers = it->get<std::vector<ScattererSpec>>();
  }
  read_optional(j, "position_jitter", v.position_jitter);
  read_optional(j, "amplitude_jitter", v.amplitude_jitter);
  read_optional(j, "dropout_prob", v.dropout_prob);
  read_optional(j, "noise_sigma", v.noise_sigma);
}

void to_json(nlohmann::json& j, const GeneratorSpec& v) {
  j = nlohmann::json{{"cells", v.cells},
                     {"test_position_offset", v.test_position_offset},
                     {"classes", v.classes}};
}

void from_json(const nlohmann::json& j, GeneratorSpec& v) {
  require_object(j, "generator spec");
  require_known_keys(j, "generator spec", {"cells", "test_position_offset", "classes"});
  read_optional(j, "cells", v.cells);
  read_optional(j, "test_position_offset", v.test_position_offset);
  if (auto it = j.find("classes"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("generator spec: \"classes\" must be an array");
    v.classes = it->get<std::vector<SynthClassSpec>>();
  }
}

void to_json(nlohmann::json& j, NormalizationMode v) { j = std::string(to_string(v)); }

void from_json(const nlohmann::json& j, NormalizationMode& v) {
  if (!j.is_string()) throw ConfigError("normalization: expected a string");
  v = parse_normalization(j.get<std::string>());
}

void to_json(nlohmann::json& j, const DatasetManifest& v) {
  j = nlohmann::json{{"origin", v.origin}, {"seed", v.seed}, {"normalization", v.normalization}};
  if (v.generator) j["generator"] = *v.generator;
}

void from_json(const nlohmann::json& j, DatasetManifest& v) {
  require_object(j, "manifest");
  read_optional(j, "origin", v.origin);
  read_optional(j, "seed", v.seed);
  if (auto it = j.find("normalization"); it != j.end()) v.normalization = it->get<NormalizationMode>();
  if (auto it = j.find("generator"); it != j.end()) {
    v.generator = it->get<std::vector<SynthClassSpec>>();
  } else {
    v.generator.reset();
  }
}

}  // namespace hrrpgnet
