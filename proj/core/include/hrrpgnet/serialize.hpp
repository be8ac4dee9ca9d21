#pragma once

// JSON mappings for the configuration and provenance types.

#include <nlohmann/json.hpp>

#include "hrrpgnet/data.hpp"
#include "hrrpgnet/model.hpp"
#include "hrrpgnet/trainkit.hpp"

namespace hrrpgnet {

void to_json(nlohmann::json& j, const AblationConfig& v);
void from_json(const nlohmann::json& j, AblationConfig& v);

void to_json(nlohmann::json& j, const ModelConfig& v);
void from_json(const nlohmann::json& j, ModelConfig& v);

void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);

void to_json(nlohmann::json& j, const ScattererSpec& v);
void from_json(const nlohmann::json& j, ScattererSpec& v);

void to_json(nlohmann::json& j, const SynthClassSpec& v);
void from_json(const nlohmann::json& j, SynthClassSpec& v);

void to_json(nlohmann::json& j, const GeneratorSpec& v);
void from_json(const nlohmann::json& j, GeneratorSpec& v);

void to_json(nlohmann::json& j, NormalizationMode v);
void from_json(const nlohmann::json& j, NormalizationMode& v);

void to_json(nlohmann::json& j, const DatasetManifest& v);
void from_json(const nlohmann::json& j, DatasetManifest& v);

}  // namespace hrrpgnet
