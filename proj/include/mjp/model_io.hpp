#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "mjp/model.hpp"

namespace mjp {

// A model file bundles the rate family, modulation, and optional drift /
// set declarations. See README for the schema.
struct ModelFile {
  JumpModel model;
  std::optional<DriftFunction> drift;
  SetSequence sets = SetSequence::prefix();
  std::string digest;       // content hash of the file bytes
  nlohmann::json document;  // parsed source
};

ModelFile parse_model(const nlohmann::json& doc, const std::string& digest = "");
ModelFile load_model_file(const std::string& path);

// Drift built from a "drift"-shaped JSON object; kind chosen by caller.
DriftFunction parse_drift(const nlohmann::json& spec, DriftFunction::Kind kind);

Modulation parse_modulation(const nlohmann::json& spec);

// FNV-1a 64 over the raw bytes, hex-encoded.
std::string content_digest(const std::string& bytes);

}  // namespace mjp
