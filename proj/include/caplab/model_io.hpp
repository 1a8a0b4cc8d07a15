#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "caplab/mlp.hpp"

namespace caplab {

inline constexpr int kModelFormatVersion = 1;

// {version, dims, layers: [{rows, cols, activation, weights, bias}]}
nlohmann::json model_to_json(const MlpModel& model);
// Throws ParseError (source names the document) on any schema violation.
MlpModel model_from_json(const nlohmann::json& doc, const std::string& source = "model");

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace caplab
