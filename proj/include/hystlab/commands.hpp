#pragma once

#include <filesystem>
#include <utility>

#include <nlohmann/json.hpp>

#include "hystlab/harness.hpp"

// One function per CLI command. Options are a JSON object keyed by flag name
// (dashes become underscores); each returns a short JSON summary.
namespace hystlab::commands {

nlohmann::json generate(const nlohmann::json& options);
nlohmann::json harmonize(const nlohmann::json& options);
nlohmann::json train(const nlohmann::json& options);
nlohmann::json evaluate(const nlohmann::json& options);
nlohmann::json grid(const nlohmann::json& options);
nlohmann::json transfer(const nlohmann::json& options);
nlohmann::json report(const nlohmann::json& options);

// A directory written by `harmonize`.
struct HarmonizedData {
  harness::SampleSet samples;
  core::DataSplit split;
  std::vector<std::string> cycle_ids;  // per sample
  nlohmann::json meta;                 // harmonize.json
};

HarmonizedData read_harmonized(const std::filesystem::path& dir);

// Rebuilds scaler and reducer around a loaded model.
harness::Pipeline pipeline_from(const models::LoadedModel& loaded);

}  // namespace hystlab::commands
