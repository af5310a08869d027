#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgsw/dataset.hpp"
#include "kgsw/graphsw.hpp"

namespace kgsw {

inline constexpr const char* kRunConfigSchema = "kgsw.run_config/1";

// Either a canonical dataset directory or in-memory synthetic data.
struct DataSpec {
  std::optional<std::filesystem::path> path;
  std::optional<SynthConfig> synth;
};

struct RunConfig {
  ModelConfig model;
  DataSpec data;
  StagePlan plan;
  std::vector<std::size_t> topk = {25, 50};
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;

  // Exactly one data source; a dataset path must exist.
  void validate() const;
};

nlohmann::json to_json(const KgcnConfig& c);
nlohmann::json to_json(const RippleConfig& c);
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const StagePlan& p);
nlohmann::json to_json(const RunConfig& c);

// Missing keys keep the defaults already in `out`; unknown keys are errors.
void merge_json(const nlohmann::json& j, KgcnConfig& out);
void merge_json(const nlohmann::json& j, RippleConfig& out);
void merge_json(const nlohmann::json& j, SynthConfig& out);
void merge_json(const nlohmann::json& j, StagePlan& out);
void merge_json(const nlohmann::json& j, RunConfig& out);

RunConfig run_config_from_json(const nlohmann::json& j);

// Output root for runs without an explicit output_dir: $KGSW_OUTPUT_ROOT or
// "kgsw-runs". Relative output dirs are placed under $KGSW_OUTPUT_ROOT when
// it is set and left relative to the working directory otherwise.
std::filesystem::path output_root();
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir,
                                         const std::string& fallback_name);

}  // namespace kgsw
