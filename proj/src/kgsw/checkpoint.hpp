#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kgsw/nn.hpp"

namespace kgsw {

inline constexpr const char* kCheckpointFormat = "kgsw.checkpoint";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json state_to_json(const ModelState& state);
ModelState state_from_json(const nlohmann::json& j);

nlohmann::json adam_to_json(const AdamState& adam, const ModelState& state);
AdamState adam_from_json(const nlohmann::json& j, const ModelState& state);

struct Checkpoint {
  std::string id;
  std::string parent;
  nlohmann::json meta = nlohmann::json::object();
  ModelState state;
  std::optional<AdamState> adam;
  std::string rng;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Reads a whole JSON file; parse failures name the file.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace kgsw
