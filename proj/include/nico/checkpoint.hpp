#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nico/nn.hpp"
#include "nico/policy.hpp"

namespace nico {

// Binary checkpoint layout (all integers and reals little-endian):
//
//   bytes 0..7   magic "NICOCKPT"
//   u32          format_version
//   u32          header length L
//   L bytes      UTF-8 JSON header: {format_version, model_config, stage, epoch, extra}
//   u32          block count B
//   B times:     u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct NamedBlock {
  std::string name;
  nn::Matrix values;
  bool operator==(const NamedBlock&) const = default;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointFormatVersion;
  PolicyConfig model;
  std::string stage;  // "IL", "RL" or "init"
  std::uint64_t epoch = 0;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<NamedBlock> blocks;

  const NamedBlock* find(const std::string& name) const;
};

nlohmann::json to_json(const PolicyConfig& config);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameter values under their own names; optimizer moments under
// "adam.m/<name>" and "adam.v/<name>" when requested.
void append_policy_blocks(Checkpoint& checkpoint, const Policy& policy,
                          const std::string& prefix = "", bool with_moments = false);

// Copies blocks into a policy whose config must equal the checkpoint's.
void restore_policy(const Checkpoint& checkpoint, Policy& policy, const std::string& prefix = "",
                    bool with_moments = false);

Policy policy_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace nico
