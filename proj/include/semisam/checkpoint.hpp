#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisam/network.hpp"

namespace semisam {

// Layout: "SSAMCKPT" | u32 format version | u64 header length | JSON header |
// float32 little-endian tensors in the order of header["tensors"].

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nn::BackboneConfig backbone;
  std::int64_t t = 0;
  nlohmann::json config;  // resolved experiment config, may be null
  std::string code_version;
  std::map<std::string, std::string> rng;  // stream name -> engine state
  std::vector<float> student;
  std::vector<float> teacher;
  std::vector<float> momentum;
};

/// Written to a temporary sibling, then renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semisam
