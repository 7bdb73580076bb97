#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   "LFMI" | u32 version | u64 n | n bytes of UTF-8 JSON metadata
//   | u32 tensor count | per tensor: u64 count, count x f32
//   | u32 CRC32 of every preceding byte
//
// Tensors in order: user embeddings, item embeddings, then W_l, b_l for
// each NCF layer, all row-major.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lfm/dataset.hpp"
#include "lfm/params.hpp"
#include "lfm/train.hpp"

namespace lfm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  Hyperparams hp;
  std::shared_ptr<const IdMaps> ids;
  ModelParams params;
  TrainingLog training;
  /// Resolved run configuration, stored verbatim.
  nlohmann::json run_config = nlohmann::json::object();
};

nlohmann::json to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NcfArchitecture& arch);
NcfArchitecture architecture_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const Checkpoint& cp);
/// Throws Error(kFormat) on bad magic, unsupported version, truncation or
/// checksum mismatch.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lfm
