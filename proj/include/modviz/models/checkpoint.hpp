#pragma once

#include <string>
#include <vector>

#include "modviz/models/models.hpp"

namespace modviz::models {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "MWTS" container: magic, u32 version, u32 manifest length + manifest text,
/// u32 tensor count, then per tensor u32 name length, name, u32 rank, u32
/// dims, float32 data. All little-endian.
std::vector<char> encode_checkpoint(const ModelSnapshot& snap);
ModelSnapshot decode_checkpoint(std::vector<char> bytes);

void write_checkpoint(const ModelSnapshot& snap, const std::string& path);
ModelSnapshot read_checkpoint(const std::string& path);

/// Manifest text as stored in the container.
KeyValues checkpoint_manifest(const ModelSnapshot& snap);

}  // namespace modviz::models
