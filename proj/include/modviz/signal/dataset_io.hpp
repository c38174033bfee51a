#pragma once

#include <string>

#include "modviz/signal/dataset.hpp"

namespace modviz::signal {

// Binary container, little-endian:
//   "RMLB" | u32 version=1 | u32 sample_count | u32 n_x | u32 channels=2
//   per sample: u16 label | i16 snr_db | u8 split | 3 pad bytes | n_x x (f32 I, f32 Q)
// The sidecar `<path>.manifest` (key: value text) carries the label names,
// samples per symbol, generation seed and config echo.

inline constexpr std::uint32_t kDatasetVersion = 1;

std::string dataset_sidecar_path(const std::string& path);

void write_dataset(const Dataset& ds, const std::string& path);

/// Throws IoError when unreadable and FormatError (BadMagic, VersionMismatch,
/// TruncatedPayload, Malformed) on a damaged container. A missing sidecar is
/// tolerated: default label names and 8 samples/symbol are assumed.
Dataset read_dataset(const std::string& path);

/// Container bytes without touching the filesystem.
std::vector<char> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::vector<char> bytes);

}  // namespace modviz::signal
