#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lsno/data.hpp"
#include "lsno/nn.hpp"

namespace lsno {

/// CRC-32 (IEEE 802.3, reflected 0xEDB88320).
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

/// FNV-1a 64-bit content hash of a file, hex-encoded.
std::string file_digest(const std::string& path);
/// Same hash over an in-memory string.
std::string text_digest(const std::string& text);

// ---- LSNO dataset container -------------------------------------------------
// Little-endian throughout:
//   magic "LSNO" | u16 version=1 | u32 count, nx, nt, channels
//   u32 name_len | generator name (UTF-8) | u64 seed
//   u32 param_count | f64 params[]          (params[0..3] = x0, x1, t0, t1)
//   f64 payload: per sample, the target trajectory, row-major
//                (space, then time, then channel)
//   u32 crc32 of the payload bytes
// Init snapshots are not stored; they are the t=0 / t=1 slices of the target.

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Raw-array ingestion. The descriptor is key=value text:
///   shape    = comma-separated extents, e.g. 1000,100,2
///   order    = names of those axes from {count,space,time,channel},
///              e.g. count,time,channel (missing axes have extent 1)
///   dtype    = f64 | f32
///   endian   = little | big
///   x0,x1,t0,t1 = optional extents (default 0,1 per axis; x0=x1=0 when
///              there is no space axis)
Dataset import_external(const std::string& path, const std::string& descriptor_path);

// ---- LSCK checkpoint container ----------------------------------------------
//   magic "LSCK" | u16 version=1 | u32 config_len | config text (key=value)
//   u32 block_count | per block: u32 name_len, name, u32 rank, u32 dims[],
//                     f64 data
//   u32 crc32 of all block data bytes, in order

struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> blocks;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lsno
