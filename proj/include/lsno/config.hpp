#pragma once

#include <map>
#include <string>

#include "lsno/model.hpp"
#include "lsno/serialize.hpp"

namespace lsno {

using KvMap = std::map<std::string, std::string>;

/// Flat key=value lines; '#' starts a comment, blank lines ignored.
KvMap parse_kv_text(const std::string& text);
KvMap parse_kv_file(const std::string& path);

/// Canonical serialization: every key, fixed order, full-precision doubles.
/// Includes the domain, so checkpoints are self-describing.
std::string config_to_text(const ModelConfig& cfg);

/// Build a config for a dataset grid, starting from default_config and
/// applying overrides. Unknown keys raise ParameterError.
ModelConfig config_from_kv(const KvMap& kv, const GridDesc& grid);

/// Rebuild from canonical text (domain keys required).
ModelConfig config_from_text(const std::string& text);

Checkpoint state_to_checkpoint(const ModelState& state);
ModelState state_from_checkpoint(const Checkpoint& ck);

}  // namespace lsno
