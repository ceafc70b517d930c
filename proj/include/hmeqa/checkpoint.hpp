#pragma once

#include <string>

#include "hmeqa/config.hpp"
#include "hmeqa/parameters.hpp"

namespace hmeqa {

/// File layout: "HMEQCKPT", uint64 LE manifest length, JSON manifest
/// {format_version, element_type, config, params:[{name, shape, offset, bytes}]},
/// then the little-endian scalar blob.
template <typename T>
void save_checkpoint(const ParameterSet<T>& params, const ModelConfig& config, const std::string& path);

/// Reads only the manifest's config.
ModelConfig read_checkpoint_config(const std::string& path);

/// Loads values into an existing set; names, shapes and element type must
/// match the manifest exactly.
template <typename T>
void load_checkpoint(const std::string& path, ParameterSet<T>& params);

}  // namespace hmeqa
