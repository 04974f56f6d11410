#pragma once

#include <string>

#include "s2wat/param_store.hpp"

namespace s2wat {

// Binary weights container, all integers unsigned 32-bit little-endian:
//   magic "S2WT" | version | tensor count
//   per tensor: name length | UTF-8 name | rank | extents... | float32 LE data
inline constexpr char kWeightsMagic[4] = {'S', '2', 'W', 'T'};
inline constexpr std::uint32_t kWeightsVersion = 1;

/// Serializes the store in iteration order. Atomic (temp file + rename).
void save_weights(const ParameterStoreT<float>& store, const std::string& path);

/// Parses a weights file into a fresh store. Structured errors on wrong
/// magic, unknown version or truncation; never returns partial state.
ParameterStoreT<float> load_weights(const std::string& path);

/// Copies loaded values into an existing store. Every destination parameter
/// must be present with matching shape and no extras may remain.
void assign_weights(ParameterStoreT<float>& dst, const ParameterStoreT<float>& loaded);

}  // namespace s2wat
