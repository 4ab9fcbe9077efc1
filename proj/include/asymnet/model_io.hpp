#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "asymnet/network.hpp"

namespace asymnet {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Model file layout (all integers u32 and all reals f64, little-endian):
//
//   "ASYM"  version  layer_count  input_rank  input_extents...
//   per layer:
//     kind u8, activation u8, padding u8, schedule u8 (0xFF = no profile)
//     weight_rank, weight_extents...
//     profile_length, profile values...
//     weights (row-major), biases
//
// Parameter-free layers write weight_rank = 0 and profile_length = 0.

std::string serialize_model(const Network& net);
Network deserialize_model(const std::string& bytes);

void save_model(const Network& net, const std::filesystem::path& path);
/// Throws FormatError on bad magic, unsupported version, or truncation.
Network load_model(const std::filesystem::path& path);

}  // namespace asymnet
