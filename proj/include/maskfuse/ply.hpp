#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "maskfuse/pipeline.hpp"

namespace maskfuse {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed 32-entry palette, indexed by class id mod 32.
Rgb class_color(std::uint32_t class_id);

// Binary little-endian PLY with vertex properties
//   float x, y, z; uchar red, green, blue; ushort class_id; ushort source_image.
std::string encode_ply(const std::vector<LabeledPoint>& points);
void write_ply(const std::vector<LabeledPoint>& points, const std::filesystem::path& path);

// Reads files produced by write_ply. Confidence is not stored and comes back as 0.
std::vector<LabeledPoint> decode_ply(std::string_view bytes);
std::vector<LabeledPoint> read_ply(const std::filesystem::path& path);

}  // namespace maskfuse
