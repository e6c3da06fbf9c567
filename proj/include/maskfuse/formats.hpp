#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "maskfuse/scene.hpp"

// Binary interchange formats.
//
//   label map     16-bit binary PGM: "P5", width, height, maxval 65535,
//                 big-endian samples, row-major.
//   pointmap      "PMAP1", u32 width, u32 height, H*W*3 f32 points,
//                 H*W f32 confidences. Little-endian.
//   matches       "CORR1", u32 a, u32 b, u32 count, then count records of
//                 (u16 xa, u16 ya, u16 xb, u16 yb, f32 conf). Little-endian.
namespace maskfuse {

std::string encode_labelmap(const LabelMap& labels);
LabelMap decode_labelmap(std::string_view bytes);
LabelMap read_labelmap(const std::filesystem::path& path);
void write_labelmap(const LabelMap& labels, const std::filesystem::path& path);

std::string encode_pointmap(const PointMap& pointmap);
PointMap decode_pointmap(std::string_view bytes);
PointMap read_pointmap(const std::filesystem::path& path);
void write_pointmap(const PointMap& pointmap, const std::filesystem::path& path);

std::string encode_correspondences(const CorrespondenceSet& set);
CorrespondenceSet decode_correspondences(std::string_view bytes);
CorrespondenceSet read_correspondences(const std::filesystem::path& path);
void write_correspondences(const CorrespondenceSet& set, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace maskfuse
