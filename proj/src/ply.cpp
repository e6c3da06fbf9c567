#include "maskfuse/ply.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"

namespace maskfuse {
namespace {

constexpr std::array<Rgb, 32> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},   {245, 130, 48},  {145, 30, 180},
    {70, 240, 240},  {240, 50, 230},  {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
    {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195}, {128, 128, 0},   {255, 215, 180},
    {0, 0, 128},     {128, 128, 128}, {255, 255, 255}, {0, 0, 0},       {100, 149, 237}, {255, 99, 71},
    {46, 139, 87},   {218, 165, 32},  {147, 112, 219}, {64, 224, 208},  {199, 21, 133},  {107, 142, 35},
    {205, 92, 92},   {72, 61, 139},
}};

constexpr std::string_view kHeaderTail =
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "property uchar red\n"
    "property uchar green\n"
    "property uchar blue\n"
    "property ushort class_id\n"
    "property ushort source_image\n"
    "end_header\n";

constexpr std::size_t kRecordSize = 3 * 4 + 3 + 2 + 2;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_f32(std::string& out, float f) {
  const auto v = std::bit_cast<std::uint32_t>(f);
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace

Rgb class_color(std::uint32_t class_id) { return kPalette[class_id % kPalette.size()]; }

std::string encode_ply(const std::vector<LabeledPoint>& points) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(points.size()) + "\n";
  out.append(kHeaderTail);
  out.reserve(out.size() + points.size() * kRecordSize);
  for (const auto& p : points) {
    put_f32(out, p.point.x());
    put_f32(out, p.point.y());
    put_f32(out, p.point.z());
    for (std::uint8_t c : class_color(p.class_id)) out.push_back(static_cast<char>(c));
    put_u16(out, p.class_id);
    put_u16(out, p.source_image);
  }
  return out;
}

void write_ply(const std::vector<LabeledPoint>& points, const std::filesystem::path& path) {
  write_file(path, encode_ply(points));
}

std::vector<LabeledPoint> decode_ply(std::string_view bytes) {
  const std::string_view prefix = "ply\nformat binary_little_endian 1.0\nelement vertex ";
  if (bytes.substr(0, prefix.size()) != prefix) throw Error("ply: unsupported header");
  std::size_t pos = prefix.size();
  const std::size_t eol = bytes.find('\n', pos);
  if (eol == std::string_view::npos) throw Error("ply: truncated header");
  std::size_t count = 0;
  try {
    count = std::stoul(std::string(bytes.substr(pos, eol - pos)));
  } catch (const std::exception&) {
    throw Error("ply: invalid vertex count");
  }
  pos = eol + 1;
  if (bytes.substr(pos, kHeaderTail.size()) != kHeaderTail) throw Error("ply: unexpected vertex layout");
  pos += kHeaderTail.size();
  if (bytes.size() - pos != count * kRecordSize) throw Error("ply: payload size mismatch");

  std::vector<LabeledPoint> points(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& lp : points) {
    lp.point.x() = std::bit_cast<float>(get_u32(p));
    lp.point.y() = std::bit_cast<float>(get_u32(p + 4));
    lp.point.z() = std::bit_cast<float>(get_u32(p + 8));
    lp.class_id = static_cast<std::uint16_t>(p[15] | (p[16] << 8));
    lp.source_image = static_cast<std::uint16_t>(p[17] | (p[18] << 8));
    p += kRecordSize;
  }
  return points;
}

std::vector<LabeledPoint> read_ply(const std::filesystem::path& path) { return decode_ply(read_file(path)); }

}  // namespace maskfuse
