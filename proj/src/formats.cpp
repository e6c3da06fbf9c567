#include "maskfuse/formats.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "maskfuse/error.hpp"

namespace maskfuse {
namespace {

static_assert(std::numeric_limits<float>::is_iec559, "float32 interchange requires IEEE 754");

class ByteWriter {
 public:
  void raw(std::string_view s) { out_.append(s); }
  void u16le(std::uint16_t v) {
    out_.push_back(static_cast<char>(v & 0xff));
    out_.push_back(static_cast<char>(v >> 8));
  }
  void u32le(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out_.push_back(static_cast<char>((v >> shift) & 0xff));
  }
  void f32le(float v) { u32le(std::bit_cast<std::uint32_t>(v)); }
  void u16be(std::uint16_t v) {
    out_.push_back(static_cast<char>(v >> 8));
    out_.push_back(static_cast<char>(v & 0xff));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void expect_magic(std::string_view magic) {
    if (bytes_.substr(0, magic.size()) != magic) throw Error(what_ + ": bad magic, expected " + std::string(magic));
    pos_ = magic.size();
  }
  std::uint8_t byte() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16le() {
    need(2);
    const auto lo = static_cast<std::uint8_t>(bytes_[pos_]);
    const auto hi = static_cast<std::uint8_t>(bytes_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::uint16_t u16be() {
    need(2);
    const auto hi = static_cast<std::uint8_t>(bytes_[pos_]);
    const auto lo = static_cast<std::uint8_t>(bytes_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32le() { return std::bit_cast<float>(u32le()); }

  // Needs `count` more bytes; checked up front so huge headers fail fast.
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw Error(what_ + ": truncated payload");
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw Error(what_ + ": trailing bytes after payload");
  }

  // PGM header token: skips whitespace and '#' comments.
  std::string token() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw Error(what_ + ": truncated header");
    return std::string(bytes_.substr(start, pos_ - start));
  }
  std::size_t position() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

int parse_dimension(const std::string& token, const std::string& what) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(token, &used);
  } catch (const std::exception&) {
    throw Error(what + ": invalid number '" + token + "'");
  }
  if (used != token.size() || value <= 0 || value > 65535) throw Error(what + ": invalid dimension '" + token + "'");
  return static_cast<int>(value);
}

std::size_t checked_area(std::uint32_t width, std::uint32_t height, const std::string& what) {
  if (width == 0 || height == 0 || width > 65535 || height > 65535) throw Error(what + ": invalid dimensions");
  return static_cast<std::size_t>(width) * height;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string encode_labelmap(const LabelMap& labels) {
  ByteWriter w;
  w.raw("P5\n" + std::to_string(labels.width()) + " " + std::to_string(labels.height()) + "\n65535\n");
  for (LocalId v : labels.labels()) w.u16be(v);
  return w.take();
}

LabelMap decode_labelmap(std::string_view bytes) {
  const std::string what = "label map";
  ByteReader r(bytes, what);
  if (r.token() != "P5") throw Error(what + ": bad magic, expected P5");
  const int width = parse_dimension(r.token(), what);
  const int height = parse_dimension(r.token(), what);
  const std::string maxval = r.token();
  if (maxval == "255") throw Error(what + ": 8-bit label maps unsupported");
  if (maxval != "65535") throw Error(what + ": maxval must be 65535, got " + maxval);
  // Exactly one whitespace byte separates the header from the samples.
  r.need(1);
  r.skip(1);
  const std::size_t area = static_cast<std::size_t>(width) * height;
  r.need(area * 2);
  std::vector<LocalId> values(area);
  for (auto& v : values) v = r.u16be();
  r.expect_end();
  return LabelMap(width, height, std::move(values));
}

LabelMap read_labelmap(const std::filesystem::path& path) {
  try {
    return decode_labelmap(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_labelmap(const LabelMap& labels, const std::filesystem::path& path) {
  write_file(path, encode_labelmap(labels));
}

std::string encode_pointmap(const PointMap& pm) {
  ByteWriter w;
  w.raw("PMAP1");
  w.u32le(static_cast<std::uint32_t>(pm.width));
  w.u32le(static_cast<std::uint32_t>(pm.height));
  for (const auto& p : pm.points) {
    w.f32le(p.x());
    w.f32le(p.y());
    w.f32le(p.z());
  }
  for (float c : pm.confidence) w.f32le(c);
  return w.take();
}

PointMap decode_pointmap(std::string_view bytes) {
  const std::string what = "pointmap";
  ByteReader r(bytes, what);
  r.expect_magic("PMAP1");
  const std::uint32_t width = r.u32le();
  const std::uint32_t height = r.u32le();
  const std::size_t area = checked_area(width, height, what);
  r.need(area * 16);
  PointMap pm(static_cast<int>(width), static_cast<int>(height));
  for (auto& p : pm.points) {
    p.x() = r.f32le();
    p.y() = r.f32le();
    p.z() = r.f32le();
  }
  for (auto& c : pm.confidence) {
    c = r.f32le();
    if (!(c >= 0.0f && c <= 1.0f)) throw Error(what + ": confidence outside [0,1]");
  }
  r.expect_end();
  return pm;
}

PointMap read_pointmap(const std::filesystem::path& path) {
  try {
    return decode_pointmap(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_pointmap(const PointMap& pointmap, const std::filesystem::path& path) {
  write_file(path, encode_pointmap(pointmap));
}

std::string encode_correspondences(const CorrespondenceSet& set) {
  ByteWriter w;
  w.raw("CORR1");
  w.u32le(set.image_a);
  w.u32le(set.image_b);
  w.u32le(static_cast<std::uint32_t>(set.matches.size()));
  for (const auto& m : set.matches) {
    w.u16le(m.a.x);
    w.u16le(m.a.y);
    w.u16le(m.b.x);
    w.u16le(m.b.y);
    w.f32le(m.confidence);
  }
  return w.take();
}

CorrespondenceSet decode_correspondences(std::string_view bytes) {
  const std::string what = "correspondences";
  ByteReader r(bytes, what);
  r.expect_magic("CORR1");
  CorrespondenceSet set;
  set.image_a = r.u32le();
  set.image_b = r.u32le();
  const std::uint32_t count = r.u32le();
  r.need(static_cast<std::size_t>(count) * 12);
  set.matches.resize(count);
  for (auto& m : set.matches) {
    m.a.x = r.u16le();
    m.a.y = r.u16le();
    m.b.x = r.u16le();
    m.b.y = r.u16le();
    m.confidence = r.f32le();
  }
  r.expect_end();
  return set;
}

CorrespondenceSet read_correspondences(const std::filesystem::path& path) {
  try {
    return decode_correspondences(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_correspondences(const CorrespondenceSet& set, const std::filesystem::path& path) {
  write_file(path, encode_correspondences(set));
}

}  // namespace maskfuse
