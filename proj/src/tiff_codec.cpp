// Baseline TIFF support: uncompressed, 8-bit, chunky samples, strips.
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "fieldgraph/error.hpp"
#include "fieldgraph/raster.hpp"

namespace fieldgraph::codec {
namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
};

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string name) : b_(std::move(bytes)), name_(std::move(name)) {}

  DecodedImage decode() {
    if (b_.size() < 8) fail("truncated header");
    if (b_[0] == 'I' && b_[1] == 'I') {
      little_ = true;
    } else if (b_[0] == 'M' && b_[1] == 'M') {
      little_ = false;
    } else {
      fail("bad byte order mark");
    }
    if (u16(2) != 42) fail("bad magic");
    const std::uint32_t ifd = u32(4);
    const std::uint16_t count = u16(ifd);
    std::map<std::uint16_t, std::vector<std::uint32_t>> tags;
    for (std::uint16_t i = 0; i < count; ++i) {
      const std::size_t e = ifd + 2 + 12 * static_cast<std::size_t>(i);
      const std::uint16_t tag = u16(e);
      const std::uint16_t type = u16(e + 2);
      const std::uint32_t n = u32(e + 4);
      std::size_t size = 0;
      if (type == 3) {
        size = 2;
      } else if (type == 4) {
        size = 4;
      } else if (type == 1) {
        size = 1;
      } else {
        continue;  // rationals, ascii: not needed
      }
      if (n > (1u << 24)) fail("tag count too large");
      const std::size_t base = size * n <= 4 ? e + 8 : u32(e + 8);
      std::vector<std::uint32_t> values(n);
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::size_t at = base + k * size;
        values[k] = size == 2 ? u16(at) : size == 4 ? u32(at) : byte(at);
      }
      tags[tag] = std::move(values);
    }

    auto scalar = [&](std::uint16_t tag, std::uint32_t fallback, bool required) {
      auto it = tags.find(tag);
      if (it == tags.end() || it->second.empty()) {
        if (required) fail("missing tag " + std::to_string(tag));
        return fallback;
      }
      return it->second.front();
    };

    DecodedImage out;
    out.width = static_cast<int>(scalar(kImageWidth, 0, true));
    out.height = static_cast<int>(scalar(kImageLength, 0, true));
    out.channels = static_cast<int>(scalar(kSamplesPerPixel, 1, false));
    out.bit_depth = 8;
    if (scalar(kCompression, 1, false) != 1) fail("compressed TIFF not supported");
    if (scalar(kPlanarConfig, 1, false) != 1) fail("planar TIFF not supported");
    if (auto it = tags.find(kBitsPerSample); it != tags.end()) {
      for (auto bits : it->second) {
        if (bits != 8) fail("only 8-bit samples supported");
      }
    }
    const std::uint32_t photometric = scalar(kPhotometric, 1, false);
    if (out.width <= 0 || out.height <= 0) fail("empty image");

    const auto& offsets = tags[kStripOffsets];
    const auto& counts = tags[kStripByteCounts];
    if (offsets.empty() || offsets.size() != counts.size()) fail("bad strip tables");
    const std::size_t expected = static_cast<std::size_t>(out.width) * out.height * out.channels;
    std::vector<std::uint8_t> pixels;
    pixels.reserve(expected);
    for (std::size_t s = 0; s < offsets.size() && pixels.size() < expected; ++s) {
      const std::size_t len = std::min<std::size_t>(counts[s], expected - pixels.size());
      if (static_cast<std::size_t>(offsets[s]) + len > b_.size()) fail("strip past end of file");
      pixels.insert(pixels.end(), b_.begin() + offsets[s], b_.begin() + offsets[s] + len);
    }
    if (pixels.size() != expected) fail("not enough pixel data");
    out.samples.assign(pixels.begin(), pixels.end());
    if (photometric == 0 && out.channels == 1) {
      for (auto& v : out.samples) v = static_cast<std::uint16_t>(255 - v);  // WhiteIsZero
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::DecodeError, name_ + ": " + why);
  }
  std::uint8_t byte(std::size_t at) const {
    if (at >= b_.size()) fail("offset past end of file");
    return b_[at];
  }
  std::uint16_t u16(std::size_t at) const {
    const std::uint16_t a = byte(at), b = byte(at + 1);
    return little_ ? static_cast<std::uint16_t>(a | (b << 8)) : static_cast<std::uint16_t>((a << 8) | b);
  }
  std::uint32_t u32(std::size_t at) const {
    const std::uint32_t lo = u16(at), hi = u16(at + 2);
    return little_ ? lo | (hi << 16) : (lo << 16) | hi;
  }

  std::vector<std::uint8_t> b_;
  std::string name_;
  bool little_ = true;
};

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

}  // namespace

DecodedImage read_tiff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), path.string()).decode();
}

void write_tiff(const std::filesystem::path& path, int width, int height, int channels,
                std::span<const std::uint8_t> samples) {
  if (channels != 1 && channels != 3) throw Error(ErrorCode::ShapeError, "TIFF writer supports 1 or 3 channels");
  const std::uint32_t data_len = static_cast<std::uint32_t>(width) * height * channels;
  if (samples.size() != data_len) throw Error(ErrorCode::ShapeError, "TIFF sample count mismatch");

  // Layout: header | pixel data | bits-per-sample array | IFD
  std::vector<std::uint8_t> out{'I', 'I'};
  put16(out, 42);
  const std::uint32_t data_offset = 8;
  const std::uint32_t bps_offset = data_offset + data_len;
  const std::uint32_t ifd_offset = bps_offset + 6 + ((bps_offset + 6) & 1);
  put32(out, ifd_offset);
  out.insert(out.end(), samples.begin(), samples.end());
  for (int i = 0; i < 3; ++i) put16(out, 8);
  while (out.size() < ifd_offset) out.push_back(0);

  struct Entry {
    std::uint16_t tag, type;
    std::uint32_t count, value;
  };
  const bool rgb = channels == 3;
  std::vector<Entry> entries{
      {kImageWidth, 4, 1, static_cast<std::uint32_t>(width)},
      {kImageLength, 4, 1, static_cast<std::uint32_t>(height)},
      {kBitsPerSample, 3, static_cast<std::uint32_t>(channels), rgb ? bps_offset : 8u},
      {kCompression, 3, 1, 1},
      {kPhotometric, 3, 1, rgb ? 2u : 1u},
      {kStripOffsets, 4, 1, data_offset},
      {kSamplesPerPixel, 3, 1, static_cast<std::uint32_t>(channels)},
      {kRowsPerStrip, 4, 1, static_cast<std::uint32_t>(height)},
      {kStripByteCounts, 4, 1, data_len},
      {kPlanarConfig, 3, 1, 1},
  };
  put16(out, static_cast<std::uint16_t>(entries.size()));
  for (const auto& e : entries) {
    put16(out, e.tag);
    put16(out, e.type);
    put32(out, e.count);
    if (e.type == 3 && e.count == 1) {
      put16(out, static_cast<std::uint16_t>(e.value));
      put16(out, 0);
    } else {
      put32(out, e.value);
    }
  }
  put32(out, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace fieldgraph::codec
