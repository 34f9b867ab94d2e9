#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "fieldgraph/error.hpp"
#include "fieldgraph/raster.hpp"

namespace fieldgraph {

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width_ < kMinSide || height_ < kMinSide) {
    throw Error(ErrorCode::ShapeError, "image must be at least 16x16, got " + std::to_string(width_) +
                                           "x" + std::to_string(height_));
  }
  if (data_.size() != pixel_count() * kChannels) {
    throw Error(ErrorCode::ShapeError, "pixel buffer length does not match width*height*3");
  }
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width_ <= 0 || height_ <= 0 || data_.size() != pixel_count()) {
    throw Error(ErrorCode::ShapeError, "mask buffer length does not match width*height");
  }
  for (auto v : data_) {
    if (v > 1) throw Error(ErrorCode::InvariantError, "mask values must be 0 or 1");
  }
}

BinaryMask BinaryMask::zeros(int width, int height) {
  return BinaryMask(width, height,
                    std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0));
}

namespace codec {

DecodedImage read_any(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  char sig[4] = {};
  in.read(sig, 4);
  if (in.gcount() == 4) {
    if (static_cast<unsigned char>(sig[0]) == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') {
      return read_png(path);
    }
    if ((sig[0] == 'I' && sig[1] == 'I') || (sig[0] == 'M' && sig[1] == 'M')) return read_tiff(path);
  }
  throw Error(ErrorCode::DecodeError, path.string() + ": not a PNG or TIFF file");
}

}  // namespace codec

RasterImage load_image(const std::filesystem::path& path) {
  codec::DecodedImage d = codec::read_any(path);
  if (d.bit_depth != 8) throw Error(ErrorCode::DecodeError, path.string() + ": expected 8-bit samples");
  if (d.channels != 3) {
    throw Error(ErrorCode::ShapeError,
                path.string() + ": expected 3 channels, found " + std::to_string(d.channels));
  }
  std::vector<std::uint8_t> data(d.samples.begin(), d.samples.end());
  return RasterImage(d.width, d.height, std::move(data));
}

BinaryMask load_mask(const std::filesystem::path& path, int expected_width, int expected_height) {
  codec::DecodedImage d = codec::read_any(path);
  if (d.channels != 1) {
    throw Error(ErrorCode::DecodeError, path.string() + ": mask must be single-channel");
  }
  if (d.width != expected_width || d.height != expected_height) {
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + ": mask is " + std::to_string(d.width) + "x" + std::to_string(d.height) +
                    ", image is " + std::to_string(expected_width) + "x" + std::to_string(expected_height));
  }
  std::vector<std::uint8_t> data(d.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = d.samples[i] != 0 ? 1 : 0;
  return BinaryMask(d.width, d.height, std::move(data));
}

void save_image_png(const RasterImage& image, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(image.data().begin(), image.data().end());
  codec::write_png(path, image.width(), image.height(), 3, 8, samples);
}

void save_image_tiff(const RasterImage& image, const std::filesystem::path& path) {
  codec::write_tiff(path, image.width(), image.height(), 3, image.data());
}

void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(mask.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = mask.data()[i] ? 255 : 0;
  codec::write_png(path, mask.width(), mask.height(), 1, 8, samples);
}

namespace {

struct SrgbTable {
  double linear[256];
  SrgbTable() {
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      linear[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
  }
};

const SrgbTable& srgb_table() {
  static const SrgbTable table;
  return table;
}

// D65 reference white
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  constexpr double delta3 = delta * delta * delta;
  return t > delta3 ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

std::array<double, 3> srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const auto& lut = srgb_table();
  const double r = lut.linear[r8], g = lut.linear[g8], b = lut.linear[b8];
  // Same linear-RGB -> XYZ matrix as scikit-image, so results agree with it.
  const double x = 0.412453 * r + 0.357580 * g + 0.180423 * b;
  const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
  const double z = 0.019334 * r + 0.119193 * g + 0.950227 * b;
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage rgb_to_lab(const RasterImage& image) {
  LabImage lab;
  lab.width = image.width();
  lab.height = image.height();
  lab.data.resize(image.pixel_count() * 3);
  const auto src = image.data();
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const auto v = srgb_to_lab(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
    lab.data[3 * i] = v[0];
    lab.data[3 * i + 1] = v[1];
    lab.data[3 * i + 2] = v[2];
  }
  return lab;
}

RasterImage median_filter3x3(const RasterImage& image) {
  const int w = image.width(), h = image.height();
  std::vector<std::uint8_t> out(image.pixel_count() * 3);
  std::array<std::uint8_t, 9> window{};
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      for (int ch = 0; ch < 3; ++ch) {
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            window[n++] = image.at(std::clamp(row + dr, 0, h - 1), std::clamp(col + dc, 0, w - 1), ch);
          }
        }
        std::nth_element(window.begin(), window.begin() + 4, window.end());
        out[(static_cast<std::size_t>(row) * w + col) * 3 + ch] = window[4];
      }
    }
  }
  return RasterImage(w, h, std::move(out));
}

}  // namespace fieldgraph
