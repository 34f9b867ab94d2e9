#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fieldgraph {

/// 8-bit RGB field image, row-major, interleaved channels.
class RasterImage {
 public:
  static constexpr int kMinSide = 16;
  static constexpr int kChannels = 3;

  /// Throws ShapeError when either side is below kMinSide or the buffer
  /// length disagrees with width * height * 3.
  RasterImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> mutable_data() noexcept { return data_; }

  std::uint8_t at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * kChannels + channel];
  }
  std::array<std::uint8_t, 3> pixel(std::size_t index) const {
    const std::size_t o = index * kChannels;
    return {data_[o], data_[o + 1], data_[o + 2]};
  }

  bool operator==(const RasterImage&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel stress annotation; every value is 0 or 1.
class BinaryMask {
 public:
  BinaryMask(int width, int height, std::vector<std::uint8_t> data);
  static BinaryMask zeros(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::uint8_t at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  void set(int row, int col, bool value) {
    data_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

/// CIE L*a*b* image (D65), three doubles per pixel.
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::array<double, 3> pixel(std::size_t index) const {
    return {data[3 * index], data[3 * index + 1], data[3 * index + 2]};
  }
};

/// Decodes an 8-bit RGB PNG or uncompressed TIFF.
RasterImage load_image(const std::filesystem::path& path);

/// Decodes a single-channel PNG or TIFF and binarizes it (nonzero -> 1).
BinaryMask load_mask(const std::filesystem::path& path, int expected_width, int expected_height);

void save_image_png(const RasterImage& image, const std::filesystem::path& path);
void save_image_tiff(const RasterImage& image, const std::filesystem::path& path);
/// Masks are written as 0/255 grayscale.
void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

std::array<double, 3> srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);
LabImage rgb_to_lab(const RasterImage& image);

/// Per-channel 3x3 median with edge replication.
RasterImage median_filter3x3(const RasterImage& image);

// Low-level codecs shared by the label-map and overlay writers.
namespace codec {

struct DecodedImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // row-major, interleaved
};

DecodedImage read_png(const std::filesystem::path& path);
DecodedImage read_tiff(const std::filesystem::path& path);
/// Dispatches on the file signature.
DecodedImage read_any(const std::filesystem::path& path);

/// bit_depth must be 8 or 16; samples hold one value per channel per pixel.
void write_png(const std::filesystem::path& path, int width, int height, int channels,
               int bit_depth, std::span<const std::uint16_t> samples);
void write_tiff(const std::filesystem::path& path, int width, int height, int channels,
                std::span<const std::uint8_t> samples);

}  // namespace codec

}  // namespace fieldgraph
