#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "fieldgraph/error.hpp"
#include "fieldgraph/raster.hpp"

namespace fieldgraph::codec {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  return f;
}

// libpng reports errors through longjmp; everything touched after setjmp
// lives behind this heap object so no automatic storage is clobbered.
struct ReadState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  DecodedImage out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raw;
  std::string message;

  ~ReadState() {
    if (png != nullptr) png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
  }
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<ReadState*>(png_get_error_ptr(png));
  if (state != nullptr) state->message = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

bool decode(std::FILE* fp, ReadState* s) {
  s->png = png_create_read_struct(PNG_LIBPNG_VER_STRING, s, on_png_error, on_png_warning);
  if (s->png == nullptr) return false;
  s->info = png_create_info_struct(s->png);
  if (s->info == nullptr) return false;
  if (setjmp(png_jmpbuf(s->png))) return false;

  png_init_io(s->png, fp);
  png_read_info(s->png, s->info);
  const int color_type = png_get_color_type(s->png, s->info);
  const int bit_depth = png_get_bit_depth(s->png, s->info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(s->png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(s->png);
  png_read_update_info(s->png, s->info);

  s->out.width = static_cast<int>(png_get_image_width(s->png, s->info));
  s->out.height = static_cast<int>(png_get_image_height(s->png, s->info));
  s->out.channels = png_get_channels(s->png, s->info);
  s->out.bit_depth = png_get_bit_depth(s->png, s->info);
  const std::size_t rowbytes = png_get_rowbytes(s->png, s->info);
  s->raw.resize(rowbytes * static_cast<std::size_t>(s->out.height));
  s->rows.resize(static_cast<std::size_t>(s->out.height));
  for (int y = 0; y < s->out.height; ++y) s->rows[y] = s->raw.data() + rowbytes * y;
  png_read_image(s->png, s->rows.data());
  png_read_end(s->png, nullptr);
  return true;
}

struct WriteState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> rows;
  std::string message;

  ~WriteState() {
    if (png != nullptr) png_destroy_write_struct(&png, info != nullptr ? &info : nullptr);
  }
};

bool encode(std::FILE* fp, WriteState* s, int width, int height, int color_type, int bit_depth) {
  s->png = png_create_write_struct(PNG_LIBPNG_VER_STRING, s, on_png_error, on_png_warning);
  if (s->png == nullptr) return false;
  s->info = png_create_info_struct(s->png);
  if (s->info == nullptr) return false;
  if (setjmp(png_jmpbuf(s->png))) return false;

  png_init_io(s->png, fp);
  png_set_IHDR(s->png, s->info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(s->png, s->info);
  png_write_image(s->png, s->rows.data());
  png_write_end(s->png, nullptr);
  return true;
}

}  // namespace

DecodedImage read_png(const std::filesystem::path& path) {
  FilePtr fp = open_file(path, "rb");
  if (!fp) throw Error(ErrorCode::FileNotFound, path.string());
  auto state = std::make_unique<ReadState>();
  if (!decode(fp.get(), state.get())) {
    throw Error(ErrorCode::DecodeError, path.string() + ": " + state->message);
  }
  DecodedImage& out = state->out;
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>((state->raw[2 * i] << 8) | state->raw[2 * i + 1]);
    }
  } else {
    // Rows are tightly packed at 8 bits, so the buffer maps one-to-one.
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = state->raw[i];
  }
  return std::move(state->out);
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               int bit_depth, std::span<const std::uint16_t> samples) {
  int color_type = 0;
  switch (channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw Error(ErrorCode::ShapeError, "unsupported PNG channel count");
  }
  if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorCode::ShapeError, "PNG bit depth must be 8 or 16");
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  if (samples.size() != n) throw Error(ErrorCode::ShapeError, "PNG sample count mismatch");

  auto state = std::make_unique<WriteState>();
  const std::size_t bytes = bit_depth / 8;
  state->raw.resize(n * bytes);
  for (std::size_t i = 0; i < n; ++i) {
    if (bytes == 2) {
      state->raw[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
      state->raw[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xff);
    } else {
      state->raw[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes;
  state->rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) state->rows[y] = state->raw.data() + rowbytes * y;

  FilePtr fp = open_file(path, "wb");
  if (!fp) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  if (!encode(fp.get(), state.get(), width, height, color_type, bit_depth)) {
    throw Error(ErrorCode::IoError, path.string() + ": " + state->message);
  }
  if (std::fflush(fp.get()) != 0) throw Error(ErrorCode::IoError, "flush failed: " + path.string());
}

}  // namespace fieldgraph::codec
