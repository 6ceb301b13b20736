#include <csetjmp>
#include <cstring>

#include <png.h>

#include "rplift/error.hpp"
#include "rplift/io.hpp"

namespace rplift {

namespace {

constexpr png_uint_32 kMaxSide = 1u << 16;

// libpng reports errors by longjmp; the functions holding setjmp keep every
// object with a destructor in the caller's frame.
struct PngState {
  std::span<const std::uint8_t> input;
  std::size_t cursor = 0;
  std::vector<std::uint8_t>* output = nullptr;
  char message[256] = {};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngState*>(png_get_error_ptr(png));
  std::strncpy(st->message, msg, sizeof(st->message) - 1);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngState*>(png_get_io_ptr(png));
  if (st->input.size() - st->cursor < n) png_error(png, "unexpected end of data");
  std::memcpy(out, st->input.data() + st->cursor, n);
  st->cursor += n;
}

void write_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* st = static_cast<PngState*>(png_get_io_ptr(png));
  st->output->insert(st->output->end(), data, data + n);
}

void flush_bytes(png_structp) {}

bool read_gray(PngState& st, InstanceMask& mask, std::vector<std::uint8_t>& buffer, std::vector<png_bytep>& rows) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &st, read_bytes);
  png_set_user_limits(png, kMaxSide, kMaxSide);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_error(png, "mask must be 8- or 16-bit single-channel grayscale");
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  mask = InstanceMask(static_cast<int>(width), static_cast<int>(height));
  for (png_uint_32 y = 0; y < height; ++y) {
    const std::uint8_t* row = rows[y];
    for (png_uint_32 x = 0; x < width; ++x) {
      mask.at(static_cast<int>(x), static_cast<int>(y)) =
          depth == 16 ? static_cast<InstanceId>(row[2 * x] << 8 | row[2 * x + 1]) : row[x];
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_gray16(PngState& st, const InstanceMask& mask, std::vector<png_bytep>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &st, write_bytes, flush_bytes);
  png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width), static_cast<png_uint_32>(mask.height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_mask_png(const InstanceMask& mask) {
  if (mask.width <= 0 || mask.height <= 0 || mask.labels.size() != static_cast<std::size_t>(mask.width) * mask.height) {
    throw Error(ErrorCode::InvalidArgument, "mask has no pixels or inconsistent size");
  }
  // PNG stores 16-bit samples big-endian.
  std::vector<std::uint8_t> pixels(mask.labels.size() * 2);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    pixels[2 * i] = static_cast<std::uint8_t>(mask.labels[i] >> 8);
    pixels[2 * i + 1] = static_cast<std::uint8_t>(mask.labels[i] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(mask.height));
  for (int y = 0; y < mask.height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * mask.width * 2;
  std::vector<std::uint8_t> out;
  PngState st;
  st.output = &out;
  if (!write_gray16(st, mask, rows)) throw Error(ErrorCode::IoError, std::string("PNG encoding failed: ") + st.message);
  return out;
}

InstanceMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::BadMagic, "not a PNG file");
  PngState st;
  st.input = bytes;
  InstanceMask mask;
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  if (!read_gray(st, mask, buffer, rows)) throw Error(ErrorCode::UnsupportedFormat, st.message);
  return mask;
}

}  // namespace rplift
