#include "histoseg/core/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "histoseg/core/error.hpp"

namespace histoseg::core {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

PngImage8 read_png8(const std::string& path, int want_channels) {
  if (want_channels != 1 && want_channels != 3)
    fail(Error::Kind::argument, "read_png8: want_channels must be 1 or 3");
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(Error::Kind::io, "cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Error::Kind::io, "libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Error::Kind::io, "libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Error::Kind::io, "corrupt or unsupported PNG: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);

  if (want_channels == 3) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
  } else {
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_destroy_read_struct(&png, &info, nullptr);
      fail(Error::Kind::io, "label map must be single-channel grayscale: " + path);
    }
    png_set_strip_alpha(png);
  }
  (void)png_set_interlace_handling(png);
  png_read_update_info(png, info);

  PngImage8 out;
  out.w = static_cast<int>(w);
  out.h = static_cast<int>(h);
  out.channels = want_channels;
  const size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<size_t>(w) * want_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Error::Kind::io, "unexpected row layout after decode transforms: " + path);
  }
  out.bytes.resize(static_cast<size_t>(h) * rowbytes);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.bytes.data() + static_cast<size_t>(y) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png8(const std::string& path, int w, int h, int channels,
                const std::vector<uint8_t>& bytes) {
  if (channels != 1 && channels != 3) fail(Error::Kind::argument, "write_png8: channels must be 1 or 3");
  if (bytes.size() != static_cast<size_t>(w) * h * channels)
    fail(Error::Kind::shape, "write_png8: byte count does not match dimensions");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(Error::Kind::io, "cannot write image: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Error::Kind::io, "libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Error::Kind::io, "libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Error::Kind::io, "PNG encode failure: " + path);
  }

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace histoseg::core
