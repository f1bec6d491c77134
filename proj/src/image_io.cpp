#include "tpgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "tpgan/error.hpp"

namespace tpgan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(Errc::Io, "cannot open " + path.string());
  return f;
}

}  // namespace

Image8 read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::Io, "libpng initialisation failed");
  }
  Image8 image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::Io, "malformed PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);
  rows.resize(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) fail(Errc::InvalidArgument, "PNG output needs 1 or 3 channels");
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::Io, "libpng initialisation failed");
  }
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::Io, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 convert_channels(const Image8& image, int channels) {
  if (image.channels == channels) return image;
  Image8 out{image.width, image.height, channels, {}};
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  out.pixels.resize(n * channels);
  for (std::size_t p = 0; p < n; ++p) {
    const std::uint8_t* src = image.pixels.data() + p * image.channels;
    if (channels == 1) {
      double sum = 0.0;
      if (image.channels >= 3) {
        sum = 0.299 * src[0] + 0.587 * src[1] + 0.114 * src[2];
      } else {
        sum = src[0];
      }
      out.pixels[p] = static_cast<std::uint8_t>(std::lround(std::clamp(sum, 0.0, 255.0)));
    } else {
      for (int c = 0; c < channels; ++c) out.pixels[p * channels + c] = src[std::min(c, image.channels - 1)];
    }
  }
  return out;
}

std::vector<float> resize_bilinear(const std::vector<float>& src, int src_h, int src_w, int channels, int dst_h,
                                   int dst_w) {
  if (src_h == dst_h && src_w == dst_w) return src;
  std::vector<float> out(static_cast<std::size_t>(dst_h) * dst_w * channels);
  const double sy = static_cast<double>(src_h) / dst_h, sx = static_cast<double>(src_w) / dst_w;
  for (int y = 0; y < dst_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        auto at = [&](int yy, int xx) { return static_cast<double>(src[(static_cast<std::size_t>(yy) * src_w + xx) * channels + c]); };
        const double top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
        const double bottom = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
        out[(static_cast<std::size_t>(y) * dst_w + x) * channels + c] = static_cast<float>(top * (1 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

std::vector<float> normalize_pixels(const Image8& image) {
  std::vector<float> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(image.pixels[i] / 127.5 - 1.0);
  return out;
}

Image8 denormalize_pixels(const float* values, int height, int width, int channels) {
  Image8 out{width, height, channels, {}};
  out.pixels.resize(static_cast<std::size_t>(width) * height * channels);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double v = std::clamp((static_cast<double>(values[i]) + 1.0) * 127.5, 0.0, 255.0);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

}  // namespace tpgan
