#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tpgan {

/// Interleaved 8-bit image.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Reads gray, gray+alpha, RGB or RGBA PNG (any bit depth); alpha is dropped
/// and 16-bit samples are reduced to 8 bits.
Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

/// Converts to the requested channel count (luminance for RGB -> gray,
/// replication for gray -> RGB).
Image8 convert_channels(const Image8& image, int channels);

/// Bilinear resampling with half-pixel centers and edge clamping, on float
/// planes in HWC order.
std::vector<float> resize_bilinear(const std::vector<float>& src, int src_h, int src_w, int channels, int dst_h,
                                   int dst_w);

/// 8-bit -> [-1, 1] linearly (0 -> -1, 255 -> 1).
std::vector<float> normalize_pixels(const Image8& image);
/// [-1, 1] -> 8-bit with rounding and clamping.
Image8 denormalize_pixels(const float* values, int height, int width, int channels);

}  // namespace tpgan
