#pragma once

#include <filesystem>
#include <vector>

namespace cueplan {

/// Dense row-major raster, values in [0,1]. channels is 1 (grayscale) or 3.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> pixels;  // index: (y * width + x) * channels + c

  Image() = default;
  Image(int w, int h, int ch = 1, double fill = 0.0)
      : width(w), height(h), channels(ch),
        pixels(size_t(w) * size_t(h) * size_t(ch), fill) {}

  double& at(int x, int y, int c = 0) {
    return pixels[(size_t(y) * size_t(width) + size_t(x)) * size_t(channels) +
                  size_t(c)];
  }
  double at(int x, int y, int c = 0) const {
    return pixels[(size_t(y) * size_t(width) + size_t(x)) * size_t(channels) +
                  size_t(c)];
  }
};

/// Exact area-average resampling (box filter with fractional pixel overlap).
/// Preserves mean intensity; reduces to plain averaging when sizes divide.
Image downsample_area(const Image& img, int out_width, int out_height);

/// 8-bit binary PPM: P5 for 1 channel, P6 for 3. Values clamped to [0,1]
/// and rounded to the nearest of 255 levels.
void save_ppm(const Image& img, const std::filesystem::path& file);

}  // namespace cueplan
