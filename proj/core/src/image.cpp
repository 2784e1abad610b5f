#include "cueplan/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "cueplan/errors.hpp"

namespace cueplan {

namespace {

struct Taps {
  int first = 0;
  std::vector<double> weights;  // weights[i] applies to input first+i
};

// Overlap weights of output cell `o` (covering [o*scale, (o+1)*scale) in
// input pixel units) with each input cell, normalized to sum 1.
std::vector<Taps> box_taps(int in_size, int out_size) {
  double scale = double(in_size) / double(out_size);
  std::vector<Taps> taps(static_cast<size_t>(out_size));
  for (int o = 0; o < out_size; ++o) {
    double lo = o * scale;
    double hi = (o + 1) * scale;
    int first = int(std::floor(lo));
    int last = std::min(in_size - 1, int(std::ceil(hi)) - 1);
    Taps t;
    t.first = first;
    double total = 0.0;
    for (int i = first; i <= last; ++i) {
      double w = std::min(hi, double(i + 1)) - std::max(lo, double(i));
      if (w <= 0.0) w = 0.0;
      t.weights.push_back(w);
      total += w;
    }
    for (double& w : t.weights) w /= total;
    taps[size_t(o)] = std::move(t);
  }
  return taps;
}

}  // namespace

Image downsample_area(const Image& img, int out_width, int out_height) {
  if (out_width < 1 || out_height < 1) throw ValidationError("bad output size");
  if (out_width == img.width && out_height == img.height) return img;
  auto xt = box_taps(img.width, out_width);
  auto yt = box_taps(img.height, out_height);
  int ch = img.channels;

  // Horizontal pass, then vertical.
  Image mid(out_width, img.height, ch);
  for (int y = 0; y < img.height; ++y) {
    for (int o = 0; o < out_width; ++o) {
      const Taps& t = xt[size_t(o)];
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < t.weights.size(); ++i) {
          acc += t.weights[i] * img.at(t.first + int(i), y, c);
        }
        mid.at(o, y, c) = acc;
      }
    }
  }
  Image out(out_width, out_height, ch);
  for (int o = 0; o < out_height; ++o) {
    const Taps& t = yt[size_t(o)];
    for (int x = 0; x < out_width; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < t.weights.size(); ++i) {
          acc += t.weights[i] * mid.at(x, t.first + int(i), c);
        }
        out.at(x, o, c) = acc;
      }
    }
  }
  return out;
}

void save_ppm(const Image& img, const std::filesystem::path& file) {
  if (img.channels != 1 && img.channels != 3) {
    throw ValidationError("PPM export supports 1 or 3 channels");
  }
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoFailure("cannot open for writing: " + file.string());
  os << (img.channels == 1 ? "P5" : "P6") << "\n"
     << img.width << " " << img.height << "\n255\n";
  std::string bytes;
  bytes.reserve(img.pixels.size());
  for (double v : img.pixels) {
    double c = std::clamp(v, 0.0, 1.0);
    bytes.push_back(char(int(std::lround(c * 255.0))));
  }
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) throw IoFailure("write failed: " + file.string());
}

}  // namespace cueplan
