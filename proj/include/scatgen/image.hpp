#pragma once

#include <cstddef>
#include <vector>

namespace scatgen {

/// Grayscale or RGB image with values in [0, 1], row-major (y, x, c).
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t size() const { return data.size(); }
};

/// Euclidean distance between two same-shape images (flat L2).
double image_l2_distance(const Image& a, const Image& b);

/// Flat L2 norm of the pixel data.
double image_l2_norm(const Image& a);

/// Circular translation by (dy, dx) pixels.
Image translate_circular(const Image& img, int dy, int dx);

}  // namespace scatgen
