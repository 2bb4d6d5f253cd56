#include "scatgen/image.hpp"

#include <cmath>

#include "scatgen/errors.hpp"

namespace scatgen {

double image_l2_distance(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw dimension_mismatch_error("image shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double image_l2_norm(const Image& a) {
  double s = 0.0;
  for (const double v : a.data) s += v * v;
  return std::sqrt(s);
}

Image translate_circular(const Image& img, int dy, int dx) {
  Image out(img.height, img.width, img.channels);
  const auto wrap = [](int v, int n) {
    v %= n;
    return v < 0 ? v + n : v;
  };
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(wrap(y - dy, img.height), wrap(x - dx, img.width), c);
  return out;
}

}  // namespace scatgen
