#pragma once

#include <cstddef>
#include <vector>

namespace patchsel {

// Three-channel linear RGB image stored as planar CHW float64.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static Image zeros(int h, int w) {
    return Image{h, w, std::vector<double>(static_cast<std::size_t>(3 * h * w), 0.0)};
  }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  double& at(int c, int y, int x) { return data[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data[index(c, y, x)]; }
};

// Single-plane image, used for raw sensor data.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static Plane zeros(int h, int w) {
    return Plane{h, w, std::vector<double>(static_cast<std::size_t>(h * w), 0.0)};
  }

  double& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  double at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

}  // namespace patchsel
