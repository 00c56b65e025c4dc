#include "patchsel/corpus/patch_grid.hpp"

#include <algorithm>
#include <random>

#include "patchsel/error.hpp"

namespace patchsel::corpus {

PatchGrid make_patch_grid(int height, int width, int patch_size, bool augment, std::uint64_t seed) {
  if (patch_size < 1 || (patch_size & (patch_size - 1)) != 0) {
    throw ConfigError("patch size must be a power of two, got " + std::to_string(patch_size));
  }
  if (height <= 0 || width <= 0) throw ShapeError("patch grid: image size must be positive");
  PatchGrid g;
  g.patch_size = patch_size;
  g.image_height = height;
  g.image_width = width;
  auto round_up = [patch_size](int v) { return (v + patch_size - 1) / patch_size * patch_size; };
  if (augment) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(0, kAugmentPadTotal);
    g.pad_left = dist(rng);
    g.pad_right = kAugmentPadTotal - g.pad_left;
    g.pad_top = dist(rng);
    g.pad_bottom = kAugmentPadTotal - g.pad_top;
    g.pad_right += round_up(width + kAugmentPadTotal) - (width + kAugmentPadTotal);
    g.pad_bottom += round_up(height + kAugmentPadTotal) - (height + kAugmentPadTotal);
  } else {
    const int extra_h = round_up(height) - height, extra_w = round_up(width) - width;
    g.pad_top = extra_h / 2;
    g.pad_bottom = extra_h - g.pad_top;
    g.pad_left = extra_w / 2;
    g.pad_right = extra_w - g.pad_left;
  }
  g.rows = g.padded_height() / patch_size;
  g.cols = g.padded_width() / patch_size;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      Patch p;
      p.row = r;
      p.col = c;
      p.y0 = r * patch_size;
      p.x0 = c * patch_size;
      const int vy = std::max(0, std::min(p.y0 + patch_size, g.pad_top + height) - std::max(p.y0, g.pad_top));
      const int vx = std::max(0, std::min(p.x0 + patch_size, g.pad_left + width) - std::max(p.x0, g.pad_left));
      p.valid_pixels = vy * vx;
      g.patches.push_back(p);
    }
  }
  return g;
}

}  // namespace patchsel::corpus
