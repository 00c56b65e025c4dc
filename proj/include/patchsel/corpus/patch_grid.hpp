#pragma once

#include <cstdint>
#include <vector>

namespace patchsel::corpus {

inline constexpr int kAugmentPadTotal = 64;

struct Patch {
  int row = 0;
  int col = 0;
  int y0 = 0;  // top-left corner in padded coordinates
  int x0 = 0;
  int valid_pixels = 0;  // pixels of the patch that cover the real image
};

struct PatchGrid {
  int patch_size = 64;
  int image_height = 0;
  int image_width = 0;
  int pad_top = 0;
  int pad_bottom = 0;
  int pad_left = 0;
  int pad_right = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Patch> patches;  // row-major

  int padded_height() const { return image_height + pad_top + pad_bottom; }
  int padded_width() const { return image_width + pad_left + pad_right; }
  // A patch takes part in the loss only if at most half of it is padding.
  bool usable(const Patch& p) const { return 2 * p.valid_pixels >= patch_size * patch_size; }
};

// Augmented: left pad uniform in [0, 64] with right = 64 - left (likewise for
// top/bottom), then zeros appended on the right/bottom up to a multiple of k.
// Otherwise: minimal symmetric zero padding to a multiple of k.
PatchGrid make_patch_grid(int height, int width, int patch_size, bool augment, std::uint64_t seed);

}  // namespace patchsel::corpus
