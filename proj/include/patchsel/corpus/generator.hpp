#pragma once

#include <cstdint>
#include <string>

#include "patchsel/image.hpp"

namespace patchsel::corpus {

enum class ImageKind { kFlat, kGradient, kSmoothNoise, kSinusoid, kCheckerboard, kStripes, kMixedCollage };

std::string to_string(ImageKind k);
ImageKind parse_image_kind(const std::string& s);

// Periodic and high-frequency kinds are hard; flat, gradient and smooth-noise
// are easy.
bool is_hard_kind(ImageKind k);

struct ImageSpec {
  ImageKind kind = ImageKind::kFlat;
  int height = 192;
  int width = 192;
  double frequency = 4.0;  // cycles per image width (cells per width for smooth-noise)
  double angle = 0.0;      // radians
  double amplitude = 0.0;
  double offset = 0.5;
  int period = 2;  // checkerboard period in pixels (two cells)
  std::uint64_t seed = 0;
};

// Deterministic rendering of `spec`, values in [0,1].
//  flat:         offset + amplitude * (2u_c - 1), u_c per channel from the seed
//  gradient:     offset + amplitude * s_c * ((x - W/2) cos a + (y - H/2) sin a) / max(H, W)
//  smooth-noise: offset + amplitude * (2n - 1), n smoothly interpolated lattice noise
//  sinusoid:     offset + amplitude * sin(2 pi f (x cos a + y sin a) / W + phase_c)
//  checkerboard: offset +/- amplitude * g_c on alternating period/2 cells, row 0 = [a,b,a,b,...]
//  stripes:      offset +/- amplitude * g_c square wave, 30% duty, along angle a
//  mixed-collage: quadrants rendered from sub-specs, at least two of them hard
// If offset +/- amplitude leaves [0,1] a warning is printed and values are clamped.
Image gen_image(const ImageSpec& spec);

// Parameter draw used for the desk corpus: the spec is a pure function of
// (kind, size, seed).
ImageSpec random_spec(ImageKind kind, int height, int width, std::uint64_t seed);

}  // namespace patchsel::corpus
