#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "patchsel/image.hpp"

namespace patchsel::mosaic {

enum class Channel : int { kR = 0, kG = 1, kB = 2 };

// 2x2 color filter layout in row-major order: (0,0), (0,1), (1,0), (1,1).
struct BayerPattern {
  std::array<Channel, 4> layout{Channel::kR, Channel::kG, Channel::kG, Channel::kB};

  static BayerPattern rggb() { return {}; }
  // Accepts "RGGB", "BGGR", "GRBG", "GBRG" (any case).
  static BayerPattern parse(const std::string& name);

  Channel channel_at(int y, int x) const { return layout[static_cast<std::size_t>(((y & 1) << 1) | (x & 1))]; }
  std::string name() const;
  void validate() const;
};

// H x W x 3 binary mask (planar), exactly one channel set per pixel.
Image bayer_mask(int height, int width, const BayerPattern& pattern);

// Clean raw: the masked channel of `image` at every pixel. Values outside [0,1]
// produce a warning on stderr and are passed through.
Plane mosaic_apply(const Image& image, const BayerPattern& pattern);

// Places raw samples back into their channel, zeros elsewhere.
Image embed_raw(const Plane& raw, const BayerPattern& pattern);

// raw + N(0, sigma^2) i.i.d., sigma on the [0,1] scale. No clamping.
Plane add_noise(const Plane& raw, double sigma, std::uint64_t seed);

// Converts a noise level quoted on the 8-bit scale to the [0,1] scale.
constexpr double sigma_from_8bit(double sigma_8bit) { return sigma_8bit / 255.0; }

struct MosaicSample {
  Image ground_truth;
  Plane clean_raw;
  Plane noisy_raw;
  double sigma = 0.0;
  BayerPattern pattern;
  std::uint64_t seed = 0;
};

MosaicSample make_sample(const Image& ground_truth, double sigma, const BayerPattern& pattern,
                         std::uint64_t seed);

// Half-resolution 4-channel packing, channels [R, G on R row, G on B row, B].
// Returned as planar (4, H/2, W/2) values.
std::vector<double> pack_raw(const Plane& raw, const BayerPattern& pattern);
Plane unpack_raw(const std::vector<double>& packed, int height, int width, const BayerPattern& pattern);

// Bilinear interpolation of the missing samples of each channel. Each missing
// value is the weighted mean of same-channel samples in its 3x3 neighbourhood
// (weight 1 for edge neighbours, 1/2 for corners), renormalised over the
// neighbours that fall inside the image.
Image bilinear_demosaic(const Plane& raw, const BayerPattern& pattern);

}  // namespace patchsel::mosaic
