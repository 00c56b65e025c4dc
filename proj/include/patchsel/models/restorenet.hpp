#pragma once

#include <vector>

#include "patchsel/models/res_block.hpp"
#include "patchsel/mosaic/bayer.hpp"

namespace patchsel::models {

struct RestoreNetConfig {
  int channels = 32;
  int depth = 4;
  int ratio = 2;
  bool sigma_conditioning = true;
  double alpha = 0.2;

  int input_channels() const { return sigma_conditioning ? 5 : 4; }
  void validate() const;
};

// Packed half-resolution raw (+ constant sigma plane) -> stem 3x3 conv ->
// `depth` residual blocks without BN -> 3x3 conv to 12 channels -> depth-to-space
// x2, giving full-resolution linear RGB.
class RestoreNet {
 public:
  RestoreNet() = default;
  RestoreNet(const RestoreNetConfig& cfg, Rng& rng);

  // `input` is (N, input_channels, H/2, W/2); returns (N, 3, H, W).
  Tensor forward(const Tensor& input);

  std::vector<NamedTensor> params() const;
  std::size_t parameter_count() const;

  Conv2d& head() { return head_; }
  const RestoreNetConfig& config() const { return cfg_; }

 private:
  RestoreNetConfig cfg_;
  Conv2d stem_;
  std::vector<ResBlock> blocks_;
  Conv2d head_;
};

// Builds the network input for a batch of samples from their noisy raws. All
// samples must share the same size.
Tensor restorenet_input(const std::vector<const mosaic::MosaicSample*>& batch, bool sigma_conditioning);

// Single-sample convenience: returns the (1, 3, H, W) prediction. `sigma`
// overrides the sample's noise level in the conditioning plane.
Tensor restorenet_forward(RestoreNet& net, const mosaic::MosaicSample& sample, double sigma);

// Copies a (1,3,H,W) or (3,H,W) tensor slice `index` into an Image.
Image tensor_to_image(const Tensor& t, std::size_t index = 0);
// (1, 3, H, W) tensor holding `img`.
Tensor image_to_tensor(const Image& img);

}  // namespace patchsel::models
