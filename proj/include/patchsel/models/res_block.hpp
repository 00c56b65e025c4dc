#pragma once

#include <optional>

#include "patchsel/models/layers.hpp"

namespace patchsel::models {

struct ResBlockConfig {
  int channels = 64;        // output channels C
  int in_channels = 0;      // 0 means equal to `channels`
  int ratio = 4;            // bottleneck ratio r, internal width C / r
  bool with_bn = true;
  double alpha = 0.2;

  int input_channels() const { return in_channels > 0 ? in_channels : channels; }
  int width() const { return channels / ratio; }
  void validate() const;
};

// x + F(x) with F = conv1x1(C/r) -> conv3x3(C/r) -> conv3x3(C), leaky-relu after
// the first two convolutions, optional BN after each, nothing after the last.
// When the input channel count differs from C the shortcut is a 1x1 projection.
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(const ResBlockConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, bool training);
  void collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) const;

  // Zeroes every weight and bias on the residual path.
  void zero_residual_path();
  // Scales the last convolution of F, shrinking the block towards identity.
  void scale_residual_output(double factor);

  const ResBlockConfig& config() const { return cfg_; }

 private:
  ResBlockConfig cfg_;
  Conv2d reduce_, mid_, expand_;
  std::optional<BatchNorm2d> bn1_, bn2_, bn3_;
  std::optional<Conv2d> projection_;
};

}  // namespace patchsel::models
