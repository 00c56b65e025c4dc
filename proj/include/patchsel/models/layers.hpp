#pragma once

#include <random>
#include <string>
#include <vector>

#include "patchsel/autograd/ops.hpp"
#include "patchsel/autograd/optim.hpp"

namespace patchsel::models {

using ag::NamedTensor;
using ag::Tensor;

using Rng = std::mt19937_64;

// Rounds every value to the nearest float32. Checkpoints store 32-bit values,
// so models are kept on that grid at construction and epoch boundaries.
void snap_to_float32(std::span<double> values);

class Conv2d {
 public:
  Conv2d() = default;
  // He-normal init for a leaky-relu with slope `alpha`; zero bias.
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, double alpha, Rng& rng,
         bool bias = true);

  Tensor forward(const Tensor& x) const;
  void collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const;
  void zero_();
  // Multiplies the weights by `factor` (kept on the float32 grid).
  void scale_(double factor);

  Tensor weight;
  Tensor bias;
  int stride = 1;
  int pad = 0;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  Tensor forward(const Tensor& x, bool training);
  void collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) const;

  Tensor gamma;
  Tensor beta;
  ag::BatchNormState state;
};

}  // namespace patchsel::models
