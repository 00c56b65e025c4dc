#pragma once

#include <cstddef>
#include <vector>

#include "patchsel/autograd/tensor.hpp"

namespace patchsel::ag {

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// max(x, alpha*x). The subgradient at exactly zero is alpha.
Tensor leaky_relu(const Tensor& x, double alpha);

// 1 / (1 + exp(-temperature * x)). Throws ConfigError for temperature <= 0.
Tensor tempered_sigmoid(const Tensor& x, double temperature);

// Cross-correlation of an NCHW input with a (Cout, Cin, kh, kw) weight and
// zero padding. `bias` may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad);

// 2x2 non-overlapping mean over NCHW; H and W must be even.
Tensor avg_pool2(const Tensor& x);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState make(std::size_t channels);
};

// Per-channel normalization over (N, H, W). Training mode normalizes with batch
// statistics and updates the running stats (unbiased variance); inference mode
// uses the running stats.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training);

// (N, C*r*r, H, W) -> (N, C, H*r, W*r); input channel c*r*r + dy*r + dx lands at
// output offset (dy, dx) of each r x r cell.
Tensor pixel_shuffle(const Tensor& x, int factor);

struct Pad4 {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;
};

// Zero padding with an individual amount per batch item. All padded items must
// end up with the same spatial size.
Tensor pad2d(const Tensor& x, const std::vector<Pad4>& pads);

// Flat gather: out[i] = x.flat[indices[i]].
Tensor gather(const Tensor& x, const std::vector<std::size_t>& indices);

// Stacks equally shaped tensors along a new leading axis merged into dim 0:
// inputs of shape (1, ...) concatenate to (n, ...).
Tensor concat_batch(const std::vector<Tensor>& items);

}  // namespace patchsel::ag
