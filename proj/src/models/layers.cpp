#include "patchsel/models/layers.hpp"

#include <cmath>

namespace patchsel::models {

void snap_to_float32(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_, double alpha,
               Rng& rng, bool with_bias)
    : stride(stride_), pad(pad_) {
  const auto cin = static_cast<std::size_t>(in_channels);
  const auto cout = static_cast<std::size_t>(out_channels);
  const auto k = static_cast<std::size_t>(kernel);
  const double fan_in = static_cast<double>(cin * k * k);
  const double stddev = std::sqrt(2.0 / ((1.0 + alpha * alpha) * fan_in));
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> w(cout * cin * k * k);
  for (auto& v : w) v = dist(rng);
  snap_to_float32(w);
  weight = Tensor::param({cout, cin, k, k}, std::move(w));
  if (with_bias) bias = Tensor::param({cout}, std::vector<double>(cout, 0.0));
}

Tensor Conv2d::forward(const Tensor& x) const { return ag::conv2d(x, weight, bias, stride, pad); }

void Conv2d::collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

void Conv2d::zero_() {
  for (auto& v : weight.data()) v = 0.0;
  if (bias.defined()) {
    for (auto& v : bias.data()) v = 0.0;
  }
}

void Conv2d::scale_(double factor) {
  auto w = weight.data();
  for (auto& v : w) v *= factor;
  snap_to_float32(w);
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma(Tensor::param({static_cast<std::size_t>(channels)},
                          std::vector<double>(static_cast<std::size_t>(channels), 1.0))),
      beta(Tensor::param({static_cast<std::size_t>(channels)},
                         std::vector<double>(static_cast<std::size_t>(channels), 0.0))),
      state(ag::BatchNormState::make(static_cast<std::size_t>(channels))) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  return ag::batch_norm(x, gamma, beta, state, training);
}

void BatchNorm2d::collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".running_mean", state.running_mean});
  out.push_back({prefix + ".running_var", state.running_var});
}

}  // namespace patchsel::models
