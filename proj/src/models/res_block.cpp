#include "patchsel/models/res_block.hpp"

#include "patchsel/error.hpp"

namespace patchsel::models {

void ResBlockConfig::validate() const {
  if (channels <= 0 || ratio <= 0 || input_channels() <= 0) {
    throw ConfigError("res block: channels and ratio must be positive");
  }
  if (channels % ratio != 0) {
    throw ConfigError("res block: channels " + std::to_string(channels) +
                      " not divisible by bottleneck ratio " + std::to_string(ratio));
  }
}

ResBlock::ResBlock(const ResBlockConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.channels, w = cfg_.width(), in = cfg_.input_channels();
  const bool bias = !cfg_.with_bn;
  reduce_ = Conv2d(in, w, 1, 1, 0, cfg_.alpha, rng, bias);
  mid_ = Conv2d(w, w, 3, 1, 1, cfg_.alpha, rng, bias);
  expand_ = Conv2d(w, c, 3, 1, 1, cfg_.alpha, rng, bias);
  if (cfg_.with_bn) {
    bn1_.emplace(w);
    bn2_.emplace(w);
    bn3_.emplace(c);
  }
  if (in != c) projection_.emplace(in, c, 1, 1, 0, 1.0, rng, true);
}

Tensor ResBlock::forward(const Tensor& x, bool training) {
  Tensor h = reduce_.forward(x);
  if (bn1_) h = bn1_->forward(h, training);
  h = ag::leaky_relu(h, cfg_.alpha);
  h = mid_.forward(h);
  if (bn2_) h = bn2_->forward(h, training);
  h = ag::leaky_relu(h, cfg_.alpha);
  h = expand_.forward(h);
  if (bn3_) h = bn3_->forward(h, training);
  Tensor shortcut = projection_ ? projection_->forward(x) : x;
  return ag::add(shortcut, h);
}

void ResBlock::collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const {
  reduce_.collect_params(prefix + ".reduce", out);
  if (bn1_) bn1_->collect_params(prefix + ".bn1", out);
  mid_.collect_params(prefix + ".mid", out);
  if (bn2_) bn2_->collect_params(prefix + ".bn2", out);
  expand_.collect_params(prefix + ".expand", out);
  if (bn3_) bn3_->collect_params(prefix + ".bn3", out);
  if (projection_) projection_->collect_params(prefix + ".proj", out);
}

void ResBlock::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& out) const {
  if (bn1_) bn1_->collect_buffers(prefix + ".bn1", out);
  if (bn2_) bn2_->collect_buffers(prefix + ".bn2", out);
  if (bn3_) bn3_->collect_buffers(prefix + ".bn3", out);
}

void ResBlock::zero_residual_path() {
  reduce_.zero_();
  mid_.zero_();
  expand_.zero_();
}

void ResBlock::scale_residual_output(double factor) { expand_.scale_(factor); }

}  // namespace patchsel::models
