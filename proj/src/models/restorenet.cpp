#include "patchsel/models/restorenet.hpp"

#include "patchsel/error.hpp"

namespace patchsel::models {

namespace {
// Without BN, He-initialised residual paths roughly double the activation
// variance per block and the untrained output lands far outside [0,1]; start
// close to identity blocks and a small head instead.
constexpr double kInitResidualScale = 0.1;
constexpr double kInitHeadScale = 0.1;
}  // namespace

void RestoreNetConfig::validate() const {
  if (depth < 1) throw ConfigError("RestoreNet depth must be >= 1");
  if (channels < 2 || channels % ratio != 0 || channels % 2 != 0) {
    throw ConfigError("RestoreNet channels must be even and divisible by the bottleneck ratio");
  }
}

RestoreNet::RestoreNet(const RestoreNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  stem_ = Conv2d(cfg_.input_channels(), cfg_.channels, 3, 1, 1, cfg_.alpha, rng);
  for (int i = 0; i < cfg_.depth; ++i) {
    ResBlockConfig rc;
    rc.channels = cfg_.channels;
    rc.ratio = cfg_.ratio;
    rc.with_bn = false;
    rc.alpha = cfg_.alpha;
    blocks_.emplace_back(rc, rng);
    blocks_.back().scale_residual_output(kInitResidualScale);
  }
  head_ = Conv2d(cfg_.channels, 12, 3, 1, 1, 1.0, rng);
  head_.scale_(kInitHeadScale);
}

Tensor RestoreNet::forward(const Tensor& input) {
  if (input.rank() != 4 || input.dim(1) != static_cast<std::size_t>(cfg_.input_channels())) {
    throw ShapeError("RestoreNet expects (N," + std::to_string(cfg_.input_channels()) +
                     ",H/2,W/2) input, got " + ag::shape_str(input.shape()));
  }
  Tensor h = ag::leaky_relu(stem_.forward(input), cfg_.alpha);
  for (auto& block : blocks_) h = block.forward(h, true);
  return ag::pixel_shuffle(head_.forward(h), 2);
}

std::vector<NamedTensor> RestoreNet::params() const {
  std::vector<NamedTensor> out;
  stem_.collect_params("restorenet.stem", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_params("restorenet.block" + std::to_string(i), out);
  }
  head_.collect_params("restorenet.head", out);
  return out;
}

std::size_t RestoreNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.tensor.numel();
  return n;
}

Tensor restorenet_input(const std::vector<const mosaic::MosaicSample*>& batch, bool sigma_conditioning) {
  if (batch.empty()) throw ShapeError("restorenet_input: empty batch");
  const int h = batch.front()->noisy_raw.height, w = batch.front()->noisy_raw.width;
  const std::size_t channels = sigma_conditioning ? 5 : 4;
  const std::size_t plane = static_cast<std::size_t>((h / 2) * (w / 2));
  std::vector<double> values;
  values.reserve(batch.size() * channels * plane);
  for (const auto* s : batch) {
    if (s->noisy_raw.height != h || s->noisy_raw.width != w) {
      throw ShapeError("restorenet_input: samples in a batch must share dimensions");
    }
    auto packed = mosaic::pack_raw(s->noisy_raw, s->pattern);
    values.insert(values.end(), packed.begin(), packed.end());
    if (sigma_conditioning) values.insert(values.end(), plane, s->sigma);
  }
  return Tensor::from({batch.size(), channels, static_cast<std::size_t>(h / 2), static_cast<std::size_t>(w / 2)},
                      std::move(values));
}

Tensor restorenet_forward(RestoreNet& net, const mosaic::MosaicSample& sample, double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("restorenet_forward: sigma must be >= 0");
  mosaic::MosaicSample s = sample;
  s.sigma = sigma;
  Tensor out = net.forward(restorenet_input({&s}, net.config().sigma_conditioning));
  if (static_cast<int>(out.dim(2)) != sample.ground_truth.height ||
      static_cast<int>(out.dim(3)) != sample.ground_truth.width) {
    throw ShapeError("restorenet_forward: output does not match ground-truth size");
  }
  return out;
}

Image tensor_to_image(const Tensor& t, std::size_t index) {
  const std::size_t r = t.rank();
  if (r != 4 && r != 3) throw ShapeError("tensor_to_image: expected (N,3,H,W) or (3,H,W)");
  const std::size_t c = t.dim(r - 3), h = t.dim(r - 2), w = t.dim(r - 1);
  if (c != 3) throw ShapeError("tensor_to_image: expected 3 channels");
  Image img = Image::zeros(static_cast<int>(h), static_cast<int>(w));
  auto src = t.data();
  const std::size_t n = 3 * h * w;
  std::copy(src.begin() + static_cast<long>(index * n), src.begin() + static_cast<long>((index + 1) * n),
            img.data.begin());
  return img;
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from({1, 3, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)}, img.data);
}

}  // namespace patchsel::models
