#include "patchsel/models/patchnet.hpp"

#include "patchsel/error.hpp"

namespace patchsel::models {

int num_stages(int patch_size) {
  if (patch_size < 2 || (patch_size & (patch_size - 1)) != 0) {
    throw ConfigError("patch size must be a power of two >= 2, got " + std::to_string(patch_size));
  }
  int n = 0;
  while ((1 << n) < patch_size) ++n;
  return n;
}

std::string to_string(PatchNetVariant v) { return v == PatchNetVariant::kTiny ? "tiny" : "large"; }

PatchNetVariant parse_patchnet_variant(const std::string& s) {
  if (s == "tiny") return PatchNetVariant::kTiny;
  if (s == "large") return PatchNetVariant::kLarge;
  throw ConfigError("unknown PatchNet variant '" + s + "' (expected tiny|large)");
}

PatchNetConfig PatchNetConfig::make(PatchNetVariant variant, int patch_size, double temperature,
                                    int width_divisor) {
  static constexpr int kTinyBlocks[] = {1, 1, 1, 2, 2, 1};
  static constexpr int kLargeBlocks[] = {3, 3, 4, 6, 6, 3};
  static constexpr int kOut[] = {64, 64, 128, 256, 512, 1024};
  static constexpr int kWidth[] = {16, 16, 32, 64, 128, 256};

  if (width_divisor < 1) throw ConfigError("PatchNet width divisor must be >= 1");
  const int pools = num_stages(patch_size);
  PatchNetConfig cfg;
  cfg.variant = variant;
  cfg.patch_size = patch_size;
  cfg.temperature = temperature;
  cfg.width_divisor = width_divisor;
  cfg.stem_channels = 64 / width_divisor;
  const int* blocks = variant == PatchNetVariant::kTiny ? kTinyBlocks : kLargeBlocks;
  const int n_stages = pools > 6 ? pools : 6;
  for (int i = 0; i < n_stages; ++i) {
    const int j = i < 6 ? i : 5;
    StageSpec s;
    s.blocks = blocks[j];
    s.out_channels = kOut[j] / width_divisor;
    s.width = kWidth[j] / width_divisor;
    s.pool = i < pools;
    cfg.stages.push_back(s);
  }
  return cfg;
}

int PatchNetConfig::pool_count() const {
  int n = 0;
  for (const auto& s : stages) n += s.pool ? 1 : 0;
  return n;
}

int PatchNetConfig::total_blocks() const {
  int n = 0;
  for (const auto& s : stages) n += s.blocks;
  return n;
}

void PatchNetConfig::validate() const {
  const int expected = num_stages(patch_size);
  if (!(temperature > 0.0)) throw ConfigError("PatchNet temperature must be positive");
  if (stem_channels <= 0) throw ConfigError("PatchNet stem channels must be positive");
  if (stages.empty()) throw ConfigError("PatchNet needs at least one stage");
  if (pool_count() != expected) {
    throw ConfigError("PatchNet has " + std::to_string(pool_count()) +
                      " pooling stages but patch size " + std::to_string(patch_size) + " needs " +
                      std::to_string(expected));
  }
  for (const auto& s : stages) {
    if (s.blocks < 1 || s.out_channels < 1 || s.width < 1 || s.out_channels % s.width != 0) {
      throw ConfigError("PatchNet stage has invalid block count or channel widths");
    }
  }
}

PatchNet::PatchNet(const PatchNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  stem_ = Conv2d(3, cfg_.stem_channels, 1, 1, 0, cfg_.alpha, rng);
  int channels = cfg_.stem_channels;
  for (const auto& spec : cfg_.stages) {
    Stage stage;
    stage.pool = spec.pool;
    for (int b = 0; b < spec.blocks; ++b) {
      ResBlockConfig rc;
      rc.in_channels = channels;
      rc.channels = spec.out_channels;
      rc.ratio = spec.out_channels / spec.width;
      rc.with_bn = true;
      rc.alpha = cfg_.alpha;
      stage.blocks.emplace_back(rc, rng);
      channels = spec.out_channels;
    }
    stages_.push_back(std::move(stage));
  }
  head_ = Conv2d(channels, 1, 1, 1, 0, 1.0, rng);
}

Tensor PatchNet::logits(const Tensor& image, bool training) {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw ShapeError("PatchNet expects an (N,3,H,W) image, got " + ag::shape_str(image.shape()));
  }
  const auto k = static_cast<std::size_t>(cfg_.patch_size);
  if (image.dim(2) % k != 0 || image.dim(3) % k != 0) {
    throw ShapeError("PatchNet input " + ag::shape_str(image.shape()) +
                     " is not divisible by patch size " + std::to_string(k));
  }
  Tensor h = stem_.forward(image);
  for (auto& stage : stages_) {
    for (auto& block : stage.blocks) h = block.forward(h, training);
    if (stage.pool) h = ag::avg_pool2(h);
  }
  return head_.forward(h);
}

Tensor PatchNet::forward(const Tensor& image, bool training) {
  return ag::tempered_sigmoid(logits(image, training), cfg_.temperature);
}

std::vector<NamedTensor> PatchNet::params() const {
  std::vector<NamedTensor> out;
  stem_.collect_params("patchnet.stem", out);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      stages_[s].blocks[b].collect_params(
          "patchnet.stage" + std::to_string(s + 1) + ".block" + std::to_string(b), out);
    }
  }
  head_.collect_params("patchnet.head", out);
  return out;
}

std::vector<NamedTensor> PatchNet::buffers() const {
  std::vector<NamedTensor> out;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      stages_[s].blocks[b].collect_buffers(
          "patchnet.stage" + std::to_string(s + 1) + ".block" + std::to_string(b), out);
    }
  }
  return out;
}

std::size_t PatchNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.tensor.numel();
  return n;
}

PatchNetOutput patchnet_forward(PatchNet& net, const Tensor& image, bool detach, bool training,
                                const std::vector<std::pair<int, int>>& origins) {
  const Tensor input = detach ? image.detach() : image;
  PatchNetOutput out;
  out.trainability = net.forward(input, training);
  const std::size_t n = out.trainability.dim(0);
  const auto rows = static_cast<int>(out.trainability.dim(2));
  const auto cols = static_cast<int>(out.trainability.dim(3));
  if (!origins.empty() && origins.size() != n) {
    throw ShapeError("patchnet_forward: one origin per batch item required");
  }
  const auto per = static_cast<std::size_t>(rows * cols);
  for (std::size_t b = 0; b < n; ++b) {
    TrainabilityMap m;
    m.rows = rows;
    m.cols = cols;
    m.patch_size = net.config().patch_size;
    if (!origins.empty()) {
      m.origin_y = origins[b].first;
      m.origin_x = origins[b].second;
    }
    auto src = out.trainability.data();
    m.values.assign(src.begin() + static_cast<long>(b * per), src.begin() + static_cast<long>((b + 1) * per));
    out.maps.push_back(std::move(m));
  }
  return out;
}

}  // namespace patchsel::models
