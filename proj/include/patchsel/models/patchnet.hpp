#pragma once

#include <string>
#include <vector>

#include "patchsel/models/res_block.hpp"

namespace patchsel::models {

// Number of halving stages needed to reduce a k x k patch to one pixel: log2(k).
// Throws ConfigError unless k is a power of two >= 2.
int num_stages(int patch_size);

enum class PatchNetVariant { kTiny, kLarge };

std::string to_string(PatchNetVariant v);
PatchNetVariant parse_patchnet_variant(const std::string& s);

struct StageSpec {
  int blocks = 1;
  int out_channels = 64;
  int width = 16;  // bottleneck width; out_channels / width is the block ratio
  bool pool = true;
};

struct PatchNetConfig {
  PatchNetVariant variant = PatchNetVariant::kTiny;
  int patch_size = 64;
  double temperature = 2.0;
  int stem_channels = 64;
  double alpha = 0.2;
  // Divides every channel count of the reference topology (1 keeps it as is).
  int width_divisor = 1;
  std::vector<StageSpec> stages;

  // Reference topology. Six conv stages for k <= 64 with the average pool kept
  // only on the first log2(k); k = 128 appends a seventh stage shaped like the
  // sixth.
  static PatchNetConfig make(PatchNetVariant variant, int patch_size, double temperature,
                             int width_divisor = 1);

  int pool_count() const;
  int total_blocks() const;
  void validate() const;
};

class PatchNet {
 public:
  PatchNet() = default;
  PatchNet(const PatchNetConfig& cfg, Rng& rng);

  // Pre-sigmoid logits, shape (N, 1, H/k, W/k).
  Tensor logits(const Tensor& image, bool training);
  // Trainability t = tempered_sigmoid(logits, T).
  Tensor forward(const Tensor& image, bool training);

  std::vector<NamedTensor> params() const;
  std::vector<NamedTensor> buffers() const;
  std::size_t parameter_count() const;

  Conv2d& head() { return head_; }
  const PatchNetConfig& config() const { return cfg_; }

 private:
  struct Stage {
    std::vector<ResBlock> blocks;
    bool pool = true;
  };

  PatchNetConfig cfg_;
  Conv2d stem_;
  std::vector<Stage> stages_;
  Conv2d head_;
};

// Per-image grid of trainability values on the padded image.
struct TrainabilityMap {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  int origin_y = 0;  // top padding applied before scoring
  int origin_x = 0;  // left padding applied before scoring
  std::vector<double> values;  // row-major, rows * cols

  double at(int r, int c) const { return values.at(static_cast<std::size_t>(r * cols + c)); }
};

struct PatchNetOutput {
  Tensor trainability;  // (N, 1, rows, cols)
  std::vector<TrainabilityMap> maps;
};

// Scores an already padded NCHW image batch. With `detach` set no gradient
// reaches whatever produced `image`. `origins` gives the (top, left) padding of
// each item, recorded in the maps; empty means zero.
PatchNetOutput patchnet_forward(PatchNet& net, const Tensor& image, bool detach, bool training,
                                const std::vector<std::pair<int, int>>& origins = {});

}  // namespace patchsel::models
