#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchsel/models/restorenet.hpp"

namespace patchsel::training {

enum class TrainMode { kUniform, kHnm, kPatchNet };

// How the selector network is optimised in patchnet mode.
//  min:     both networks descend the reweighted loss
//  max:     RestoreNet descends, PatchNet ascends the same loss
//  regress: PatchNet fits the hard-patch indicator with binary cross-entropy;
//           RestoreNet sees the trainability values as constants
enum class Objective { kMin, kMax, kRegress };

std::string to_string(TrainMode m);
std::string to_string(Objective o);

// Full description of a training run. Serialised as line-oriented
// `key = value` text; the same text is echoed into every checkpoint, which is
// how checkpoints carry the model topology.
struct TrainRun {
  TrainMode mode = TrainMode::kPatchNet;
  Objective objective = Objective::kMax;
  bool detach_input = true;

  int epochs = 30;
  int batch_size = 16;
  double base_lr = 2.5e-4;
  double patchnet_lr_scale = 1.0;

  // Noise range on the 8-bit scale; drawn uniformly per image and epoch.
  double sigma_min = 0.0;
  double sigma_max = 16.0;
  std::string bayer = "RGGB";

  std::uint64_t seed = 0;
  bool augment = true;
  std::vector<int> oversample;  // one per training corpus; empty means all 1

  int patch_size = 64;
  double temperature = 2.0;
  std::string patchnet_variant = "tiny";
  int patchnet_width_divisor = 1;

  models::RestoreNetConfig restore;

  // Hard-negative mining threshold in dB, fixed or linearly scheduled.
  double hnm_threshold = 40.0;
  bool hnm_schedule = false;
  double hnm_start = 45.0;
  double hnm_end = 35.0;

  // Validation noise level (8-bit scale) and the seed of evaluation noise.
  double val_sigma = 10.0;
  std::uint64_t eval_seed = 20200;

  // Optional checkpoint whose RestoreNet weights initialise this run.
  std::string init_checkpoint;
  bool keep_all_checkpoints = true;

  bool uses_patchnet() const { return mode == TrainMode::kPatchNet; }
  void validate() const;

  std::string to_text() const;
  // Throws ConfigError on unknown keys, malformed lines or invalid values.
  static TrainRun parse(const std::string& text);
  static TrainRun load(const std::string& path);
};

}  // namespace patchsel::training
