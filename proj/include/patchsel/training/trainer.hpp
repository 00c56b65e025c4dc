#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "patchsel/autograd/optim.hpp"
#include "patchsel/corpus/manifest.hpp"
#include "patchsel/corpus/patch_grid.hpp"
#include "patchsel/eval/evaluate.hpp"
#include "patchsel/models/patchnet.hpp"
#include "patchsel/models/restorenet.hpp"
#include "patchsel/mosaic/bayer.hpp"
#include "patchsel/training/checkpoint.hpp"
#include "patchsel/training/config.hpp"
#include "patchsel/training/loss.hpp"

namespace patchsel::training {

// Networks, optimizers and counters of a run.
struct TrainState {
  TrainRun run;
  mosaic::BayerPattern pattern;
  std::unique_ptr<models::RestoreNet> restore;
  std::unique_ptr<models::PatchNet> patchnet;  // patchnet mode only
  std::unique_ptr<ag::Adam> restore_opt;
  std::unique_ptr<ag::Adam> patch_opt;
  int epoch = 0;  // completed epochs
  std::uint64_t global_step = 0;

  // Fresh weights from the run seed. If run.init_checkpoint is set, RestoreNet
  // weights are taken from that file (optimizer state starts fresh).
  static TrainState create(const TrainRun& run);
  static TrainState from_checkpoint(const Checkpoint& ckpt);
  Checkpoint to_checkpoint() const;

  // Rounds weights, optimizer moments and normalization statistics to float32,
  // the precision checkpoints store. Called at every epoch boundary so that a
  // resumed run continues from exactly the state the uninterrupted run has.
  void snap_to_float32();
};

struct Batch {
  std::vector<mosaic::MosaicSample> samples;
  std::vector<corpus::PatchGrid> grids;
  std::vector<corpus::Difficulty> labels;
};

// Degrades image `index` of training source `source` for `epoch`: sigma drawn
// uniformly from the run range, noise and padding offsets seeded from
// (run seed, source, index, epoch).
void add_to_batch(Batch& batch, const TrainRun& run, const mosaic::BayerPattern& pattern, const Image& image,
                  corpus::Difficulty label, std::size_t source, std::size_t index, int epoch);

struct StepResult {
  LossRecord record;
  bool skipped = false;   // no usable patch or an all-zero HNM batch
  bool zero_sum = false;  // sum of trainabilities underflowed
  double selector_loss = 0.0;  // BCE in regress mode
};

// One optimisation step on `batch` at learning rate `lr`. Throws NumericError
// on a non-finite loss or gradient, before any parameter has changed.
StepResult train_step(TrainState& state, const Batch& batch, double lr, int epoch);

// Threshold used by hnm mode (and by regress targets) during `epoch`.
double epoch_threshold(const TrainRun& run, int epoch);

struct EpochMetrics {
  int epoch = 0;  // 1-based count of completed epochs
  double lr = 0.0;
  double train_loss = 0.0;
  double val_psnr_easy = 0.0;
  double val_psnr_hard = 0.0;
  double mean_t_easy = 0.0;  // NaN outside patchnet mode
  double mean_t_hard = 0.0;
  std::size_t skipped_batches = 0;

  std::string to_tsv_line() const;
};

std::string metrics_header();

struct PatchScore {
  corpus::Difficulty label = corpus::Difficulty::kEasy;
  double t = 0.0;
  double loss = 0.0;  // MSE of the restored patch
  double psnr = 0.0;
};

// Restores every image of `set` at the evaluation degradation and scores each
// usable patch with PatchNet (inference mode).
std::vector<PatchScore> score_patches(TrainState& state, const eval::EvalSet& set, double sigma_8bit,
                                      std::uint64_t eval_seed);

struct TrainOptions {
  std::string out_dir;           // checkpoints and metrics.tsv; empty writes nothing
  int stop_after_epoch = -1;     // stop early once this many epochs are complete
  bool verbose = false;          // progress on stderr
  std::function<void(const StepResult&)> on_step;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::uint64_t steps = 0;
  std::string final_checkpoint;  // path, when out_dir is set
};

// Trains from `state.epoch` to `state.run.epochs`. `train_sources` are the
// training corpora (their train split); validation uses `val`.
TrainResult train_loop(TrainState& state, const std::vector<corpus::CorpusManifest>& train_sources,
                       const eval::EvalSet& val, const TrainOptions& options);

std::string checkpoint_name(int epoch);

}  // namespace patchsel::training
