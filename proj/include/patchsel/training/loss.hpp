#pragma once

#include <cstdint>
#include <vector>

#include "patchsel/autograd/tensor.hpp"
#include "patchsel/corpus/patch_grid.hpp"
#include "patchsel/image.hpp"

namespace patchsel::training {

using ag::Tensor;

struct PatchRef {
  std::size_t item = 0;   // batch index
  std::size_t patch = 0;  // row-major index into that item's grid
};

// Differentiable per-patch losses of the usable patches of a batch, in batch
// order then grid order.
struct PatchLosses {
  Tensor losses;  // (M,)
  std::vector<PatchRef> refs;
};

// Mean squared error of `pred` (N,3,H,W) against the ground truths over the
// non-padded pixels of each patch. `grids[i]` describes how item i was padded
// for scoring; patches with more than half of their area in the padding are
// left out.
PatchLosses per_patch_loss(const Tensor& pred, const std::vector<const Image*>& gt,
                           const std::vector<corpus::PatchGrid>& grids);

// Non-differentiable variants on images. Entries follow grid order and are
// returned for usable patches only.
std::vector<double> per_patch_mse(const Image& pred, const Image& gt, const corpus::PatchGrid& grid);
// PSNR on [0,1]-clamped values.
std::vector<double> per_patch_psnr(const Image& pred, const Image& gt, const corpus::PatchGrid& grid);

struct LossRecord {
  std::vector<double> patch_losses;  // L_p
  std::vector<double> trainability;  // t_p (or HNM weights)
  std::vector<double> weights;       // N t_p / sum t (0 when sum t == 0)
  double total = 0.0;
  double weight_sum = 0.0;  // sum t
  bool zero_sum = false;    // sum t == 0: only the eps guard kept this finite
  std::uint64_t step = 0;
};

struct Reweighted {
  Tensor total;  // scalar
  LossRecord record;
};

// total = sum_p t_p L_p / (sum_p t_p + eps), differentiable in both arguments:
//   d total / d L_p = t_p / (S + eps)
//   d total / d t_q = (L_q - total) / (S + eps)
// Throws NumericError if any input or the result is not finite.
Reweighted reweighted_loss(const Tensor& losses, const Tensor& t, double eps = 1e-8, std::uint64_t step = 0);

// 1 where psnr < threshold, else 0.
std::vector<double> hnm_weights(const std::vector<double>& psnr_db, double threshold_db);

// Linear ramp from start_db at epoch 0 to end_db at epoch == total_epochs.
double hnm_threshold(int epoch, int total_epochs, double start_db = 45.0, double end_db = 35.0);

// Mean binary cross-entropy of tempered_sigmoid(logits, T) against targets in
// {0,1}, computed from logits for stability.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets, double temperature);

}  // namespace patchsel::training
