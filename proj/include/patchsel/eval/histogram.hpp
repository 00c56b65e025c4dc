#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "patchsel/eval/evaluate.hpp"
#include "patchsel/mosaic/metrics.hpp"

namespace patchsel::eval {

struct Histogram {
  double lo = 0.0;
  double hi = mosaic::kPsnrCap;
  std::vector<std::size_t> counts;

  std::size_t total() const;
  double bin_lo(std::size_t i) const;
  double bin_hi(std::size_t i) const;
  // Index of the fullest bin (first one on ties).
  std::size_t mode() const;
  // Tab-separated rows: bin_lo, bin_hi, count.
  std::string to_tsv() const;
};

// Equal-width bins over [lo, hi]; values outside are clamped into the end
// bins, and the cap value lands in the last bin. Throws ConfigError if bins < 2.
Histogram make_histogram(const std::vector<double>& values, std::size_t bins, double lo = 0.0,
                         double hi = mosaic::kPsnrCap);

struct PatchPsnrs {
  std::vector<double> easy;
  std::vector<double> hard;
};

// Per-patch PSNR of every test image at one noise level, split by label.
PatchPsnrs patch_psnrs(Restorer& restorer, const EvalSet& set, double sigma_8bit, std::uint64_t eval_seed,
                       int patch_size);

}  // namespace patchsel::eval
