#include "patchsel/eval/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "patchsel/corpus/patch_grid.hpp"
#include "patchsel/error.hpp"
#include "patchsel/training/loss.hpp"

namespace patchsel::eval {

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

double Histogram::bin_lo(std::size_t i) const {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(counts.size());
}

double Histogram::bin_hi(std::size_t i) const { return bin_lo(i + 1); }

std::size_t Histogram::mode() const {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::string Histogram::to_tsv() const {
  std::ostringstream os;
  os << "bin_lo\tbin_hi\tcount\n";
  os << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < counts.size(); ++i) os << bin_lo(i) << '\t' << bin_hi(i) << '\t' << counts[i] << '\n';
  return os.str();
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
  if (!(hi > lo)) throw ConfigError("histogram range is empty");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    const double f = std::floor((v - lo) / width);
    const auto idx = static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
  }
  return h;
}

PatchPsnrs patch_psnrs(Restorer& restorer, const EvalSet& set, double sigma_8bit, std::uint64_t eval_seed,
                       int patch_size) {
  PatchPsnrs out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Image& gt = set.images[i];
    const auto sample = eval_sample(gt, i, sigma_8bit, eval_seed, restorer.pattern());
    const Image pred = restorer.restore(sample);
    const auto grid = corpus::make_patch_grid(gt.height, gt.width, patch_size, false, 0);
    const auto pp = training::per_patch_psnr(pred, gt, grid);
    auto& dst = set.labels[i] == corpus::Difficulty::kHard ? out.hard : out.easy;
    dst.insert(dst.end(), pp.begin(), pp.end());
  }
  return out;
}

}  // namespace patchsel::eval
