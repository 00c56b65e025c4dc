#include "patchsel/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "patchsel/autograd/tensor.hpp"
#include "patchsel/corpus/patch_grid.hpp"
#include "patchsel/corpus/pnm.hpp"
#include "patchsel/error.hpp"
#include "patchsel/models/layers.hpp"
#include "patchsel/mosaic/metrics.hpp"
#include "patchsel/seed.hpp"
#include "patchsel/training/loss.hpp"

namespace patchsel::eval {

std::uint64_t eval_noise_seed(std::uint64_t eval_seed, std::size_t index, double sigma_8bit) {
  return derive_seed(eval_seed, {static_cast<std::uint64_t>(index),
                                 static_cast<std::uint64_t>(std::llround(1000.0 * sigma_8bit))});
}

mosaic::MosaicSample eval_sample(const Image& ground_truth, std::size_t index, double sigma_8bit,
                                 std::uint64_t eval_seed, const mosaic::BayerPattern& pattern) {
  return mosaic::make_sample(ground_truth, mosaic::sigma_from_8bit(sigma_8bit), pattern,
                             eval_noise_seed(eval_seed, index, sigma_8bit));
}

Image BilinearRestorer::restore(const mosaic::MosaicSample& sample) {
  return mosaic::bilinear_demosaic(sample.noisy_raw, sample.pattern);
}

Image NetRestorer::restore(const mosaic::MosaicSample& sample) {
  ag::NoGradGuard guard;
  return models::tensor_to_image(models::restorenet_forward(*net_, sample, sample.sigma));
}

CheckpointRestorer::CheckpointRestorer(const std::vector<std::uint8_t>& bytes)
    : id_(training::checkpoint_id(bytes)) {
  const training::Checkpoint ckpt = training::decode_checkpoint(bytes);
  run_ = training::TrainRun::parse(ckpt.config_text);
  pattern_ = mosaic::BayerPattern::parse(run_.bayer);
  models::Rng rng(0);
  net_ = models::RestoreNet(run_.restore, rng);
  training::restore_tensors(ckpt, net_.params());
}

std::unique_ptr<CheckpointRestorer> CheckpointRestorer::load(const std::string& path) {
  return std::make_unique<CheckpointRestorer>(corpus::read_file_bytes(path));
}

Image CheckpointRestorer::restore(const mosaic::MosaicSample& sample) {
  ag::NoGradGuard guard;
  return models::tensor_to_image(models::restorenet_forward(net_, sample, sample.sigma));
}

EvalSet load_eval_set(const corpus::CorpusManifest& manifest, corpus::Split split) {
  EvalSet set;
  for (const auto& e : manifest.split(split)) {
    set.names.push_back(e.path);
    set.labels.push_back(e.label);
    set.images.push_back(corpus::load_entry(manifest, e));
  }
  return set;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

EvalReport evaluate(Restorer& restorer, const EvalSet& set, const EvalOptions& options, const std::string& dataset) {
  if (set.size() == 0) throw ConfigError("evaluate: empty image set");
  if (options.sigmas.empty()) throw ConfigError("evaluate: no noise levels given");
  EvalReport report;
  report.dataset = dataset;
  report.checkpoint_id = restorer.name();
  for (double sigma : options.sigmas) {
    if (!(sigma >= 0.0)) throw ConfigError("evaluate: noise levels must be >= 0");
    SigmaRow row;
    row.sigma = sigma;
    std::vector<double> all, easy, hard;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const Image& gt = set.images[i];
      const auto sample = eval_sample(gt, i, sigma, options.eval_seed, restorer.pattern());
      const Image pred = restorer.restore(sample);
      const double p = mosaic::psnr(pred, gt);
      row.images.push_back({set.names[i], set.labels[i], p});
      all.push_back(p);
      (set.labels[i] == corpus::Difficulty::kHard ? hard : easy).push_back(p);
      const auto grid = corpus::make_patch_grid(gt.height, gt.width, options.patch_size, false, 0);
      const auto pp = training::per_patch_psnr(pred, gt, grid);
      row.patch_psnr.insert(row.patch_psnr.end(), pp.begin(), pp.end());
    }
    row.mean = mean_of(all);
    row.mean_easy = mean_of(easy);
    row.mean_hard = mean_of(hard);
    row.n_easy = easy.size();
    row.n_hard = hard.size();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string EvalReport::to_tsv() const {
  std::ostringstream os;
  os << "# dataset\t" << dataset << "\n";
  os << "# checkpoint\t" << checkpoint_id << "\n";
  if (!timestamp.empty()) os << "# timestamp\t" << timestamp << "\n";
  os << "sigma\tn_images\tmean_psnr_dB\tn_easy\tmean_easy_dB\tn_hard\tmean_hard_dB\n";
  for (const auto& r : rows) {
    os << fmt(r.sigma) << '\t' << r.images.size() << '\t' << fmt(r.mean) << '\t' << r.n_easy << '\t'
       << fmt(r.mean_easy) << '\t' << r.n_hard << '\t' << fmt(r.mean_hard) << '\n';
  }
  return os.str();
}

std::string EvalReport::images_tsv() const {
  std::ostringstream os;
  os << "sigma\timage\tlabel\tpsnr_dB\n";
  for (const auto& r : rows) {
    for (const auto& s : r.images) {
      os << fmt(r.sigma) << '\t' << s.name << '\t' << corpus::to_string(s.label) << '\t' << fmt(s.psnr) << '\n';
    }
  }
  return os.str();
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (a.size() != b.size() || a.size() < 2) return nan;
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return nan;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace patchsel::eval
