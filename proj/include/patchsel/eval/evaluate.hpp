#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "patchsel/corpus/manifest.hpp"
#include "patchsel/image.hpp"
#include "patchsel/models/restorenet.hpp"
#include "patchsel/mosaic/bayer.hpp"
#include "patchsel/training/checkpoint.hpp"
#include "patchsel/training/config.hpp"

namespace patchsel::eval {

// Noise seed for test image `index` at noise level sigma (8-bit scale):
//   derive_seed(eval_seed, {index, llround(1000 * sigma_8bit)})
// Shared by every evaluation so different models see identical degradations.
std::uint64_t eval_noise_seed(std::uint64_t eval_seed, std::size_t index, double sigma_8bit);

mosaic::MosaicSample eval_sample(const Image& ground_truth, std::size_t index, double sigma_8bit,
                                 std::uint64_t eval_seed, const mosaic::BayerPattern& pattern);

class Restorer {
 public:
  virtual ~Restorer() = default;
  virtual Image restore(const mosaic::MosaicSample& sample) = 0;
  virtual std::string name() const = 0;
  virtual mosaic::BayerPattern pattern() const { return mosaic::BayerPattern::rggb(); }
};

class BilinearRestorer : public Restorer {
 public:
  explicit BilinearRestorer(mosaic::BayerPattern pattern = mosaic::BayerPattern::rggb()) : pattern_(pattern) {}
  Image restore(const mosaic::MosaicSample& sample) override;
  std::string name() const override { return "bilinear"; }
  mosaic::BayerPattern pattern() const override { return pattern_; }

 private:
  mosaic::BayerPattern pattern_;
};

// Runs RestoreNet without recording gradients.
class NetRestorer : public Restorer {
 public:
  NetRestorer(models::RestoreNet* net, mosaic::BayerPattern pattern, std::string id)
      : net_(net), pattern_(pattern), id_(std::move(id)) {}
  Image restore(const mosaic::MosaicSample& sample) override;
  std::string name() const override { return id_; }
  mosaic::BayerPattern pattern() const override { return pattern_; }

 private:
  models::RestoreNet* net_;
  mosaic::BayerPattern pattern_;
  std::string id_;
};

// A RestoreNet rebuilt from a checkpoint. Only `restorenet.*` tensors are read;
// anything else in the file (selector weights, optimizer state) is ignored.
class CheckpointRestorer : public Restorer {
 public:
  explicit CheckpointRestorer(const std::vector<std::uint8_t>& checkpoint_bytes);
  static std::unique_ptr<CheckpointRestorer> load(const std::string& path);

  Image restore(const mosaic::MosaicSample& sample) override;
  std::string name() const override { return id_; }
  mosaic::BayerPattern pattern() const override { return pattern_; }
  const training::TrainRun& run() const { return run_; }

 private:
  training::TrainRun run_;
  models::RestoreNet net_;
  mosaic::BayerPattern pattern_;
  std::string id_;
};

// Images of one split held in memory, in manifest order.
struct EvalSet {
  std::vector<std::string> names;
  std::vector<corpus::Difficulty> labels;
  std::vector<Image> images;

  std::size_t size() const { return images.size(); }
};

EvalSet load_eval_set(const corpus::CorpusManifest& manifest, corpus::Split split);

struct ImageScore {
  std::string name;
  corpus::Difficulty label = corpus::Difficulty::kEasy;
  double psnr = 0.0;
};

struct SigmaRow {
  double sigma = 0.0;  // 8-bit scale
  std::vector<ImageScore> images;
  std::vector<double> patch_psnr;  // every usable patch of every image, in order
  double mean = 0.0;
  double mean_easy = 0.0;  // NaN when the subset is empty
  double mean_hard = 0.0;
  std::size_t n_easy = 0;
  std::size_t n_hard = 0;
};

struct EvalReport {
  std::string dataset;
  std::string checkpoint_id;
  std::string timestamp;  // filled by the caller; empty keeps reports byte-stable
  std::vector<SigmaRow> rows;

  // Header comments then one tab-separated row per sigma:
  // sigma, n_images, mean_psnr_dB, n_easy, mean_easy_dB, n_hard, mean_hard_dB
  std::string to_tsv() const;
  // Per-image scores: sigma, name, label, psnr_dB.
  std::string images_tsv() const;
};

struct EvalOptions {
  std::vector<double> sigmas{5.0, 10.0, 15.0};  // 8-bit scale
  std::uint64_t eval_seed = 20200;
  int patch_size = 64;  // grid for the patch-level PSNR list
};

EvalReport evaluate(Restorer& restorer, const EvalSet& set, const EvalOptions& options,
                    const std::string& dataset = "test");

// Spearman rank correlation (average ranks for ties). NaN if either input is
// constant or sizes differ or are < 2.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace patchsel::eval
