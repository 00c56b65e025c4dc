#include "patchsel/training/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "patchsel/autograd/ops.hpp"
#include "patchsel/error.hpp"
#include "patchsel/models/layers.hpp"
#include "patchsel/mosaic/metrics.hpp"
#include "patchsel/seed.hpp"

namespace patchsel::training {

namespace fs = std::filesystem;

namespace {

// Seed-derivation tags, one per random stream.
constexpr std::uint64_t kTagInit = 0x1A17;
constexpr std::uint64_t kTagSigma = 0x5167;
constexpr std::uint64_t kTagNoise = 0x4015;
constexpr std::uint64_t kTagPad = 0x9AD0;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TrainState build(const TrainRun& run) {
  run.validate();
  TrainState s;
  s.run = run;
  s.pattern = mosaic::BayerPattern::parse(run.bayer);
  models::Rng restore_rng(derive_seed(run.seed, {kTagInit, 1}));
  s.restore = std::make_unique<models::RestoreNet>(run.restore, restore_rng);
  s.restore_opt = std::make_unique<ag::Adam>(s.restore->params());
  if (run.uses_patchnet()) {
    const auto cfg = models::PatchNetConfig::make(models::parse_patchnet_variant(run.patchnet_variant),
                                                  run.patch_size, run.temperature, run.patchnet_width_divisor);
    models::Rng patch_rng(derive_seed(run.seed, {kTagInit, 2}));
    s.patchnet = std::make_unique<models::PatchNet>(cfg, patch_rng);
    s.patch_opt = std::make_unique<ag::Adam>(s.patchnet->params());
  }
  return s;
}

void snap_slots(ag::Adam& opt) {
  for (auto& slot : opt.slots()) {
    models::snap_to_float32(slot.m);
    models::snap_to_float32(slot.v);
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<ag::Pad4> pads_of(const std::vector<corpus::PatchGrid>& grids) {
  std::vector<ag::Pad4> pads;
  for (const auto& g : grids) pads.push_back({g.pad_top, g.pad_bottom, g.pad_left, g.pad_right});
  return pads;
}

// Flat indices into the (N,1,rows,cols) trainability map of each loss patch.
std::vector<std::size_t> map_indices(const std::vector<PatchRef>& refs, const std::vector<corpus::PatchGrid>& grids,
                                     const Tensor& map) {
  const std::size_t rows = map.dim(2), cols = map.dim(3);
  for (const auto& g : grids) {
    if (static_cast<std::size_t>(g.rows) != rows || static_cast<std::size_t>(g.cols) != cols) {
      throw InternalError("trainability map does not match the patch grid");
    }
  }
  std::vector<std::size_t> idx;
  idx.reserve(refs.size());
  for (const auto& r : refs) idx.push_back(r.item * rows * cols + r.patch);
  return idx;
}

std::vector<double> batch_patch_psnr(const Tensor& pred, const Batch& batch) {
  std::vector<double> out;
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const auto p = per_patch_psnr(models::tensor_to_image(pred, i), batch.samples[i].ground_truth, batch.grids[i]);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

struct Validation {
  double psnr_easy = kNaN;
  double psnr_hard = kNaN;
  double t_easy = kNaN;
  double t_hard = kNaN;
};

double mean_or_nan(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : kNaN; }

// Shared by validation and score_patches: restore each image at the evaluation
// degradation, record full-image PSNR and, with PatchNet, per-patch scores.
template <typename OnImage, typename OnPatch>
void sweep(TrainState& state, const eval::EvalSet& set, double sigma_8bit, std::uint64_t eval_seed,
           OnImage on_image, OnPatch on_patch) {
  ag::NoGradGuard guard;
  eval::NetRestorer restorer(state.restore.get(), state.pattern, "train");
  const int k = state.run.patch_size;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Image& gt = set.images[i];
    const auto sample = eval::eval_sample(gt, i, sigma_8bit, eval_seed, state.pattern);
    const Image pred = restorer.restore(sample);
    on_image(set.labels[i], mosaic::psnr(pred, gt));
    if (!state.patchnet) continue;
    const auto grid = corpus::make_patch_grid(gt.height, gt.width, k, false, 0);
    const Tensor padded = ag::pad2d(models::image_to_tensor(pred), pads_of({grid}));
    const Tensor t = state.patchnet->forward(padded, false);
    const auto mse = per_patch_mse(pred, gt, grid);
    const auto psnr = per_patch_psnr(pred, gt, grid);
    std::size_t j = 0;
    for (std::size_t p = 0; p < grid.patches.size(); ++p) {
      if (!grid.usable(grid.patches[p])) continue;
      on_patch(PatchScore{set.labels[i], t.at(p), mse[j], psnr[j]});
      ++j;
    }
  }
}

Validation validate(TrainState& state, const eval::EvalSet& val) {
  double pe = 0, ph = 0, te = 0, th = 0;
  std::size_t npe = 0, nph = 0, nte = 0, nth = 0;
  sweep(
      state, val, state.run.val_sigma, state.run.eval_seed,
      [&](corpus::Difficulty label, double psnr) {
        if (label == corpus::Difficulty::kHard) {
          ph += psnr;
          ++nph;
        } else {
          pe += psnr;
          ++npe;
        }
      },
      [&](const PatchScore& s) {
        if (s.label == corpus::Difficulty::kHard) {
          th += s.t;
          ++nth;
        } else {
          te += s.t;
          ++nte;
        }
      });
  return {mean_or_nan(pe, npe), mean_or_nan(ph, nph), mean_or_nan(te, nte), mean_or_nan(th, nth)};
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' into place: " + ec.message());
}

// Keeps metric lines of epochs <= `upto` from an existing log (resume).
std::vector<std::string> previous_lines(const std::string& path, int upto) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch", 0) == 0) continue;
    int e = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), e);
    if (ec == std::errc() && e <= upto) lines.push_back(line);
  }
  return lines;
}

}  // namespace

TrainState TrainState::create(const TrainRun& run) {
  TrainState s = build(run);
  if (!run.init_checkpoint.empty()) {
    const Checkpoint init = load_checkpoint(run.init_checkpoint);
    restore_tensors(init, s.restore->params());
  }
  return s;
}

TrainState TrainState::from_checkpoint(const Checkpoint& ckpt) {
  TrainState s = build(TrainRun::parse(ckpt.config_text));
  restore_tensors(ckpt, s.restore->params());
  restore_optimizer(ckpt, *s.restore_opt);
  if (s.patchnet) {
    if (!ckpt.has_prefix("patchnet.")) throw ConfigError("checkpoint of a patchnet run has no PatchNet weights");
    restore_tensors(ckpt, s.patchnet->params());
    restore_tensors(ckpt, s.patchnet->buffers());
    restore_optimizer(ckpt, *s.patch_opt);
  }
  s.epoch = static_cast<int>(ckpt.epoch);
  s.global_step = ckpt.global_step;
  return s;
}

Checkpoint TrainState::to_checkpoint() const {
  Checkpoint c;
  c.config_text = run.to_text();
  for (const auto& p : restore->params()) c.tensors.push_back(store_tensor(p));
  store_optimizer(*restore_opt, c.optimizer);
  if (patchnet) {
    for (const auto& p : patchnet->params()) c.tensors.push_back(store_tensor(p));
    for (const auto& b : patchnet->buffers()) c.tensors.push_back(store_tensor(b));
    store_optimizer(*patch_opt, c.optimizer);
  }
  c.epoch = static_cast<std::uint32_t>(epoch);
  c.rng_seed = run.seed;
  c.global_step = global_step;
  return c;
}

void TrainState::snap_to_float32() {
  for (auto& p : restore->params()) models::snap_to_float32(p.tensor.data());
  snap_slots(*restore_opt);
  if (patchnet) {
    for (auto& p : patchnet->params()) models::snap_to_float32(p.tensor.data());
    for (auto& b : patchnet->buffers()) models::snap_to_float32(b.tensor.data());
    snap_slots(*patch_opt);
  }
}

void add_to_batch(Batch& batch, const TrainRun& run, const mosaic::BayerPattern& pattern, const Image& image,
                  corpus::Difficulty label, std::size_t source, std::size_t index, int epoch) {
  const auto e = static_cast<std::uint64_t>(epoch);
  std::mt19937_64 sigma_rng(derive_seed(run.seed, {kTagSigma, source, index, e}));
  const double sigma8 = std::uniform_real_distribution<double>(run.sigma_min, run.sigma_max)(sigma_rng);
  batch.samples.push_back(mosaic::make_sample(image, mosaic::sigma_from_8bit(sigma8), pattern,
                                              derive_seed(run.seed, {kTagNoise, source, index, e})));
  batch.grids.push_back(corpus::make_patch_grid(image.height, image.width, run.patch_size, run.augment,
                                                derive_seed(run.seed, {kTagPad, source, index, e})));
  batch.labels.push_back(label);
}

double epoch_threshold(const TrainRun& run, int epoch) {
  if (!run.hnm_schedule) return run.hnm_threshold;
  const int last = std::max(1, run.epochs - 1);
  return hnm_threshold(std::min(epoch, last), last, run.hnm_start, run.hnm_end);
}

StepResult train_step(TrainState& state, const Batch& batch, double lr, int epoch) {
  const TrainRun& run = state.run;
  if (batch.samples.empty()) throw UsageError("train_step: empty batch");
  state.restore_opt->zero_grad();
  if (state.patch_opt) state.patch_opt->zero_grad();

  std::vector<const mosaic::MosaicSample*> ptrs;
  std::vector<const Image*> gts;
  for (const auto& s : batch.samples) {
    ptrs.push_back(&s);
    gts.push_back(&s.ground_truth);
  }
  const Tensor pred = state.restore->forward(models::restorenet_input(ptrs, run.restore.sigma_conditioning));
  const PatchLosses pl = per_patch_loss(pred, gts, batch.grids);

  StepResult result;
  const std::uint64_t step = state.global_step;
  if (pl.refs.empty()) {
    result.skipped = true;
    return result;
  }
  const std::size_t m = pl.refs.size();

  switch (run.mode) {
    case TrainMode::kUniform: {
      auto rw = reweighted_loss(pl.losses, Tensor::full({m}, 1.0), 1e-8, step);
      ag::backward(rw.total);
      state.restore_opt->step(lr);
      result.record = std::move(rw.record);
      break;
    }
    case TrainMode::kHnm: {
      const auto w = hnm_weights(batch_patch_psnr(pred, batch), epoch_threshold(run, epoch));
      if (w.size() != m) throw InternalError("per-patch PSNR count does not match loss count");
      auto rw = reweighted_loss(pl.losses, Tensor::from({m}, w), 1e-8, step);
      result.record = std::move(rw.record);
      if (result.record.zero_sum) {
        result.skipped = true;
        break;
      }
      ag::backward(rw.total);
      state.restore_opt->step(lr);
      break;
    }
    case TrainMode::kPatchNet: {
      const bool regress = run.objective == Objective::kRegress;
      Tensor padded = ag::pad2d(pred, pads_of(batch.grids));
      if (run.detach_input || regress) padded = padded.detach();
      const Tensor logits = state.patchnet->logits(padded, true);
      const auto idx = map_indices(pl.refs, batch.grids, logits);
      const Tensor t_map = ag::tempered_sigmoid(logits, run.temperature);
      const Tensor t = ag::gather(t_map, idx);
      const double patch_lr = lr * run.patchnet_lr_scale;
      if (regress) {
        auto rw = reweighted_loss(pl.losses, t.detach(), 1e-8, step);
        const auto psnr = batch_patch_psnr(pred, batch);
        std::vector<double> target(psnr.size());
        const double thr = epoch_threshold(run, epoch);
        for (std::size_t i = 0; i < psnr.size(); ++i) target[i] = psnr[i] < thr ? 1.0 : 0.0;
        const Tensor bce = bce_with_logits(ag::gather(logits, idx), target, run.temperature);
        if (!std::isfinite(bce.item())) throw NumericError("non-finite selector loss at step " + std::to_string(step));
        ag::backward(rw.total);
        ag::backward(bce);
        state.restore_opt->step(lr);
        state.patch_opt->step(patch_lr);
        result.selector_loss = bce.item();
        result.record = std::move(rw.record);
      } else {
        auto rw = reweighted_loss(pl.losses, t, 1e-8, step);
        ag::backward(rw.total);
        state.restore_opt->step(lr);
        state.patch_opt->step(patch_lr, run.objective == Objective::kMax);
        result.record = std::move(rw.record);
      }
      result.zero_sum = result.record.zero_sum;
      break;
    }
  }
  ++state.global_step;
  return result;
}

std::string metrics_header() {
  return "epoch\tlr\ttrain_loss\tval_psnr_easy_dB\tval_psnr_hard_dB\tmean_t_easy\tmean_t_hard\tskipped_batches";
}

std::string EpochMetrics::to_tsv_line() const {
  std::ostringstream os;
  os << epoch << '\t' << fmt(lr) << '\t' << fmt(train_loss) << '\t' << fmt(val_psnr_easy) << '\t'
     << fmt(val_psnr_hard) << '\t' << fmt(mean_t_easy) << '\t' << fmt(mean_t_hard) << '\t' << skipped_batches;
  return os.str();
}

std::vector<PatchScore> score_patches(TrainState& state, const eval::EvalSet& set, double sigma_8bit,
                                      std::uint64_t eval_seed) {
  if (!state.patchnet) throw ConfigError("score_patches: run has no PatchNet");
  std::vector<PatchScore> out;
  sweep(
      state, set, sigma_8bit, eval_seed, [](corpus::Difficulty, double) {},
      [&](const PatchScore& s) { out.push_back(s); });
  return out;
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_e%03d.pfck", epoch);
  return buf;
}

TrainResult train_loop(TrainState& state, const std::vector<corpus::CorpusManifest>& train_sources,
                       const eval::EvalSet& val, const TrainOptions& options) {
  const TrainRun& run = state.run;
  if (train_sources.empty()) throw ConfigError("train_loop: no training corpus");
  std::vector<int> oversample = run.oversample;
  if (oversample.empty()) oversample.assign(train_sources.size(), 1);
  if (oversample.size() != train_sources.size()) {
    throw ConfigError("train_loop: " + std::to_string(oversample.size()) + " oversample factors for " +
                      std::to_string(train_sources.size()) + " corpora");
  }

  std::vector<std::vector<Image>> images(train_sources.size());
  std::vector<std::vector<corpus::Difficulty>> labels(train_sources.size());
  std::vector<std::size_t> sizes;
  for (std::size_t s = 0; s < train_sources.size(); ++s) {
    for (const auto& e : train_sources[s].split(corpus::Split::kTrain)) {
      images[s].push_back(corpus::load_entry(train_sources[s], e));
      labels[s].push_back(e.label);
    }
    sizes.push_back(images[s].size());
  }
  std::size_t total_images = 0;
  for (auto n : sizes) total_images += n;
  if (total_images == 0) throw ConfigError("train_loop: training split is empty");

  TrainResult result;
  const bool write = !options.out_dir.empty();
  std::vector<std::string> log_lines;
  const std::string metrics_path = write ? (fs::path(options.out_dir) / "metrics.tsv").string() : "";
  if (write) {
    fs::create_directories(options.out_dir);
    log_lines = previous_lines(metrics_path, state.epoch);
  }

  const ag::LrSchedule sched{run.base_lr, run.epochs};
  const int last_epoch = options.stop_after_epoch >= 0 ? std::min(options.stop_after_epoch, run.epochs) : run.epochs;
  for (int epoch = state.epoch; epoch < last_epoch; ++epoch) {
    const double lr = ag::cosine_lr(epoch, sched);
    const auto stream = corpus::sample_stream(sizes, oversample, run.seed, epoch);
    EpochMetrics em;
    em.epoch = epoch + 1;
    em.lr = lr;
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (std::size_t pos = 0; pos < stream.size(); pos += static_cast<std::size_t>(run.batch_size)) {
      Batch batch;
      const std::size_t end = std::min(stream.size(), pos + static_cast<std::size_t>(run.batch_size));
      for (std::size_t j = pos; j < end; ++j) {
        const auto& it = stream[j];
        add_to_batch(batch, run, state.pattern, images[it.source][it.index], labels[it.source][it.index], it.source,
                     it.index, epoch);
      }
      StepResult sr;
      try {
        sr = train_step(state, batch, lr, epoch);
      } catch (const NumericError& err) {
        if (write) save_checkpoint(state.to_checkpoint(), (fs::path(options.out_dir) / "abort.pfck").string());
        throw NumericError(std::string(err.what()) + " (epoch " + std::to_string(epoch + 1) + ", batch at stream position " +
                           std::to_string(pos) + "; state saved to abort.pfck)");
      }
      ++result.steps;
      if (sr.skipped) {
        ++em.skipped_batches;
      } else {
        loss_sum += sr.record.total;
        ++loss_n;
      }
      if (options.on_step) options.on_step(sr);
    }
    state.epoch = epoch + 1;
    state.snap_to_float32();
    em.train_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : kNaN;
    if (val.size() > 0) {
      const Validation v = validate(state, val);
      em.val_psnr_easy = v.psnr_easy;
      em.val_psnr_hard = v.psnr_hard;
      em.mean_t_easy = v.t_easy;
      em.mean_t_hard = v.t_hard;
    } else {
      em.val_psnr_easy = em.val_psnr_hard = em.mean_t_easy = em.mean_t_hard = kNaN;
    }
    result.metrics.push_back(em);
    log_lines.push_back(em.to_tsv_line());
    if (options.verbose) std::cerr << "[" << to_string(run.mode) << "] " << em.to_tsv_line() << "\n";

    if (write) {
      const Checkpoint ckpt = state.to_checkpoint();
      const std::string last = (fs::path(options.out_dir) / "last.pfck").string();
      if (run.keep_all_checkpoints) save_checkpoint(ckpt, (fs::path(options.out_dir) / checkpoint_name(state.epoch)).string());
      save_checkpoint(ckpt, last);
      result.final_checkpoint = last;
      std::string text = metrics_header() + "\n";
      for (const auto& l : log_lines) text += l + "\n";
      write_text_atomic(metrics_path, text);
    }
  }
  return result;
}

}  // namespace patchsel::training
