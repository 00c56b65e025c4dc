#include "patchsel/training/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "patchsel/error.hpp"
#include "patchsel/mosaic/metrics.hpp"

namespace patchsel::training {

namespace {

struct Span2 {
  int y_begin, y_end, x_begin, x_end;  // image coordinates, half-open
};

Span2 image_span(const corpus::PatchGrid& g, const corpus::Patch& p) {
  const int k = g.patch_size;
  return {std::max(p.y0, g.pad_top) - g.pad_top, std::min(p.y0 + k, g.pad_top + g.image_height) - g.pad_top,
          std::max(p.x0, g.pad_left) - g.pad_left, std::min(p.x0 + k, g.pad_left + g.image_width) - g.pad_left};
}

void check_grid(const corpus::PatchGrid& g, int h, int w) {
  if (g.image_height != h || g.image_width != w) {
    throw ShapeError("patch grid built for " + std::to_string(g.image_height) + "x" + std::to_string(g.image_width) +
                     " but image is " + std::to_string(h) + "x" + std::to_string(w));
  }
}

template <typename F>
double patch_sq_err(const double* a, const double* b, int h, int w, const Span2& s, F transform) {
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  long double acc = 0.0L;  // same accumulator as mosaic::clamped_mse
  for (int c = 0; c < 3; ++c) {
    for (int y = s.y_begin; y < s.y_end; ++y) {
      const std::size_t row = c * plane + static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
      for (int x = s.x_begin; x < s.x_end; ++x) {
        const double d = transform(a[row + x]) - transform(b[row + x]);
        acc += static_cast<long double>(d * d);
      }
    }
  }
  return static_cast<double>(acc);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
double identity(double v) { return v; }

}  // namespace

PatchLosses per_patch_loss(const Tensor& pred, const std::vector<const Image*>& gt,
                           const std::vector<corpus::PatchGrid>& grids) {
  if (pred.rank() != 4 || pred.dim(1) != 3) throw ShapeError("per_patch_loss: pred must be (N,3,H,W)");
  const std::size_t n = pred.dim(0);
  const int h = static_cast<int>(pred.dim(2)), w = static_cast<int>(pred.dim(3));
  if (gt.size() != n || grids.size() != n) throw ShapeError("per_patch_loss: one ground truth and grid per item");
  const std::size_t item_size = 3 * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);

  PatchLosses out;
  std::vector<double> values;
  std::vector<Span2> spans;
  std::vector<double> counts;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt[i]->height != h || gt[i]->width != w) throw ShapeError("per_patch_loss: ground truth size mismatch");
    check_grid(grids[i], h, w);
    const double* a = pred.data().data() + i * item_size;
    const double* b = gt[i]->data.data();
    for (std::size_t p = 0; p < grids[i].patches.size(); ++p) {
      const auto& patch = grids[i].patches[p];
      if (patch.valid_pixels == 0 || !grids[i].usable(patch)) continue;
      const Span2 s = image_span(grids[i], patch);
      const double count = 3.0 * patch.valid_pixels;
      values.push_back(patch_sq_err(a, b, h, w, s, identity) / count);
      spans.push_back(s);
      counts.push_back(count);
      out.refs.push_back({i, p});
    }
  }

  std::vector<double> gt_flat(n * item_size);
  for (std::size_t i = 0; i < n; ++i) std::copy(gt[i]->data.begin(), gt[i]->data.end(), gt_flat.begin() + i * item_size);

  const auto refs = out.refs;
  const std::size_t m = values.size();
  out.losses = ag::make_result(
      {m}, std::move(values), {pred},
      [pred, refs, spans, counts, gt_flat = std::move(gt_flat), h, w, item_size](const ag::TensorImpl& o) {
        auto& g = pred.impl()->grad_buffer();
        const auto& x = pred.impl()->data;
        const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
        for (std::size_t j = 0; j < refs.size(); ++j) {
          const double coef = 2.0 * o.grad[j] / counts[j];
          if (coef == 0.0) continue;
          const std::size_t base = refs[j].item * item_size;
          const Span2& s = spans[j];
          for (int c = 0; c < 3; ++c) {
            for (int y = s.y_begin; y < s.y_end; ++y) {
              const std::size_t row = base + c * plane + static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
              for (int xx = s.x_begin; xx < s.x_end; ++xx) g[row + xx] += coef * (x[row + xx] - gt_flat[row + xx]);
            }
          }
        }
      },
      "per_patch_loss");
  return out;
}

std::vector<double> per_patch_mse(const Image& pred, const Image& gt, const corpus::PatchGrid& grid) {
  if (pred.height != gt.height || pred.width != gt.width) throw ShapeError("per_patch_mse: size mismatch");
  check_grid(grid, pred.height, pred.width);
  std::vector<double> out;
  for (const auto& p : grid.patches) {
    if (p.valid_pixels == 0 || !grid.usable(p)) continue;
    out.push_back(patch_sq_err(pred.data.data(), gt.data.data(), pred.height, pred.width, image_span(grid, p),
                               identity) /
                  (3.0 * p.valid_pixels));
  }
  return out;
}

std::vector<double> per_patch_psnr(const Image& pred, const Image& gt, const corpus::PatchGrid& grid) {
  if (pred.height != gt.height || pred.width != gt.width) throw ShapeError("per_patch_psnr: size mismatch");
  check_grid(grid, pred.height, pred.width);
  std::vector<double> out;
  for (const auto& p : grid.patches) {
    if (p.valid_pixels == 0 || !grid.usable(p)) continue;
    const double mse = patch_sq_err(pred.data.data(), gt.data.data(), pred.height, pred.width, image_span(grid, p),
                                    clamp01) /
                       (3.0 * p.valid_pixels);
    out.push_back(mosaic::psnr_from_mse(mse));
  }
  return out;
}

Reweighted reweighted_loss(const Tensor& losses, const Tensor& t, double eps, std::uint64_t step) {
  if (losses.numel() == 0) throw ShapeError("reweighted_loss: no patches");
  if (losses.numel() != t.numel()) {
    throw ShapeError("reweighted_loss: " + std::to_string(losses.numel()) + " losses vs " + std::to_string(t.numel()) +
                     " trainabilities");
  }
  const auto l = losses.data();
  const auto tv = t.data();
  const std::size_t n = l.size();
  double s = 0.0, num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(l[i]) || !std::isfinite(tv[i])) {
      throw NumericError("non-finite patch loss or trainability at step " + std::to_string(step) + " (patch " +
                         std::to_string(i) + ": L=" + std::to_string(l[i]) + ", t=" + std::to_string(tv[i]) + ")");
    }
    s += tv[i];
    num += tv[i] * l[i];
  }
  const double denom = s + eps;
  const double total = num / denom;
  if (!std::isfinite(total)) throw NumericError("non-finite reweighted loss at step " + std::to_string(step));

  Reweighted out;
  LossRecord& r = out.record;
  r.patch_losses.assign(l.begin(), l.end());
  r.trainability.assign(tv.begin(), tv.end());
  // the record keeps the eps-free normalisation (sums to N); all zero when sum t is 0
  r.weights.assign(n, 0.0);
  if (s > 0.0)
    for (std::size_t i = 0; i < n; ++i) r.weights[i] = static_cast<double>(n) * tv[i] / s;
  r.total = total;
  r.weight_sum = s;
  r.zero_sum = (s == 0.0);
  r.step = step;

  out.total = ag::make_result(
      {1}, {total}, {losses, t},
      [losses, t, denom, total](const ag::TensorImpl& o) {
        const double g = o.grad[0];
        const auto& lv = losses.impl()->data;
        const auto& tw = t.impl()->data;
        if (losses.requires_grad()) {
          auto& gl = losses.impl()->grad_buffer();
          for (std::size_t i = 0; i < lv.size(); ++i) gl[i] += g * tw[i] / denom;
        }
        if (t.requires_grad()) {
          auto& gt = t.impl()->grad_buffer();
          for (std::size_t i = 0; i < lv.size(); ++i) gt[i] += g * (lv[i] - total) / denom;
        }
      },
      "reweighted_loss");
  return out;
}

std::vector<double> hnm_weights(const std::vector<double>& psnr_db, double threshold_db) {
  std::vector<double> w(psnr_db.size());
  for (std::size_t i = 0; i < psnr_db.size(); ++i) w[i] = psnr_db[i] < threshold_db ? 1.0 : 0.0;
  return w;
}

double hnm_threshold(int epoch, int total_epochs, double start_db, double end_db) {
  if (total_epochs < 1) throw ConfigError("hnm_threshold: total_epochs must be >= 1");
  if (epoch < 0 || epoch > total_epochs) {
    throw ConfigError("hnm_threshold: epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(total_epochs) + "]");
  }
  const double f = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return start_db + (end_db - start_db) * f;
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("bce_with_logits: temperature must be positive");
  if (logits.numel() != targets.size() || targets.empty()) throw ShapeError("bce_with_logits: size mismatch");
  const auto z = logits.data();
  const double n = static_cast<double>(targets.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double a = temperature * z[i];
    // softplus(a) - y a
    acc += std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))) - targets[i] * a;
  }
  return ag::make_result(
      {1}, {acc / n}, {logits},
      [logits, targets, temperature, n](const ag::TensorImpl& o) {
        auto& g = logits.impl()->grad_buffer();
        const auto& zz = logits.impl()->data;
        for (std::size_t i = 0; i < targets.size(); ++i) {
          const double s = 1.0 / (1.0 + std::exp(-temperature * zz[i]));
          g[i] += o.grad[0] * temperature * (s - targets[i]) / n;
        }
      },
      "bce_with_logits");
}

}  // namespace patchsel::training
