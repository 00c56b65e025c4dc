#include "patchsel/eval/maps.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "patchsel/autograd/ops.hpp"
#include "patchsel/corpus/patch_grid.hpp"
#include "patchsel/error.hpp"

namespace patchsel::eval {

namespace fs = std::filesystem;

std::uint8_t encode_trainability(double t) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

double decode_trainability(std::uint8_t v) { return static_cast<double>(v) / 255.0; }

corpus::GrayMap trainability_graymap(const models::TrainabilityMap& map) {
  corpus::GrayMap g;
  g.height = map.rows;
  g.width = map.cols;
  for (double t : map.values) g.pixels.push_back(encode_trainability(t));
  return g;
}

Image overlay_image(const Image& restored, const models::TrainabilityMap& map, double tint) {
  Image out = restored;
  const int k = map.patch_size;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int r = (y + map.origin_y) / k, c = (x + map.origin_x) / k;
      const int channel = map.at(r, c) >= 0.5 ? 2 : 1;
      double& v = out.at(channel, y, x);
      v = std::clamp(v, 0.0, 1.0) + tint;
      v = std::min(v, 1.0);
    }
  }
  return out;
}

std::vector<MapExport> export_maps(training::TrainState& state, const EvalSet& set, const std::string& out_dir,
                                   double sigma_8bit, std::uint64_t eval_seed) {
  if (!state.patchnet) throw ConfigError("export_maps: checkpoint has no PatchNet weights");
  if (!out_dir.empty()) fs::create_directories(out_dir);
  ag::NoGradGuard guard;
  NetRestorer restorer(state.restore.get(), state.pattern, "maps");
  const int k = state.run.patch_size;
  std::vector<MapExport> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Image& gt = set.images[i];
    const auto sample = eval_sample(gt, i, sigma_8bit, eval_seed, state.pattern);
    const Image pred = restorer.restore(sample);
    const auto grid = corpus::make_patch_grid(gt.height, gt.width, k, false, 0);
    const ag::Tensor padded =
        ag::pad2d(models::image_to_tensor(pred), {{grid.pad_top, grid.pad_bottom, grid.pad_left, grid.pad_right}});
    auto scored = models::patchnet_forward(*state.patchnet, padded, true, false, {{grid.pad_top, grid.pad_left}});
    MapExport e;
    e.image = set.names[i];
    e.label = set.labels[i];
    e.map = std::move(scored.maps.front());
    for (double t : e.map.values) e.kept.push_back(t >= 0.5);
    e.epoch = state.epoch;
    if (!out_dir.empty()) {
      fs::path rel(e.image);
      std::string stem = rel.stem().string();
      if (rel.has_parent_path()) stem = rel.parent_path().filename().string() + "_" + stem;
      corpus::write_graymap(trainability_graymap(e.map), (fs::path(out_dir) / (stem + "_tmap.pgm")).string());
      corpus::write_image(overlay_image(pred, e.map), (fs::path(out_dir) / (stem + "_overlay.ppm")).string(), 8);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace patchsel::eval
