#pragma once

#include <string>
#include <vector>

#include "patchsel/corpus/pnm.hpp"
#include "patchsel/eval/evaluate.hpp"
#include "patchsel/models/patchnet.hpp"
#include "patchsel/training/trainer.hpp"

namespace patchsel::eval {

// t in [0,1] to an 8-bit gray level, rounded.
std::uint8_t encode_trainability(double t);
double decode_trainability(std::uint8_t v);

corpus::GrayMap trainability_graymap(const models::TrainabilityMap& map);

// The restored image with every kept patch (t >= 0.5) tinted blue and every
// ignored one tinted green.
Image overlay_image(const Image& restored, const models::TrainabilityMap& map, double tint = 0.35);

struct MapExport {
  std::string image;  // manifest path
  corpus::Difficulty label = corpus::Difficulty::kEasy;
  models::TrainabilityMap map;
  std::vector<bool> kept;  // t >= 0.5, row-major
  int epoch = 0;
};

// For every image of `set`: restore at the evaluation degradation, score with
// PatchNet and, if `out_dir` is non-empty, write `<img>_tmap.pgm` and
// `<img>_overlay.ppm` there (`<img>` is the file stem, prefixed by the split).
// Throws ConfigError if the state carries no PatchNet.
std::vector<MapExport> export_maps(training::TrainState& state, const EvalSet& set, const std::string& out_dir,
                                   double sigma_8bit, std::uint64_t eval_seed);

}  // namespace patchsel::eval
