#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchsel/corpus/generator.hpp"
#include "patchsel/image.hpp"

namespace patchsel::corpus {

enum class Split { kTrain, kVal, kTest };
enum class Difficulty { kEasy, kHard };

std::string to_string(Split s);
Split parse_split(const std::string& s);
std::string to_string(Difficulty d);

struct ManifestEntry {
  std::string path;  // relative to the corpus root, e.g. "train/img_0003.ppm"
  Difficulty label = Difficulty::kEasy;
  ImageKind kind = ImageKind::kFlat;
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
};

// Contents of `<root>/manifest.tsv`: one tab-separated line per image with
// path, label, kind, seed. The split is the first path component.
struct CorpusManifest {
  std::string root;
  std::uint64_t global_seed = 0;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(Split s) const;
  std::string full_path(const ManifestEntry& e) const;
};

CorpusManifest read_manifest(const std::string& root);
void write_manifest(const CorpusManifest& manifest);

struct CorpusOptions {
  int n_train = 200;
  int n_val = 40;
  int n_test = 40;
  double hard_fraction = 0.2;
  std::uint64_t seed = 0;
  int height = 192;
  int width = 192;
};

// Renders every image, writes the files and the manifest under `root`.
CorpusManifest generate_corpus(const std::string& root, const CorpusOptions& options);

// Re-renders an entry from its kind and seed (no file I/O).
Image render_entry(const ManifestEntry& e, int height, int width);
Image load_entry(const CorpusManifest& manifest, const ManifestEntry& e);

struct StreamItem {
  std::size_t source = 0;  // which manifest
  std::size_t index = 0;   // item within it
};

// One epoch of training order: item j of source i appears oversample[i] times,
// shuffled by a permutation derived from (seed, epoch).
std::vector<StreamItem> sample_stream(const std::vector<std::size_t>& sizes, const std::vector<int>& oversample,
                                      std::uint64_t seed, int epoch);

}  // namespace patchsel::corpus
