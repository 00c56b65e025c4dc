#include "patchsel/corpus/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "patchsel/corpus/pnm.hpp"
#include "patchsel/error.hpp"
#include "patchsel/seed.hpp"

namespace patchsel::corpus {

namespace fs = std::filesystem;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "'");
}

std::string to_string(Difficulty d) { return d == Difficulty::kEasy ? "easy" : "hard"; }

std::vector<ManifestEntry> CorpusManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

std::string CorpusManifest::full_path(const ManifestEntry& e) const { return (fs::path(root) / e.path).string(); }

CorpusManifest read_manifest(const std::string& root) {
  const std::string path = (fs::path(root) / "manifest.tsv").string();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  CorpusManifest m;
  m.root = root;
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("seed=");
      if (pos != std::string::npos) m.global_seed = std::stoull(line.substr(pos + 5));
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": expected 4 tab-separated columns");
    }
    ManifestEntry e;
    e.path = cols[0];
    if (cols[1] == "easy") {
      e.label = Difficulty::kEasy;
    } else if (cols[1] == "hard") {
      e.label = Difficulty::kHard;
    } else {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": label must be easy|hard");
    }
    e.kind = parse_image_kind(cols[2]);
    e.seed = std::stoull(cols[3]);
    const auto slash = e.path.find('/');
    if (slash == std::string::npos) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": path lacks a split directory");
    }
    e.split = parse_split(e.path.substr(0, slash));
    if (!seen.insert(e.path).second) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": duplicate path " + e.path);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const CorpusManifest& manifest) {
  const std::string path = (fs::path(manifest.root) / "manifest.tsv").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << "# seed=" << manifest.global_seed << "\n";
  out << "# path\tlabel\tkind\tseed\n";
  for (const auto& e : manifest.entries) {
    out << e.path << '\t' << to_string(e.label) << '\t' << to_string(e.kind) << '\t' << e.seed << '\n';
  }
}

Image render_entry(const ManifestEntry& e, int height, int width) {
  return gen_image(random_spec(e.kind, height, width, e.seed));
}

Image load_entry(const CorpusManifest& manifest, const ManifestEntry& e) {
  return read_image(manifest.full_path(e));
}

CorpusManifest generate_corpus(const std::string& root, const CorpusOptions& o) {
  if (o.n_train < 0 || o.n_val < 0 || o.n_test < 0) throw ConfigError("corpus sizes must be >= 0");
  if (o.hard_fraction < 0.0 || o.hard_fraction > 1.0) throw ConfigError("hard fraction must lie in [0,1]");
  if (o.height <= 0 || o.width <= 0 || o.height % 2 || o.width % 2) {
    throw ConfigError("corpus image size must be positive and even");
  }
  static constexpr ImageKind kEasyKinds[] = {ImageKind::kFlat, ImageKind::kGradient, ImageKind::kSmoothNoise};
  static constexpr ImageKind kHardKinds[] = {ImageKind::kSinusoid, ImageKind::kCheckerboard, ImageKind::kStripes,
                                             ImageKind::kMixedCollage};
  CorpusManifest m;
  m.root = root;
  m.global_seed = o.seed;
  const std::pair<Split, int> splits[] = {{Split::kTrain, o.n_train}, {Split::kVal, o.n_val}, {Split::kTest, o.n_test}};
  for (const auto& [split, count] : splits) {
    fs::create_directories(fs::path(root) / to_string(split));
    const auto n = static_cast<std::size_t>(count);
    const auto n_hard = static_cast<std::size_t>(std::lround(o.hard_fraction * count));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(o.seed, {static_cast<std::uint64_t>(split), 1}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> hard(n, false);
    for (std::size_t i = 0; i < n_hard; ++i) hard[order[i]] = true;
    for (std::size_t i = 0; i < n; ++i) {
      ManifestEntry e;
      e.split = split;
      e.seed = derive_seed(o.seed, {static_cast<std::uint64_t>(split), 2, i});
      e.label = hard[i] ? Difficulty::kHard : Difficulty::kEasy;
      e.kind = hard[i] ? kHardKinds[e.seed % 4] : kEasyKinds[e.seed % 3];
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04zu.ppm", i);
      e.path = to_string(split) + "/" + name;
      write_image(render_entry(e, o.height, o.width), m.full_path(e));
      m.entries.push_back(std::move(e));
    }
  }
  write_manifest(m);
  return m;
}

std::vector<StreamItem> sample_stream(const std::vector<std::size_t>& sizes, const std::vector<int>& oversample,
                                      std::uint64_t seed, int epoch) {
  if (sizes.size() != oversample.size()) throw ConfigError("one oversample factor per manifest required");
  std::vector<StreamItem> items;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    if (sizes[s] == 0) throw ConfigError("manifest " + std::to_string(s) + " is empty");
    if (oversample[s] < 1) throw ConfigError("oversample factors must be >= 1");
    for (int rep = 0; rep < oversample[s]; ++rep)
      for (std::size_t i = 0; i < sizes[s]; ++i) items.push_back({s, i});
  }
  std::mt19937_64 rng(derive_seed(seed, {0x5A3B1E, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(items.begin(), items.end(), rng);
  return items;
}

}  // namespace patchsel::corpus
