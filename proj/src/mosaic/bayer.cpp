#include "patchsel/mosaic/bayer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>

#include "patchsel/error.hpp"

namespace patchsel::mosaic {

namespace {

void require_even(int h, int w, const char* op) {
  if (h <= 0 || w <= 0 || h % 2 != 0 || w % 2 != 0) {
    throw ShapeError(std::string(op) + ": dimensions must be positive and even, got " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
}

}  // namespace

BayerPattern BayerPattern::parse(const std::string& name) {
  if (name.size() != 4) throw ConfigError("Bayer pattern must have 4 letters: '" + name + "'");
  BayerPattern p;
  for (std::size_t i = 0; i < 4; ++i) {
    switch (std::toupper(static_cast<unsigned char>(name[i]))) {
      case 'R': p.layout[i] = Channel::kR; break;
      case 'G': p.layout[i] = Channel::kG; break;
      case 'B': p.layout[i] = Channel::kB; break;
      default: throw ConfigError("invalid Bayer pattern letter in '" + name + "'");
    }
  }
  p.validate();
  return p;
}

std::string BayerPattern::name() const {
  std::string s;
  for (auto c : layout) s += "RGB"[static_cast<int>(c)];
  return s;
}

void BayerPattern::validate() const {
  int counts[3] = {0, 0, 0};
  for (auto c : layout) counts[static_cast<int>(c)]++;
  if (counts[0] != 1 || counts[1] != 2 || counts[2] != 1) {
    throw ConfigError("Bayer pattern must contain one R, two G and one B: " + name());
  }
  // The two greens must sit on a diagonal.
  if (layout[0] != Channel::kG && layout[1] != Channel::kG) {
    throw ConfigError("Bayer pattern greens must be diagonal: " + name());
  }
  if ((layout[0] == Channel::kG) != (layout[3] == Channel::kG)) {
    throw ConfigError("Bayer pattern greens must be diagonal: " + name());
  }
}

Image bayer_mask(int height, int width, const BayerPattern& pattern) {
  require_even(height, width, "bayer_mask");
  Image m = Image::zeros(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) m.at(static_cast<int>(pattern.channel_at(y, x)), y, x) = 1.0;
  return m;
}

Plane mosaic_apply(const Image& image, const BayerPattern& pattern) {
  require_even(image.height, image.width, "mosaic_apply");
  Plane raw = Plane::zeros(image.height, image.width);
  bool out_of_range = false;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double v = image.at(static_cast<int>(pattern.channel_at(y, x)), y, x);
      out_of_range = out_of_range || v < 0.0 || v > 1.0;
      raw.at(y, x) = v;
    }
  }
  if (out_of_range) std::fprintf(stderr, "warning: mosaic_apply input has values outside [0,1]\n");
  return raw;
}

Image embed_raw(const Plane& raw, const BayerPattern& pattern) {
  Image img = Image::zeros(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) img.at(static_cast<int>(pattern.channel_at(y, x)), y, x) = raw.at(y, x);
  return img;
}

Plane add_noise(const Plane& raw, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("add_noise: sigma must be >= 0");
  Plane out = raw;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& v : out.data) v += dist(rng);
  return out;
}

MosaicSample make_sample(const Image& ground_truth, double sigma, const BayerPattern& pattern,
                         std::uint64_t seed) {
  MosaicSample s;
  s.ground_truth = ground_truth;
  s.clean_raw = mosaic_apply(ground_truth, pattern);
  s.noisy_raw = add_noise(s.clean_raw, sigma, seed);
  s.sigma = sigma;
  s.pattern = pattern;
  s.seed = seed;
  return s;
}

namespace {

// Offsets (dy, dx) within the 2x2 cell for the packed channel order.
std::array<std::pair<int, int>, 4> pack_offsets(const BayerPattern& p) {
  std::pair<int, int> r{}, b{};
  for (int i = 0; i < 4; ++i) {
    if (p.layout[static_cast<std::size_t>(i)] == Channel::kR) r = {i >> 1, i & 1};
    if (p.layout[static_cast<std::size_t>(i)] == Channel::kB) b = {i >> 1, i & 1};
  }
  // Green sharing a row with R, and green sharing a row with B.
  return {r, std::pair<int, int>{r.first, 1 - r.second}, std::pair<int, int>{b.first, 1 - b.second}, b};
}

}  // namespace

std::vector<double> pack_raw(const Plane& raw, const BayerPattern& pattern) {
  require_even(raw.height, raw.width, "pack_raw");
  const int h2 = raw.height / 2, w2 = raw.width / 2;
  const auto offs = pack_offsets(pattern);
  std::vector<double> out(static_cast<std::size_t>(4 * h2 * w2));
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < h2; ++y)
      for (int x = 0; x < w2; ++x)
        out[static_cast<std::size_t>((c * h2 + y) * w2 + x)] =
            raw.at(2 * y + offs[static_cast<std::size_t>(c)].first, 2 * x + offs[static_cast<std::size_t>(c)].second);
  return out;
}

Plane unpack_raw(const std::vector<double>& packed, int height, int width, const BayerPattern& pattern) {
  require_even(height, width, "unpack_raw");
  const int h2 = height / 2, w2 = width / 2;
  if (packed.size() != static_cast<std::size_t>(4 * h2 * w2)) throw ShapeError("unpack_raw: size mismatch");
  const auto offs = pack_offsets(pattern);
  Plane raw = Plane::zeros(height, width);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < h2; ++y)
      for (int x = 0; x < w2; ++x)
        raw.at(2 * y + offs[static_cast<std::size_t>(c)].first, 2 * x + offs[static_cast<std::size_t>(c)].second) =
            packed[static_cast<std::size_t>((c * h2 + y) * w2 + x)];
  return raw;
}

Image bilinear_demosaic(const Plane& raw, const BayerPattern& pattern) {
  require_even(raw.height, raw.width, "bilinear_demosaic");
  const int h = raw.height, w = raw.width;
  Image out = Image::zeros(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int own = static_cast<int>(pattern.channel_at(y, x));
      for (int c = 0; c < 3; ++c) {
        if (c == own) {
          out.at(c, y, x) = raw.at(y, x);
          continue;
        }
        double acc = 0.0, wsum = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if ((dy == 0 && dx == 0) || yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            if (static_cast<int>(pattern.channel_at(yy, xx)) != c) continue;
            const double wt = (dy != 0 && dx != 0) ? 0.5 : 1.0;
            acc += wt * raw.at(yy, xx);
            wsum += wt;
          }
        }
        out.at(c, y, x) = acc / wsum;
      }
    }
  }
  return out;
}

}  // namespace patchsel::mosaic
