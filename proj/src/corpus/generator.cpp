#include "patchsel/corpus/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "patchsel/error.hpp"
#include "patchsel/seed.hpp"

namespace patchsel::corpus {

namespace {

constexpr std::array<const char*, 7> kKindNames = {"flat",   "gradient", "smooth-noise", "sinusoid",
                                                   "checkerboard", "stripes", "mixed-collage"};

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double smootherstep(double t) { return t * t * t * (t * (6.0 * t - 15.0) + 10.0); }

void render_into(const ImageSpec& spec, Image& img);

void render_flat(const ImageSpec& s, Image& img) {
  std::mt19937_64 rng(derive_seed(s.seed, {1}));
  for (int c = 0; c < 3; ++c) {
    const double v = s.offset + s.amplitude * (2.0 * uniform01(rng) - 1.0);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) img.at(c, y, x) = v;
  }
}

void render_gradient(const ImageSpec& s, Image& img) {
  std::mt19937_64 rng(derive_seed(s.seed, {2}));
  const double norm = std::max(img.height, img.width);
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  for (int c = 0; c < 3; ++c) {
    const double slope = 2.0 * uniform01(rng) - 1.0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double proj = ((x - img.width / 2.0) * ca + (y - img.height / 2.0) * sa) / norm;
        img.at(c, y, x) = s.offset + s.amplitude * slope * proj;
      }
  }
}

void render_smooth_noise(const ImageSpec& s, Image& img) {
  std::mt19937_64 rng(derive_seed(s.seed, {3}));
  const double cell = static_cast<double>(img.width) / std::max(s.frequency, 1e-6);
  const int gw = static_cast<int>(std::ceil(img.width / cell)) + 2;
  const int gh = static_cast<int>(std::ceil(img.height / cell)) + 2;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> lattice(static_cast<std::size_t>(gw * gh));
    for (auto& v : lattice) v = uniform01(rng);
    auto lat = [&](int gy, int gx) { return lattice[static_cast<std::size_t>(gy * gw + gx)]; };
    for (int y = 0; y < img.height; ++y) {
      const double fy = y / cell;
      const int iy = static_cast<int>(fy);
      const double ty = smootherstep(fy - iy);
      for (int x = 0; x < img.width; ++x) {
        const double fx = x / cell;
        const int ix = static_cast<int>(fx);
        const double tx = smootherstep(fx - ix);
        const double top = lat(iy, ix) * (1 - tx) + lat(iy, ix + 1) * tx;
        const double bot = lat(iy + 1, ix) * (1 - tx) + lat(iy + 1, ix + 1) * tx;
        const double n = top * (1 - ty) + bot * ty;
        img.at(c, y, x) = s.offset + s.amplitude * (2.0 * n - 1.0);
      }
    }
  }
}

void render_sinusoid(const ImageSpec& s, Image& img) {
  std::mt19937_64 rng(derive_seed(s.seed, {4}));
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  const double k = 2.0 * std::numbers::pi * s.frequency / img.width;
  for (int c = 0; c < 3; ++c) {
    const double phase = 2.0 * std::numbers::pi * uniform01(rng);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        img.at(c, y, x) = s.offset + s.amplitude * std::sin(k * (x * ca + y * sa) + phase);
  }
}

void render_checkerboard(const ImageSpec& s, Image& img) {
  if (s.period < 2 || s.period % 2 != 0) throw ConfigError("checkerboard period must be even and >= 2");
  std::mt19937_64 rng(derive_seed(s.seed, {5}));
  const int cell = s.period / 2;
  for (int c = 0; c < 3; ++c) {
    const double g = 0.5 + 0.5 * uniform01(rng);
    const double a = s.offset + s.amplitude * g, b = s.offset - s.amplitude * g;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) img.at(c, y, x) = ((x / cell + y / cell) % 2 == 0) ? a : b;
  }
}

void render_stripes(const ImageSpec& s, Image& img) {
  std::mt19937_64 rng(derive_seed(s.seed, {6}));
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  const double phase0 = uniform01(rng);
  for (int c = 0; c < 3; ++c) {
    const double g = 0.5 + 0.5 * uniform01(rng);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double ph = s.frequency * (x * ca + y * sa) / img.width + phase0;
        ph -= std::floor(ph);
        img.at(c, y, x) = s.offset + s.amplitude * g * (ph < 0.3 ? 1.0 : -1.0);
      }
  }
}

void render_collage(const ImageSpec& s, Image& img) {
  std::mt19937_64 rng(derive_seed(s.seed, {7}));
  const int hy = img.height / 2, hx = img.width / 2;
  // Two quadrants hard, two drawn from any non-collage kind.
  std::array<ImageKind, 4> kinds{};
  const std::array<ImageKind, 3> hard{ImageKind::kSinusoid, ImageKind::kCheckerboard, ImageKind::kStripes};
  for (int q = 0; q < 4; ++q) {
    if (q < 2) {
      kinds[static_cast<std::size_t>(q)] = hard[rng() % hard.size()];
    } else {
      kinds[static_cast<std::size_t>(q)] = static_cast<ImageKind>(rng() % 6);
    }
  }
  std::shuffle(kinds.begin(), kinds.end(), rng);
  for (int q = 0; q < 4; ++q) {
    ImageSpec sub = random_spec(kinds[static_cast<std::size_t>(q)], img.height, img.width,
                                derive_seed(s.seed, {100, static_cast<std::uint64_t>(q)}));
    Image full = Image::zeros(img.height, img.width);
    render_into(sub, full);
    const int y0 = (q / 2) * hy, x0 = (q % 2) * hx;
    const int y1 = q / 2 ? img.height : hy, x1 = q % 2 ? img.width : hx;
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) img.at(c, y, x) = full.at(c, y, x);
  }
}

void render_into(const ImageSpec& spec, Image& img) {
  switch (spec.kind) {
    case ImageKind::kFlat: render_flat(spec, img); break;
    case ImageKind::kGradient: render_gradient(spec, img); break;
    case ImageKind::kSmoothNoise: render_smooth_noise(spec, img); break;
    case ImageKind::kSinusoid: render_sinusoid(spec, img); break;
    case ImageKind::kCheckerboard: render_checkerboard(spec, img); break;
    case ImageKind::kStripes: render_stripes(spec, img); break;
    case ImageKind::kMixedCollage: render_collage(spec, img); break;
  }
}

}  // namespace

std::string to_string(ImageKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

ImageKind parse_image_kind(const std::string& s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (s == kKindNames[i]) return static_cast<ImageKind>(i);
  }
  throw ConfigError("unknown image kind '" + s + "'");
}

bool is_hard_kind(ImageKind k) {
  return k != ImageKind::kFlat && k != ImageKind::kGradient && k != ImageKind::kSmoothNoise;
}

Image gen_image(const ImageSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) throw ConfigError("gen_image: size must be positive");
  Image img = Image::zeros(spec.height, spec.width);
  render_into(spec, img);
  const double lo = spec.offset - std::abs(spec.amplitude), hi = spec.offset + std::abs(spec.amplitude);
  const bool outside = lo < 0.0 || hi > 1.0;
  if (outside) {
    std::fprintf(stderr, "warning: %s spec envelope [%g, %g] leaves [0,1]; clamping\n",
                 to_string(spec.kind).c_str(), lo, hi);
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

ImageSpec random_spec(ImageKind kind, int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0xC0FFEE}));
  auto u = [&](double a, double b) { return a + (b - a) * uniform01(rng); };
  ImageSpec s;
  s.kind = kind;
  s.height = height;
  s.width = width;
  s.seed = seed;
  const double wscale = width / 192.0;
  switch (kind) {
    case ImageKind::kFlat:
      s.offset = u(0.15, 0.85);
      s.amplitude = u(0.0, 0.15);
      break;
    case ImageKind::kGradient:
      s.offset = u(0.35, 0.65);
      s.amplitude = u(0.1, 0.35);
      s.angle = u(0.0, 2.0 * std::numbers::pi);
      break;
    case ImageKind::kSmoothNoise:
      s.offset = u(0.35, 0.65);
      s.amplitude = u(0.1, 0.3);
      s.frequency = u(1.5, 4.0);
      break;
    case ImageKind::kSinusoid:
      s.offset = u(0.4, 0.6);
      s.amplitude = u(0.15, 0.35);
      s.frequency = u(24.0, 64.0) * wscale;
      s.angle = u(0.0, std::numbers::pi);
      break;
    case ImageKind::kCheckerboard:
      s.offset = u(0.4, 0.6);
      s.amplitude = u(0.15, 0.35);
      s.period = 2 * (1 + static_cast<int>(rng() % 4));
      break;
    case ImageKind::kStripes:
      s.offset = u(0.4, 0.6);
      s.amplitude = u(0.15, 0.35);
      s.frequency = u(16.0, 48.0) * wscale;
      s.angle = u(0.0, std::numbers::pi);
      break;
    case ImageKind::kMixedCollage:
      s.offset = 0.5;
      s.amplitude = 0.0;
      break;
  }
  return s;
}

}  // namespace patchsel::corpus
