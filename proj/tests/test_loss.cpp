#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gradcheck.hpp"
#include "patchsel/autograd/ops.hpp"
#include "patchsel/error.hpp"
#include "patchsel/models/restorenet.hpp"
#include "patchsel/training/loss.hpp"

using namespace patchsel;
using namespace patchsel::training;
using ag::Tensor;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto img = Image::zeros(h, w);
  for (auto& v : img.data) v = u(rng);
  return img;
}

std::vector<double> uniform_values(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("per_patch_loss basics") {
  const auto gt = random_image(128, 128, 1);
  const auto grid = corpus::make_patch_grid(128, 128, 64, false, 0);
  auto same = per_patch_loss(models::image_to_tensor(gt), {&gt}, {grid});
  REQUIRE(same.losses.numel() == 4);
  for (double v : same.losses.data()) CHECK(v == 0.0);

  auto shifted = gt;
  for (auto& v : shifted.data) v += 0.1;
  auto off = per_patch_loss(models::image_to_tensor(shifted), {&gt}, {grid});
  for (double v : off.losses.data()) CHECK(v == doctest::Approx(0.01).epsilon(1e-12));
  // unclamped in the loss path, clamped for psnr
  for (double v : per_patch_mse(shifted, gt, grid)) CHECK(v == doctest::Approx(0.01).epsilon(1e-12));

  auto one = gt;
  one.at(1, 70, 10) += 0.5;  // patch (1, 0)
  auto l = per_patch_loss(models::image_to_tensor(one), {&gt}, {grid});
  CHECK(l.losses.at(0) == 0.0);
  CHECK(l.losses.at(1) == 0.0);
  CHECK(l.losses.at(2) == doctest::Approx(0.25 / (3 * 64 * 64)));
  CHECK(l.losses.at(3) == 0.0);
  CHECK(l.refs[2].patch == 2);
}

TEST_CASE("per_patch_loss ignores padding and mostly padded patches") {
  const auto gt = random_image(96, 96, 2);
  auto pred = gt;
  for (auto& v : pred.data) v += 0.2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = corpus::make_patch_grid(96, 96, 64, true, seed);
    auto l = per_patch_loss(models::image_to_tensor(pred), {&gt}, {g});
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < g.patches.size(); ++i)
      if (g.usable(g.patches[i])) usable.push_back(i);
    REQUIRE(l.losses.numel() == usable.size());
    for (std::size_t j = 0; j < usable.size(); ++j) {
      CHECK(l.refs[j].patch == usable[j]);
      // the mean runs over real pixels only, so zero padding never dilutes it
      CHECK(l.losses.at(j) == doctest::Approx(0.04).epsilon(1e-12));
    }
  }
}

TEST_CASE("per_patch_loss batches and gradient") {
  std::mt19937_64 rng(3);
  const auto a = random_image(64, 128, 4), b = random_image(64, 128, 5);
  const auto grid = corpus::make_patch_grid(64, 128, 32, false, 0);
  auto pred = Tensor::param({2, 3, 64, 128}, uniform_values(2 * 3 * 64 * 128, rng, 0.0, 1.0));
  auto l = per_patch_loss(pred, {&a, &b}, {grid, grid});
  CHECK(l.losses.numel() == 16);
  CHECK(l.refs[8].item == 1);
  CHECK(l.refs[8].patch == 0);
  auto r = testing::grad_check([&] { return testing::random_projection(per_patch_loss(pred, {&a, &b}, {grid, grid}).losses, 9); },
                               {pred}, rng, 200);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("per_patch_psnr clamps") {
  const auto gt = random_image(64, 64, 6);
  const auto grid = corpus::make_patch_grid(64, 64, 32, false, 0);
  auto p = per_patch_psnr(gt, gt, grid);
  REQUIRE(p.size() == 4);
  for (double v : p) CHECK(v == 100.0);
  auto zero = gt, tenth = gt;
  for (auto& v : zero.data) v = 0.0;
  for (auto& v : tenth.data) v = 0.1;
  for (double v : per_patch_psnr(zero, tenth, grid)) CHECK(v == 20.0);
}

TEST_CASE("reweighted loss: weights sum to N") {
  std::mt19937_64 rng(7);
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 1 + static_cast<std::size_t>(c % 17);
    auto t = uniform_values(n, rng, 0.01, 0.99);
    auto l = uniform_values(n, rng, 0.0, 0.1);
    const auto r = reweighted_loss(Tensor::from({n}, l), Tensor::from({n}, t)).record;
    double sum = 0;
    for (double w : r.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(std::abs(sum - static_cast<double>(n)) <= 1e-9 * static_cast<double>(n));
    double weighted = 0;
    for (std::size_t i = 0; i < n; ++i) weighted += r.weights[i] * l[i] / static_cast<double>(n);
    // the total carries eps in its denominator, the record weights do not
    CHECK(std::abs(weighted - r.total) <= 1e-7 * r.total + 1e-15);
  }
}

TEST_CASE("reweighted loss: scale invariance and equal weights") {
  std::mt19937_64 rng(8);
  for (int c = 0; c < 30; ++c) {
    const std::size_t n = 2 + static_cast<std::size_t>(c % 9);
    auto t = uniform_values(n, rng, 0.05, 0.95);
    auto l = uniform_values(n, rng, 0.0, 0.05);
    const double base = reweighted_loss(Tensor::from({n}, l), Tensor::from({n}, t)).record.total;
    for (double k : {0.1, 0.5, 1.0}) {
      auto st = t;
      for (auto& v : st) v *= k;
      const double scaled = reweighted_loss(Tensor::from({n}, l), Tensor::from({n}, st)).record.total;
      CHECK(std::abs(scaled - base) <= 1e-6 * base);
    }
    double mean = 0;
    for (double v : l) mean += v / static_cast<double>(n);
    const double cval = t[0];
    const double flat = reweighted_loss(Tensor::from({n}, l), Tensor::from({n}, std::vector<double>(n, cval))).record.total;
    CHECK(std::abs(flat - mean) <= 1e-7 * mean);
  }
}

TEST_CASE("reweighted loss: selection limit") {
  const double tiny = 1e-12;
  auto r = reweighted_loss(Tensor::from({2}, {0.3, 0.9}), Tensor::from({2}, {1.0, tiny}));
  CHECK(r.record.total == doctest::Approx(0.3).epsilon(1e-7));
}

TEST_CASE("reweighted loss: analytic gradients") {
  std::mt19937_64 rng(9);
  for (int c = 0; c < 30; ++c) {
    const std::size_t n = 2 + static_cast<std::size_t>(c % 6);
    auto l = Tensor::param({n}, uniform_values(n, rng, 0.0, 1.0));
    auto t = Tensor::param({n}, uniform_values(n, rng, 0.05, 0.95));
    auto r = reweighted_loss(l, t);
    ag::backward(r.total);
    const double s = r.record.weight_sum + 1e-8;
    for (std::size_t q = 0; q < n; ++q) {
      CHECK(t.grad_copy()[q] == doctest::Approx((l.at(q) - r.record.total) / s).epsilon(1e-12));
      CHECK(l.grad_copy()[q] == doctest::Approx(t.at(q) / s).epsilon(1e-12));
    }
    auto fd = testing::grad_check([&] { return reweighted_loss(l, t).total; }, {l, t}, rng);
    CHECK(fd.max_rel_error < 1e-6);
  }
}

TEST_CASE("reweighted loss: zero sum and errors") {
  auto r = reweighted_loss(Tensor::from({2}, {0.3, 0.9}), Tensor::from({2}, {0.0, 0.0}));
  CHECK(r.record.zero_sum);
  CHECK(r.record.total == 0.0);
  CHECK(r.record.weights == std::vector<double>{0.0, 0.0});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(reweighted_loss(Tensor::from({2}, {nan, 0.9}), Tensor::from({2}, {0.5, 0.5}), 1e-8, 17),
                  NumericError);
  try {
    reweighted_loss(Tensor::from({1}, {0.1}), Tensor::from({1}, {nan}), 1e-8, 17);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 17") != std::string::npos);
  }
  CHECK_THROWS_AS(reweighted_loss(Tensor::from({2}, {0.1, 0.2}), Tensor::from({1}, {0.5})), ShapeError);
}

TEST_CASE("hnm weights and threshold schedule") {
  CHECK(hnm_weights({30.0, 50.0}, 40.0) == std::vector<double>{1.0, 0.0});
  CHECK(hnm_weights({41.0, 50.0, 40.0}, 40.0) == std::vector<double>{0.0, 0.0, 0.0});
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(hnm_weights({41.0, 100.0, 3.0}, inf) == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(hnm_threshold(0, 30) == 45.0);
  CHECK(hnm_threshold(30, 30) == 35.0);
  CHECK(hnm_threshold(15, 30) == 40.0);
  for (int e = 1; e <= 30; ++e) CHECK(hnm_threshold(e, 30) < hnm_threshold(e - 1, 30));
  CHECK_THROWS_AS(hnm_threshold(31, 30), ConfigError);
  CHECK_THROWS_AS(hnm_threshold(-1, 30), ConfigError);
}

TEST_CASE("bce with logits") {
  auto z = Tensor::param({3}, {0.4, -1.2, 2.0});
  const std::vector<double> y{1.0, 0.0, 0.0};
  const double temperature = 2.0;
  auto l = bce_with_logits(z, y, temperature);
  double ref = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-temperature * z.at(i)));
    ref -= y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p);
  }
  CHECK(l.item() == doctest::Approx(ref / 3).epsilon(1e-12));
  std::mt19937_64 rng(1);
  auto r = testing::grad_check([&] { return bce_with_logits(z, y, temperature); }, {z}, rng);
  CHECK(r.max_rel_error < 1e-6);
  // no overflow for large logits
  CHECK(std::isfinite(bce_with_logits(Tensor::from({2}, {800.0, -800.0}), {0.0, 1.0}, 2.0).item()));
}
