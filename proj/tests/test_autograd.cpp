#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "patchsel/autograd/ops.hpp"
#include "patchsel/autograd/optim.hpp"
#include "patchsel/error.hpp"

using namespace patchsel;
using ag::Tensor;

TEST_CASE("tempered_sigmoid values") {
  auto x = Tensor::from({3}, {0.0, 1.0, -1.0});
  auto y = ag::tempered_sigmoid(x, 2.0);
  CHECK(y.at(0) == 0.5);
  CHECK(y.at(1) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(y.at(2) == doctest::Approx(0.11920292202211755).epsilon(1e-15));
  CHECK(y.at(1) + y.at(2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ag::tempered_sigmoid(Tensor::scalar(0.0), 7.5).item() == 0.5);
  CHECK_THROWS_AS(ag::tempered_sigmoid(x, 0.0), ConfigError);
  CHECK_THROWS_AS(ag::tempered_sigmoid(x, -1.0), ConfigError);
}

TEST_CASE("tempered_sigmoid equals unit-temperature sigmoid of scaled input") {
  std::mt19937_64 rng(3);
  auto v = testing::normal_values(200, rng, 3.0);
  for (double t : {0.5, 1.0, 2.0, 3.0}) {
    std::vector<double> scaled(v);
    for (auto& s : scaled) s *= t;
    auto a = ag::tempered_sigmoid(Tensor::from({200}, v), t);
    auto b = ag::tempered_sigmoid(Tensor::from({200}, scaled), 1.0);
    for (std::size_t i = 0; i < 200; ++i) CHECK(a.at(i) == b.at(i));
  }
}

TEST_CASE("tempered_sigmoid is strictly increasing and inside (0,1)") {
  std::vector<double> xs;
  for (int i = -200; i <= 200; ++i) xs.push_back(i * 0.05);
  auto y = ag::tempered_sigmoid(Tensor::from({xs.size()}, xs), 2.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(y.at(i) > 0.0);
    CHECK(y.at(i) < 1.0);
    if (i > 0) CHECK(y.at(i) > y.at(i - 1));
  }
}

TEST_CASE("leaky_relu values and subgradient at zero") {
  auto x = Tensor::param({4}, {3.0, -1.0, 0.0, -2.5});
  auto y = ag::leaky_relu(x, 0.2);
  CHECK(y.at(0) == 3.0);
  CHECK(y.at(1) == doctest::Approx(-0.2));
  CHECK(y.at(2) == 0.0);
  ag::backward(ag::sum(y));
  const auto g = x.grad_copy();
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.2);
  CHECK(g[2] == 0.2);
  CHECK(g[3] == 0.2);
}

TEST_CASE("conv2d examples") {
  auto ones = Tensor::full({1, 1, 3, 3}, 1.0);
  auto y = ag::conv2d(ones, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::from({1}, {0.0}), 1, 0);
  REQUIRE(y.shape() == ag::Shape{1, 1, 1, 1});
  CHECK(y.item() == 9.0);

  std::mt19937_64 rng(1);
  auto x = Tensor::from({2, 3, 5, 5}, testing::normal_values(150, rng));
  std::vector<double> eye(9, 0.0);
  eye[0] = eye[4] = eye[8] = 1.0;
  auto id = ag::conv2d(x, Tensor::from({3, 3, 1, 1}, eye), Tensor(), 1, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(id.at(i) == x.at(i));
}

TEST_CASE("conv2d output size and errors") {
  auto x = Tensor::zeros({1, 2, 7, 6});
  auto w = Tensor::zeros({4, 2, 3, 3});
  CHECK(ag::conv2d(x, w, Tensor(), 2, 1).shape() == ag::Shape{1, 4, 4, 3});
  CHECK(ag::conv2d(x, w, Tensor(), 1, 0).shape() == ag::Shape{1, 4, 5, 4});
  CHECK_THROWS_AS(ag::conv2d(x, Tensor::zeros({4, 3, 3, 3}), Tensor(), 1, 0), ShapeError);
  CHECK_THROWS_AS(ag::conv2d(Tensor::zeros({1, 2, 2, 2}), w, Tensor(), 1, 0), ShapeError);
}

TEST_CASE("conv2d gradient of sum(output) w.r.t. x") {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 20; ++c) {
    auto x = Tensor::param({2, 3, 5, 5}, testing::normal_values(150, rng));
    auto w = Tensor::from({2, 3, 3, 3}, testing::normal_values(54, rng));
    auto b = Tensor::from({2}, testing::normal_values(2, rng));
    auto r = testing::grad_check([&] { return ag::sum(ag::conv2d(x, w, b, 1, 1)); }, {x}, rng);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("avg_pool2 examples") {
  CHECK(ag::avg_pool2(Tensor::full({1, 1, 2, 2}, 1.0)).item() == 1.0);
  CHECK(ag::avg_pool2(Tensor::from({1, 1, 2, 2}, {0, 1, 2, 3})).item() == 1.5);
  CHECK_THROWS_AS(ag::avg_pool2(Tensor::zeros({1, 1, 3, 2})), ShapeError);
  auto x = Tensor::param({1, 1, 2, 2}, {0, 1, 2, 3});
  ag::backward(ag::avg_pool2(x));
  for (double g : x.grad_copy()) CHECK(g == 0.25);
}

TEST_CASE("batch_norm training normalises per channel") {
  std::mt19937_64 rng(5);
  auto x = Tensor::from({4, 2, 3, 3}, testing::normal_values(72, rng, 3.0));
  auto gamma = Tensor::from({2}, {2.0, -0.5});
  auto beta = Tensor::from({2}, {0.3, -1.0});
  auto st = ag::BatchNormState::make(2);
  auto y = ag::batch_norm(x, gamma, beta, st, true);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t p = 0; p < 9; ++p) s += y.at((n * 2 + c) * 9 + p);
    const double mean = s / 36;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t p = 0; p < 9; ++p) ss += std::pow(y.at((n * 2 + c) * 9 + p) - mean, 2);
    CHECK(mean == doctest::Approx(beta.at(c)).epsilon(1e-9));
    // biased std; eps = 1e-5 against a variance of ~9 shifts it by ~1e-6 relative
    CHECK(std::sqrt(ss / 36) == doctest::Approx(std::abs(gamma.at(c))).epsilon(1e-5));
  }
  // running stats moved towards the batch statistics
  CHECK(st.running_mean.at(0) != 0.0);
  CHECK(st.running_var.at(0) != 1.0);
}

TEST_CASE("batch_norm identity on standardised input and inference mode") {
  std::vector<double> v{-1.5, -0.5, 0.5, 1.5};
  double var = 0;
  for (double x : v) var += x * x / 4;
  for (auto& x : v) x /= std::sqrt(var);
  auto x = Tensor::from({4, 1, 1, 1}, v);
  auto st = ag::BatchNormState::make(1);
  auto y = ag::batch_norm(x, Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0}), st, true);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(x.at(i)).epsilon(1e-5));

  auto fresh = ag::BatchNormState::make(1);
  auto z = ag::batch_norm(x, Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0}), fresh, false);
  for (std::size_t i = 0; i < 4; ++i) CHECK(z.at(i) == doctest::Approx(x.at(i) / std::sqrt(1.0 + 1e-5)));
  CHECK(fresh.running_mean.at(0) == 0.0);
  CHECK_THROWS(ag::batch_norm(Tensor::zeros({0, 1, 1, 1}), Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0}),
                              fresh, true));
}

TEST_CASE("backward basics") {
  auto x = Tensor::param({5}, {1, -2, 3, 0.5, 7});
  ag::backward(ag::sum(x));
  for (double g : x.grad_copy()) CHECK(g == 1.0);
  x.zero_grad();
  ag::backward(ag::sum(ag::mul(x, x)));
  for (std::size_t i = 0; i < 5; ++i) CHECK(x.grad_copy()[i] == 2.0 * x.at(i));

  CHECK_THROWS_AS(ag::backward(ag::mul(x, x)), UsageError);
  CHECK_THROWS_AS(ag::backward(ag::sum(Tensor::from({2}, {1, 2}))), UsageError);
}

TEST_CASE("backward is deterministic") {
  std::mt19937_64 rng(9);
  auto x = Tensor::param({2, 3, 6, 6}, testing::normal_values(216, rng));
  auto w = Tensor::param({4, 3, 3, 3}, testing::normal_values(108, rng));
  auto run = [&] {
    x.zero_grad();
    w.zero_grad();
    auto y = ag::tempered_sigmoid(ag::avg_pool2(ag::leaky_relu(ag::conv2d(x, w, Tensor(), 1, 1), 0.2)), 2.0);
    ag::backward(testing::random_projection(y, 4));
    return std::make_pair(x.grad_copy(), w.grad_copy());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("grad accumulates across backward calls on leaves") {
  auto x = Tensor::param({2}, {1.0, 2.0});
  ag::backward(ag::sum(x));
  ag::backward(ag::sum(x));
  CHECK(x.grad_copy() == std::vector<double>{2.0, 2.0});
}

TEST_CASE("no-grad guard records nothing") {
  auto x = Tensor::param({2}, {1.0, 2.0});
  Tensor y;
  {
    ag::NoGradGuard g;
    y = ag::sum(ag::mul(x, x));
  }
  CHECK(y.is_leaf());
  CHECK_FALSE(y.requires_grad());
  CHECK(ag::grad_mode_enabled());
}

TEST_CASE("pixel_shuffle layout") {
  // (1, 4, 1, 1) -> (1, 1, 2, 2): channel dy*2+dx lands at (dy, dx)
  auto y = ag::pixel_shuffle(Tensor::from({1, 4, 1, 1}, {1, 2, 3, 4}), 2);
  REQUIRE(y.shape() == ag::Shape{1, 1, 2, 2});
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("adam first step and zero gradient") {
  auto p = Tensor::param({1}, {0.0});
  ag::Adam opt({{"p", p}});
  p.grad()[0] = 1.0;
  opt.step(0.1);
  CHECK(p.at(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(opt.slots()[0].step == 1);

  opt.zero_grad();
  const double before = p.at(0);
  opt.step(0.1);
  CHECK(p.at(0) == before);
  CHECK(opt.slots()[0].step == 1);

  p.grad()[0] = 2.0;
  opt.step(0.1, true);
  CHECK(p.at(0) > before);
}

TEST_CASE("adam is deterministic and rejects non-finite gradients") {
  auto run = [] {
    auto p = Tensor::param({3}, {0.5, -0.25, 1.0});
    ag::Adam opt({{"w", p}});
    for (int s = 0; s < 5; ++s) {
      opt.zero_grad();
      ag::backward(ag::sum(ag::mul(p, p)));
      opt.step(0.01);
    }
    return std::vector<double>(p.data().begin(), p.data().end());
  };
  CHECK(run() == run());

  auto q = Tensor::param({2}, {0.0, 0.0});
  ag::Adam opt({{"named_param", q}});
  q.grad()[1] = std::nan("");
  try {
    opt.step(0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("named_param") != std::string::npos);
  }
  CHECK(q.at(0) == 0.0);
}

TEST_CASE("cosine_lr schedule") {
  ag::LrSchedule s{2.5e-4, 30};
  CHECK(ag::cosine_lr(0, s) == 2.5e-4);
  CHECK(std::abs(ag::cosine_lr(30, s)) < 1e-15);
  CHECK(ag::cosine_lr(15, s) == doctest::Approx(1.25e-4).epsilon(1e-12));
  for (int e = 1; e <= 30; ++e) CHECK(ag::cosine_lr(e, s) <= ag::cosine_lr(e - 1, s));
  CHECK_THROWS_AS(ag::cosine_lr(31, s), ConfigError);
  CHECK_THROWS_AS(ag::cosine_lr(-1, s), ConfigError);
}
