#include "grad_suite.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "patchsel/autograd/ops.hpp"
#include "patchsel/models/patchnet.hpp"
#include "patchsel/models/res_block.hpp"
#include "patchsel/models/restorenet.hpp"
#include "patchsel/training/loss.hpp"

namespace patchsel::testing {

using ag::Tensor;

namespace {

void merge(OpCheck& c, const GradCheckResult& r) {
  ++c.cases;
  c.coords += r.coords;
  if (r.max_rel_error >= c.max_rel_error) {
    c.max_rel_error = r.max_rel_error;
    c.worst = r.worst;
  }
}

Tensor param_from(ag::Shape shape, std::vector<double> v) { return Tensor::param(std::move(shape), std::move(v)); }

std::vector<Tensor> tensors_of(const std::vector<ag::NamedTensor>& named) {
  std::vector<Tensor> out;
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

// Conv weights at He scale keep the checked outputs O(1).
std::vector<double> he_values(std::size_t n, std::size_t fan_in, std::mt19937_64& rng) {
  return normal_values(n, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

}  // namespace

OpCheck check_conv2d(int cases, std::uint64_t seed) {
  OpCheck c{"conv2d"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    const int stride = 1 + i % 2, pad = i % 3, k = i % 4 == 3 ? 1 : 3;
    auto x = param_from({2, 3, 5, 5}, normal_values(150, rng));
    auto w = param_from({4, 3, static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                        normal_values(static_cast<std::size_t>(12 * k * k), rng));
    auto b = param_from({4}, normal_values(4, rng));
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::conv2d(x, w, b, stride, pad), proj); }, {x, w, b}, rng));
  }
  return c;
}

OpCheck check_avg_pool2(int cases, std::uint64_t seed) {
  OpCheck c{"avg_pool2"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    const std::size_t h = 2 * (1 + i % 3), w = 2 * (1 + (i / 3) % 3);
    auto x = param_from({2, 3, h, w}, normal_values(6 * h * w, rng));
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::avg_pool2(x), proj); }, {x}, rng));
  }
  return c;
}

OpCheck check_batch_norm(int cases, std::uint64_t seed) {
  OpCheck c{"batch_norm", 0, 0, 1e-3};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    auto x = param_from({3, 4, 3, 2}, normal_values(72, rng, 1.0 + i % 3));
    auto g = param_from({4}, normal_values(4, rng));
    auto b = param_from({4}, normal_values(4, rng));
    auto state = ag::BatchNormState::make(4);
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::batch_norm(x, g, b, state, true), proj); }, {x, g, b},
                        rng));
  }
  return c;
}

OpCheck check_leaky_relu(int cases, std::uint64_t seed) {
  OpCheck c{"leaky_relu"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    auto x = param_from({2, 2, 3, 3}, off_zero_values(36, rng));
    const double alpha = i % 2 ? 0.2 : 0.01 * (1 + i);
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::leaky_relu(x, alpha), proj); }, {x}, rng));
  }
  return c;
}

OpCheck check_tempered_sigmoid(int cases, std::uint64_t seed) {
  OpCheck c{"tempered_sigmoid"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    auto x = param_from({2, 1, 3, 3}, normal_values(18, rng, 2.0));
    const double temperature = 0.5 + 0.25 * i;
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::tempered_sigmoid(x, temperature), proj); }, {x}, rng));
  }
  return c;
}

OpCheck check_chain(int cases, std::uint64_t seed) {
  OpCheck c{"conv-leaky_relu-pool-sigmoid"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    auto x = param_from({2, 3, 6, 6}, normal_values(216, rng));
    auto w = param_from({2, 3, 3, 3}, he_values(54, 27, rng));
    auto b = param_from({2}, normal_values(2, rng, 0.1));
    const std::uint64_t proj = rng();
    merge(c, grad_check(
                 [&] {
                   auto y = ag::leaky_relu(ag::conv2d(x, w, b, 1, 1), 0.2);
                   return random_projection(ag::tempered_sigmoid(ag::avg_pool2(y), 2.0), proj);
                 },
                 {x, w, b}, rng, 0, 1e-5, 3));
  }
  return c;
}

OpCheck check_pixel_shuffle(int cases, std::uint64_t seed) {
  OpCheck c{"pixel_shuffle"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    auto x = param_from({2, 12, 2, 3}, normal_values(144, rng));
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::pixel_shuffle(x, 2), proj); }, {x}, rng));
  }
  return c;
}

OpCheck check_pad_gather(int cases, std::uint64_t seed) {
  OpCheck c{"pad2d-gather"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    auto x = param_from({2, 1, 3, 4}, normal_values(24, rng));
    const int t = i % 3;
    std::vector<ag::Pad4> pads{{t, 2 - t, 1, 1}, {0, 2, 2 - i % 3, i % 3}};
    std::vector<std::size_t> idx;
    std::uniform_int_distribution<std::size_t> at(0, 2 * 5 * 6 - 1);
    for (int k = 0; k < 15; ++k) idx.push_back(at(rng));
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(ag::gather(ag::pad2d(x, pads), idx), proj); }, {x}, rng));
  }
  return c;
}

OpCheck check_res_block(int cases, std::uint64_t seed) {
  OpCheck c{"residual block", 0, 0, 1e-3};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    models::ResBlockConfig cfg;
    cfg.channels = 8;
    cfg.ratio = i % 2 ? 4 : 2;
    cfg.with_bn = i % 2 == 1;
    if (i % 4 == 3) cfg.in_channels = 4;
    models::Rng init(rng());
    models::ResBlock block(cfg, init);
    std::vector<ag::NamedTensor> named;
    block.collect_params("b", named);
    auto x = param_from({2, static_cast<std::size_t>(cfg.input_channels()), 4, 4},
                        normal_values(static_cast<std::size_t>(32 * cfg.input_channels()), rng));
    auto inputs = tensors_of(named);
    inputs.insert(inputs.begin(), x);
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(block.forward(x, true), proj); }, inputs, rng, 40, 1e-5, 3));
  }
  return c;
}

OpCheck check_reweighted_loss(int cases, std::uint64_t seed) {
  OpCheck c{"reweighted_loss"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < cases; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i % 7);
    std::vector<double> lv(n), tv(n);
    for (auto& v : lv) v = u(rng);
    for (auto& v : tv) v = u(rng);
    auto l = param_from({n}, lv);
    auto t = param_from({n}, tv);
    merge(c, grad_check([&] { return training::reweighted_loss(l, t).total; }, {l, t}, rng));
  }
  return c;
}

OpCheck check_patchnet(int cases, std::uint64_t seed) {
  OpCheck c{"PatchNet 8x8", 0, 0, 1e-3};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    const auto variant = i % 4 == 3 ? models::PatchNetVariant::kLarge : models::PatchNetVariant::kTiny;
    const auto cfg = models::PatchNetConfig::make(variant, 8, 2.0, i % 4 == 3 ? 4 : 1);
    models::Rng init(rng());
    models::PatchNet net(cfg, init);
    // Batch 16: at the 1x1 stages batch norm over a couple of samples is close to a
    // sign function and central differences stop resolving it.
    auto x = param_from({16, 3, 8, 8}, normal_values(3072, rng, 0.5));
    auto inputs = tensors_of(net.params());
    inputs.insert(inputs.begin(), x);
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(net.forward(x, true), proj); }, inputs, rng, 24, 1e-6, 2));
  }
  return c;
}

OpCheck check_restorenet(int cases, std::uint64_t seed) {
  OpCheck c{"RestoreNet 8x8", 0, 0, 1e-3};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    models::RestoreNetConfig cfg;
    cfg.sigma_conditioning = i % 3 != 2;
    models::Rng init(rng());
    models::RestoreNet net(cfg, init);
    const auto ch = static_cast<std::size_t>(cfg.input_channels());
    auto x = param_from({2, ch, 4, 4}, normal_values(32 * ch, rng, 0.5));
    auto inputs = tensors_of(net.params());
    inputs.insert(inputs.begin(), x);
    const std::uint64_t proj = rng();
    merge(c, grad_check([&] { return random_projection(net.forward(x), proj); }, inputs, rng, 24, 1e-5, 3));
  }
  return c;
}

std::vector<OpCheck> gradient_suite(int cases, std::uint64_t seed) {
  return {check_conv2d(cases, seed + 1),          check_avg_pool2(cases, seed + 2),
          check_batch_norm(cases, seed + 3),      check_leaky_relu(cases, seed + 4),
          check_tempered_sigmoid(cases, seed + 5), check_chain(cases, seed + 6),
          check_pixel_shuffle(cases, seed + 7),   check_pad_gather(cases, seed + 8),
          check_res_block(cases, seed + 9),       check_reweighted_loss(cases, seed + 10),
          check_patchnet(cases, seed + 11),       check_restorenet(cases, seed + 12)};
}

}  // namespace patchsel::testing
