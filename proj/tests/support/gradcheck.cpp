#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "patchsel/autograd/ops.hpp"

namespace patchsel::testing {

double rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<ag::Tensor()>& loss, const std::vector<ag::Tensor>& inputs,
                           std::mt19937_64& rng, std::size_t coords, double h, int refine, double accept) {
  for (auto t : inputs) t.zero_grad();
  ag::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.push_back(t.grad_copy());

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  if (coords == 0) {
    for (std::size_t i = 0; i < inputs.size(); ++i)
      for (std::size_t j = 0; j < inputs[i].numel(); ++j) picks.emplace_back(i, j);
  } else {
    std::uniform_int_distribution<std::size_t> which(0, inputs.size() - 1);
    for (std::size_t c = 0; c < coords; ++c) {
      const std::size_t i = which(rng);
      std::uniform_int_distribution<std::size_t> at(0, inputs[i].numel() - 1);
      picks.emplace_back(i, at(rng));
    }
  }

  GradCheckResult r;
  ag::NoGradGuard guard;
  for (auto [i, j] : picks) {
    auto t = inputs[i];
    double& x = t.data()[j];
    const double saved = x;
    double numeric = 0.0, e = 0.0, step = h;
    for (int k = 0; k <= refine; ++k, step /= 10.0) {
      x = saved + step;
      const double up = loss().item();
      x = saved - step;
      const double down = loss().item();
      x = saved;
      const double n = (up - down) / (2.0 * step);
      const double err = rel_error(analytic[i][j], n);
      if (k == 0 || err < e) {
        e = err;
        numeric = n;
      }
      if (e < accept) break;
    }
    if (e >= r.max_rel_error) {
      r.max_rel_error = e;
      std::ostringstream os;
      os << "input " << i << "[" << j << "]: " << analytic[i][j] << " vs " << numeric;
      r.worst = os.str();
    }
    ++r.coords;
  }
  return r;
}

ag::Tensor random_projection(const ag::Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto w = ag::Tensor::from(out.shape(), normal_values(out.numel(), rng));
  return ag::sum(ag::mul(out, w));
}

std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> off_zero_values(std::size_t n, std::mt19937_64& rng, double gap) {
  auto v = normal_values(n, rng);
  for (auto& x : v) {
    if (std::abs(x) < gap) x = x < 0 ? x - gap : x + gap;
  }
  return v;
}

}  // namespace patchsel::testing
