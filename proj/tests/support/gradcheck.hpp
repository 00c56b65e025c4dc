#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "patchsel/autograd/tensor.hpp"

namespace patchsel::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::string worst;  // "<input>[flat]: analytic vs numeric"
};

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up to
// rounding from blowing up the ratio.
double rel_error(double analytic, double numeric, double floor = 1e-3);

// Compares backward() against central differences for `coords` randomly chosen
// entries across `inputs` (every entry when coords == 0). `loss` must rebuild
// the graph from the current input values on every call.
// With refine > 0 a coordinate whose difference at h disagrees is retried at
// h/10, h/100, ... and the closest one counts. Deep leaky-ReLU nets have so many
// kinks that a +-h step straddles one now and then; the analytic gradient is
// still the limit the smaller steps converge to.
GradCheckResult grad_check(const std::function<ag::Tensor()>& loss, const std::vector<ag::Tensor>& inputs,
                           std::mt19937_64& rng, std::size_t coords = 0, double h = 1e-5, int refine = 0,
                           double accept = 1e-4);

// Fixed random projection so that sum(out * w) has a generic gradient (plain
// sum(out) is blind to anything mean-free, e.g. batch norm).
ag::Tensor random_projection(const ag::Tensor& out, std::uint64_t seed);

std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng, double scale = 1.0);
// Normal draws pushed at least `gap` away from zero (keeps leaky-relu kinks out
// of finite-difference stencils).
std::vector<double> off_zero_values(std::size_t n, std::mt19937_64& rng, double gap = 0.05);

}  // namespace patchsel::testing
