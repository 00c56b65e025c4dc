#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace patchsel::testing {

struct OpCheck {
  std::string op;
  int cases = 0;
  std::size_t coords = 0;
  double tolerance = 1e-4;
  double max_rel_error = 0.0;
  std::string worst;
  bool pass() const { return cases > 0 && max_rel_error < tolerance; }
};

OpCheck check_conv2d(int cases, std::uint64_t seed);
OpCheck check_avg_pool2(int cases, std::uint64_t seed);
OpCheck check_batch_norm(int cases, std::uint64_t seed);
OpCheck check_leaky_relu(int cases, std::uint64_t seed);
OpCheck check_tempered_sigmoid(int cases, std::uint64_t seed);
OpCheck check_chain(int cases, std::uint64_t seed);  // conv -> leaky_relu -> pool -> sigmoid
OpCheck check_pixel_shuffle(int cases, std::uint64_t seed);
OpCheck check_pad_gather(int cases, std::uint64_t seed);
OpCheck check_res_block(int cases, std::uint64_t seed);
OpCheck check_reweighted_loss(int cases, std::uint64_t seed);
OpCheck check_patchnet(int cases, std::uint64_t seed);
OpCheck check_restorenet(int cases, std::uint64_t seed);

// Every check above with `cases` cases.
std::vector<OpCheck> gradient_suite(int cases, std::uint64_t seed);

}  // namespace patchsel::testing
