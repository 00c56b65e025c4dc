#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchsel/autograd/tensor.hpp"

namespace patchsel::ag {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers and step counter for one parameter tensor.
struct AdamSlot {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// Adam with bias correction. A parameter whose gradient is absent or all zero
// is left untouched for that step (its moments and counter do not advance).
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamConfig cfg = {});

  // Descends by default; `ascend` flips the update direction, which is the
  // same as stepping on the negated gradient.
  void step(double lr, bool ascend = false);
  void zero_grad();

  const std::vector<NamedTensor>& params() const { return params_; }
  const AdamConfig& config() const { return cfg_; }
  std::vector<AdamSlot>& slots() { return slots_; }
  const std::vector<AdamSlot>& slots() const { return slots_; }

 private:
  std::vector<NamedTensor> params_;
  AdamConfig cfg_;
  std::vector<AdamSlot> slots_;
};

struct LrSchedule {
  double base_lr = 2.5e-4;
  int total_epochs = 1;
};

// Half-cycle cosine: base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)).
double cosine_lr(int epoch, const LrSchedule& sched);

}  // namespace patchsel::ag
