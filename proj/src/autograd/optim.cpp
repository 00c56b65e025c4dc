#include "patchsel/autograd/optim.hpp"

#include <cmath>
#include <numbers>

#include "patchsel/error.hpp"

namespace patchsel::ag {

Adam::Adam(std::vector<NamedTensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  slots_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    slots_[i].m.assign(params_[i].tensor.numel(), 0.0);
    slots_[i].v.assign(params_[i].tensor.numel(), 0.0);
  }
}

void Adam::step(double lr, bool ascend) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  // Validate everything first so a NaN never leaves a half-updated model.
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.impl()->grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  const double dir = ascend ? -1.0 : 1.0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    TensorImpl* t = params_[i].tensor.impl();
    if (t->grad.empty()) continue;
    bool all_zero = true;
    for (double g : t->grad) {
      if (g != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) continue;
    AdamSlot& s = slots_[i];
    s.step += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.step));
    for (std::size_t j = 0; j < t->data.size(); ++j) {
      const double g = dir * t->grad[j];
      s.m[j] = cfg_.beta1 * s.m[j] + (1.0 - cfg_.beta1) * g;
      s.v[j] = cfg_.beta2 * s.v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = s.m[j] / bc1;
      const double vhat = s.v[j] / bc2;
      t->data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double cosine_lr(int epoch, const LrSchedule& sched) {
  if (sched.total_epochs <= 0) throw ConfigError("cosine_lr: total_epochs must be positive");
  if (epoch < 0 || epoch > sched.total_epochs) {
    throw ConfigError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(sched.total_epochs) + "]");
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(sched.total_epochs);
  return sched.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace patchsel::ag
