#include "bysgnn/optimizer.hpp"

#include <cmath>

#include "bysgnn/error.hpp"

namespace bysgnn {

RmsProp::RmsProp(const std::vector<Parameter>& params, double rho, double eps) : rho_(rho), eps_(eps) {
  for (const auto& p : params) state_.emplace_back(p.tensor.numel(), 0.0);
}

void RmsProp::step(std::vector<Parameter>& params, double lr) {
  if (params.size() != state_.size()) throw ContractError("optimizer state does not match the parameter list");
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter " + p.name);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto grad = params[i].tensor.grad();
    auto& s = state_[i];
    auto value = params[i].tensor.mutable_data();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double g = grad.empty() ? 0.0 : grad[k];
      s[k] = rho_ * s[k] + (1.0 - rho_) * g * g;
      value[k] -= lr * g / (std::sqrt(s[k]) + eps_);
    }
  }
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  if (config.decay_every == 0) return config.lr0;
  return config.lr0 * std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_every));
}

}  // namespace bysgnn
