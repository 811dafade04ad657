#pragma once

#include <vector>

#include "bysgnn/config.hpp"
#include "bysgnn/tensor.hpp"

namespace bysgnn {

// s <- ρ s + (1-ρ) g²;  θ <- θ - lr g / (sqrt(s) + ε)
class RmsProp {
 public:
  RmsProp(const std::vector<Parameter>& params, double rho = 0.99, double eps = 1e-8);

  // Throws NumericalError naming the parameter if any gradient is not finite;
  // nothing is updated in that case.
  void step(std::vector<Parameter>& params, double lr);

  const std::vector<std::vector<double>>& state() const { return state_; }

 private:
  double rho_, eps_;
  std::vector<std::vector<double>> state_;
};

// lr0 · factor^floor(epoch / decay_every); constant when decay_every is 0.
double lr_schedule(std::size_t epoch, const TrainConfig& config);

}  // namespace bysgnn
