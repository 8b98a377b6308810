#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "adalab/tape.hpp"

namespace adalab {

// Plain gradient step or bias-corrected adaptive-moment step. Moment
// accumulators mirror parameter shapes; the step counter advances by one per
// update call.
struct OptimizerState {
  enum class Algo { Sgd, Adam };

  Algo algo = Algo::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t steps = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;

  static OptimizerState sgd(double lr);
  static OptimizerState adam(double lr);

  // Updates params in place. Every parameter must have a gradient entry.
  void step(ParamStore& params, const std::map<std::string, Tensor>& grads);
};

}  // namespace adalab
