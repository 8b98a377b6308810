#include "adalab/optim.hpp"

#include <cmath>

#include "adalab/common.hpp"

namespace adalab {

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.algo = Algo::Sgd;
  s.lr = lr;
  return s;
}

OptimizerState OptimizerState::adam(double lr) {
  OptimizerState s;
  s.algo = Algo::Adam;
  s.lr = lr;
  return s;
}

void OptimizerState::step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
  for (auto& [name, p] : params) {
    if (!grads.count(name)) throw ContractError("missing gradient for parameter: " + name);
  }
  ++steps;
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    if (!same_shape(p, g))
      throw ShapeError("gradient shape " + shape_str(g) + " != parameter shape " + shape_str(p) +
                       " for " + name);
    if (algo == Algo::Sgd) {
      for (size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * g.data[i];
      continue;
    }
    Tensor& mi = m[name];
    Tensor& vi = v[name];
    if (mi.data.empty()) mi = Tensor::zeros(p.shape);
    if (vi.data.empty()) vi = Tensor::zeros(p.shape);
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    for (size_t i = 0; i < p.data.size(); ++i) {
      mi.data[i] = beta1 * mi.data[i] + (1.0 - beta1) * g.data[i];
      vi.data[i] = beta2 * vi.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      double mhat = mi.data[i] / bc1;
      double vhat = vi.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace adalab
