#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adalab/tape.hpp"

namespace adalab {

// One differentiable scalar built from seeded params/inputs. `build` must be
// a pure function of the stores it is given.
struct GradCheckCase {
  std::string name;
  ParamStore params;
  ParamStore inputs;
  std::function<Tape::NodeId(Tape&, const ParamStore& inputs)> build;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool all_pass = true;
};

// Compares backward() against central finite differences (h = 1e-5) on every
// component, or on `max_components_per_tensor` seeded samples per tensor.
// Error metric: |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport gradient_check(const std::vector<GradCheckCase>& cases, double tolerance,
                               size_t max_components_per_tensor = SIZE_MAX, uint64_t seed = 0);

// One case per shipped primitive, randomized from `seed`: matmul, add, mul,
// bias_add, relu, layer_norm, embedding, softmax, cross_entropy, concats,
// slices, patchify, transpose, scale, sum, mean, apply_unary.
std::vector<GradCheckCase> standard_primitive_cases(uint64_t seed);

}  // namespace adalab
