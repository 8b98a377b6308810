#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "adalab/tensor.hpp"

namespace adalab {

// Named trainable tensors. std::map keeps iteration order stable so optimizer
// sweeps and checkpoints are deterministic.
using ParamStore = std::map<std::string, Tensor>;

struct Gradients {
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> inputs;
};

// Reverse-mode tape. Nodes are recorded in topological order (parents always
// precede children); one backward pass yields a gradient for every registered
// parameter and every gradient-requesting input, zeros where the loss does
// not depend on them. A tape is confined to one logical thread.
class Tape {
 public:
  using NodeId = uint32_t;

  Tape() = default;
  explicit Tape(const ParamStore* params) : store_(params) {}

  NodeId constant(Tensor v);
  // Gradient-requesting leaf (e.g. the image being perturbed).
  NodeId input(const std::string& name, Tensor v);
  // Trainable leaf, value copied from the bound store. Repeated calls with
  // the same name return the same node.
  NodeId param(const std::string& name);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId bias_add(NodeId x, NodeId bias);
  NodeId relu(NodeId x);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias);
  NodeId embedding(NodeId table, std::vector<int> ids);
  NodeId softmax(NodeId x);
  // Mean of -log softmax(logits)[l, target_l] over unmasked positions. An
  // empty mask counts every position.
  NodeId cross_entropy(NodeId logits, std::vector<int> targets, std::vector<uint8_t> mask = {});
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_rows(NodeId x, size_t r0, size_t r1);
  NodeId slice_cols(NodeId x, size_t c0, size_t c1);
  // [G x G] image -> [(G/p)^2 x p^2] patch matrix, patches in row-major
  // order, pixels row-major within each patch.
  NodeId patchify(NodeId image, size_t patch);
  NodeId transpose(NodeId x);
  NodeId scale(NodeId x, double c);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  // Elementwise y = f(x) with user-supplied derivative df(x, y). Exists for
  // odd activations and for gradient-check fixtures.
  NodeId apply_unary(NodeId x, std::function<double(double)> f,
                     std::function<double(double, double)> df);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  size_t size() const { return nodes_.size(); }

  Gradients backward(NodeId loss);

 private:
  struct Node {
    Tensor value;
    std::function<void(const Tensor& g, std::vector<Tensor>& grads)> back;
  };

  NodeId push(Tensor value, std::function<void(const Tensor&, std::vector<Tensor>&)> back = {});
  const ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::map<std::string, NodeId> param_nodes_;
  std::map<std::string, NodeId> input_nodes_;
};

// Accumulates `delta` into `slot`, initializing it to zeros on first touch.
void accumulate_grad(Tensor& slot, const Tensor& like, const std::vector<double>& delta);

}  // namespace adalab
