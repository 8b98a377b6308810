#include <cmath>

#include "adalab/common.hpp"
#include "adalab/gradcheck.hpp"

namespace adalab {

namespace {

// Keep relu/abs-style kinks away from the finite-difference step.
Tensor away_from_zero(Tensor t) {
  for (double& v : t.data) v = (v >= 0.0 ? v + 0.1 : v - 0.1);
  return t;
}

GradCheckCase unary_case(const std::string& name, std::vector<size_t> shape, uint64_t seed,
                         std::function<Tape::NodeId(Tape&, Tape::NodeId)> op) {
  GradCheckCase c;
  c.name = name;
  auto rng = derive_rng(seed, {fnv1a64(name.data(), name.size())});
  c.params["x"] = away_from_zero(random_normal(shape, 1.0, rng));
  c.params["w"] = random_normal(shape, 1.0, rng);  // weighting so output grads vary
  c.build = [op](Tape& t, const ParamStore&) {
    Tape::NodeId y = op(t, t.param("x"));
    return t.sum(t.mul(y, t.param("w")));
  };
  return c;
}

}  // namespace

std::vector<GradCheckCase> standard_primitive_cases(uint64_t seed) {
  std::vector<GradCheckCase> cases;

  {
    GradCheckCase c;
    c.name = "matmul";
    auto rng = derive_rng(seed, {1});
    c.params["a"] = random_normal({3, 4}, 1.0, rng);
    c.params["b"] = random_normal({4, 2}, 1.0, rng);
    c.params["w"] = random_normal({3, 2}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore&) {
      return t.sum(t.mul(t.matmul(t.param("a"), t.param("b")), t.param("w")));
    };
    cases.push_back(std::move(c));
  }
  cases.push_back(unary_case("relu", {4, 3}, seed, [](Tape& t, Tape::NodeId x) { return t.relu(x); }));
  cases.push_back(unary_case("softmax", {3, 5}, seed,
                             [](Tape& t, Tape::NodeId x) { return t.softmax(x); }));
  cases.push_back(unary_case("transpose", {3, 4}, seed,
                             [](Tape& t, Tape::NodeId x) { return t.transpose(t.transpose(x)); }));
  cases.push_back(unary_case("scale", {2, 6}, seed,
                             [](Tape& t, Tape::NodeId x) { return t.scale(x, -1.7); }));
  cases.push_back(unary_case("slice_rows", {5, 3}, seed, [](Tape& t, Tape::NodeId x) {
    return t.concat_rows(t.slice_rows(x, 1, 4), t.slice_rows(x, 0, 2));
  }));
  cases.push_back(unary_case("slice_cols", {3, 6}, seed, [](Tape& t, Tape::NodeId x) {
    return t.concat_cols(t.slice_cols(x, 2, 5), t.slice_cols(x, 0, 3));
  }));
  cases.push_back(unary_case("apply_unary_exp", {3, 3}, seed, [](Tape& t, Tape::NodeId x) {
    return t.apply_unary(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
  }));

  {
    GradCheckCase c;
    c.name = "add_mul";
    auto rng = derive_rng(seed, {2});
    c.params["a"] = random_normal({3, 3}, 1.0, rng);
    c.params["b"] = random_normal({3, 3}, 1.0, rng);
    c.params["w"] = random_normal({3, 3}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore&) {
      return t.sum(t.mul(t.add(t.param("a"), t.param("b")), t.param("w")));
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "bias_add";
    auto rng = derive_rng(seed, {3});
    c.params["x"] = random_normal({4, 3}, 1.0, rng);
    c.params["b"] = random_normal({3}, 1.0, rng);
    c.params["w"] = random_normal({4, 3}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore&) {
      return t.sum(t.mul(t.bias_add(t.param("x"), t.param("b")), t.param("w")));
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "layer_norm";
    auto rng = derive_rng(seed, {4});
    c.params["x"] = random_normal({3, 6}, 1.0, rng);
    c.params["g"] = random_normal({6}, 0.5, rng);
    c.params["b"] = random_normal({6}, 0.5, rng);
    c.params["w"] = random_normal({3, 6}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore&) {
      return t.sum(t.mul(t.layer_norm(t.param("x"), t.param("g"), t.param("b")), t.param("w")));
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "embedding_gather_pool";
    auto rng = derive_rng(seed, {5});
    c.params["table"] = random_normal({7, 4}, 1.0, rng);
    c.params["w"] = random_normal({5, 4}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore&) {
      Tape::NodeId e = t.embedding(t.param("table"), {0, 3, 3, 6, 1});
      return t.mean(t.mul(e, t.param("w")));
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "cross_entropy";
    auto rng = derive_rng(seed, {6});
    c.params["logits"] = random_normal({4, 5}, 1.5, rng);
    c.build = [](Tape& t, const ParamStore&) {
      return t.cross_entropy(t.param("logits"), {1, 0, 4, 2}, {1, 1, 0, 1});
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "patchify";
    auto rng = derive_rng(seed, {7});
    c.inputs["img"] = random_uniform({8, 8}, 0.0, 1.0, rng);
    c.params["proj"] = random_normal({16, 3}, 0.5, rng);
    c.params["w"] = random_normal({4, 3}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore& in) {
      Tape::NodeId p = t.patchify(t.input("img", in.at("img")), 4);
      return t.sum(t.mul(t.matmul(p, t.param("proj")), t.param("w")));
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "linear_softmax_xent";
    auto rng = derive_rng(seed, {8});
    c.inputs["x"] = random_normal({3, 4}, 1.0, rng);
    c.params["w1"] = random_normal({4, 6}, 0.7, rng);
    c.params["b1"] = random_normal({6}, 0.3, rng);
    c.build = [](Tape& t, const ParamStore& in) {
      Tape::NodeId h = t.bias_add(t.matmul(t.input("x", in.at("x")), t.param("w1")), t.param("b1"));
      return t.cross_entropy(h, {2, 5, 0});
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "two_layer_relu_net";
    auto rng = derive_rng(seed, {9});
    c.inputs["x"] = random_normal({2, 5}, 1.0, rng);
    c.params["w1"] = random_normal({5, 7}, 0.7, rng);
    c.params["b1"] = away_from_zero(random_normal({7}, 0.4, rng));
    c.params["w2"] = random_normal({7, 3}, 0.7, rng);
    c.params["b2"] = random_normal({3}, 0.4, rng);
    c.build = [](Tape& t, const ParamStore& in) {
      Tape::NodeId h =
          t.relu(t.bias_add(t.matmul(t.input("x", in.at("x")), t.param("w1")), t.param("b1")));
      Tape::NodeId out = t.bias_add(t.matmul(h, t.param("w2")), t.param("b2"));
      return t.cross_entropy(out, {0, 2});
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "mean_reduction";
    auto rng = derive_rng(seed, {10});
    c.params["x"] = random_normal({4, 4}, 1.0, rng);
    c.build = [](Tape& t, const ParamStore&) { return t.mean(t.softmax(t.param("x"))); };
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace adalab
