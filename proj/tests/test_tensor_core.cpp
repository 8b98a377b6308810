#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "adalab/checkpoint.hpp"
#include "adalab/common.hpp"
#include "adalab/gradcheck.hpp"
#include "adalab/optim.hpp"
#include "adalab/tape.hpp"

using namespace adalab;

namespace {

// Independent oracle: plain triple loop.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.shape[0], b.shape[1]});
  for (size_t i = 0; i < a.shape[0]; ++i)
    for (size_t j = 0; j < b.shape[1]; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < a.shape[1]; ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("tensor_core");

TEST_CASE("matmul identity and fixed product") {
  Tape t;
  auto a = t.constant(Tensor::from({2, 2}, {1, 0, 0, 1}));
  auto b = t.constant(Tensor::from({2, 2}, {1, 2, 3, 4}));
  auto c = t.matmul(a, b);
  CHECK(t.value(c).data == std::vector<double>{1, 2, 3, 4});

  auto d = t.constant(Tensor::from({2, 2}, {1, 2, 3, 4}));
  auto e = t.constant(Tensor::from({2, 1}, {5, 6}));
  auto f = t.matmul(d, e);
  CHECK(t.value(f).data == std::vector<double>{17, 39});
}

TEST_CASE("matmul matches triple-loop oracle on random inputs") {
  auto rng = derive_rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    size_t m = 1 + rng() % 6, k = 1 + rng() % 6, n = 1 + rng() % 6;
    Tensor a = random_normal({m, k}, 1.0, rng);
    Tensor b = random_normal({k, n}, 1.0, rng);
    Tensor want = matmul_oracle(a, b);
    Tensor got = matmul_values(a, b);
    REQUIRE(got.shape == want.shape);
    for (size_t i = 0; i < want.numel(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul dimension mismatch names both shapes") {
  Tape t;
  auto a = t.constant(Tensor::zeros({2, 3}));
  auto b = t.constant(Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(t.matmul(a, b), ShapeError);
  try {
    t.matmul(a, b);
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax forced values and invariants") {
  Tape t;
  auto x = t.constant(Tensor::from({3}, {0, 0, 0}));
  auto s = t.softmax(x);
  for (double v : t.value(s).data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto y = t.constant(Tensor::from({2}, {0.0, std::log(2.0)}));
  auto sy = t.softmax(y);
  CHECK(t.value(sy).data[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(t.value(sy).data[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));

  // shift invariance and row sums at random points
  auto rng = derive_rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor v = random_normal({4, 6}, 3.0, rng);
    double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    Tensor shifted = v;
    for (double& d : shifted.data) d += c;
    Tape t2;
    auto s1 = t2.softmax(t2.constant(v));
    auto s2 = t2.softmax(t2.constant(shifted));
    for (size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (size_t j = 0; j < 6; ++j) {
        sum += t2.value(s1).at(r, j);
        CHECK(std::abs(t2.value(s1).at(r, j) - t2.value(s2).at(r, j)) < 1e-12);
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softmax rejects non-finite input") {
  Tape t;
  auto x = t.constant(Tensor::from({2}, {1.0, std::numeric_limits<double>::infinity()}));
  CHECK_THROWS_AS(t.softmax(x), NumericError);
}

TEST_CASE("cross_entropy forced values") {
  Tape t;
  auto uniform = t.constant(Tensor::zeros({1, 8}));
  auto l1 = t.cross_entropy(uniform, {5});
  CHECK(t.value(l1).data[0] == doctest::Approx(std::log(8.0)).epsilon(1e-12));

  Tensor peaked = Tensor::zeros({1, 4});
  peaked.data[2] = 50.0;
  Tape t2;
  auto l2 = t2.cross_entropy(t2.constant(peaked), {2});
  CHECK(t2.value(l2).data[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t2.value(l2).data[0] >= 0.0);
}

TEST_CASE("cross_entropy matches direct formula oracle") {
  auto rng = derive_rng(11);
  Tensor logits = random_normal({3, 4}, 2.0, rng);
  std::vector<int> targets = {2, 0, 3};
  // direct formula: mean of -log(exp(l_t) / sum exp(l_j))
  double want = 0.0;
  for (size_t i = 0; i < 3; ++i) {
    double denom = 0.0;
    for (size_t j = 0; j < 4; ++j) denom += std::exp(logits.at(i, j));
    want += -std::log(std::exp(logits.at(i, static_cast<size_t>(targets[i]))) / denom);
  }
  want /= 3.0;
  Tape t;
  auto l = t.cross_entropy(t.constant(logits), targets);
  CHECK(std::abs(t.value(l).data[0] - want) < 1e-10);
}

TEST_CASE("cross_entropy respects mask and validates targets") {
  Tensor logits = Tensor::from({2, 3}, {5, 0, 0, 0, 0, 5});
  Tape t;
  auto l = t.cross_entropy(t.constant(logits), {0, 0}, {1, 0});
  CHECK(t.value(l).data[0] == doctest::Approx(-std::log(std::exp(5.0) / (std::exp(5.0) + 2.0))));
  Tape t2;
  CHECK_THROWS_AS(t2.cross_entropy(t2.constant(logits), {0, 3}), IndexError);
  CHECK_THROWS_AS(t2.cross_entropy(t2.constant(logits), {0, -1}), IndexError);
}

TEST_CASE("backward basics: sum, untouched params, non-scalar loss") {
  ParamStore store;
  store["x"] = Tensor::from({2, 2}, {1, 2, 3, 4});
  store["unused"] = Tensor::from({3}, {1, 1, 1});
  Tape t(&store);
  auto x = t.param("x");
  t.param("unused");
  auto loss = t.sum(x);
  Gradients g = t.backward(loss);
  CHECK(g.params["x"].data == std::vector<double>{1, 1, 1, 1});
  CHECK(g.params["unused"].data == std::vector<double>{0, 0, 0});

  Tape t2(&store);
  auto y = t2.param("x");
  CHECK_THROWS_AS(t2.backward(y), ContractError);
}

TEST_CASE("gradients accumulate additively on fan-out") {
  ParamStore store;
  store["x"] = Tensor::from({2}, {1.0, 2.0});
  Tape t(&store);
  auto x = t.param("x");
  auto y = t.add(x, x);  // y = 2x
  auto loss = t.sum(y);
  Gradients g = t.backward(loss);
  CHECK(g.params["x"].data == std::vector<double>{2, 2});
}

TEST_CASE("two-layer net gradients match finite differences") {
  auto cases = standard_primitive_cases(123);
  GradCheckReport rep = gradient_check(cases, 1e-4);
  for (const auto& e : rep.entries) {
    INFO(e.name, " max_rel_err=", e.max_rel_err);
    CHECK(e.pass);
  }
  CHECK(rep.all_pass);
  CHECK(rep.worst < 1e-4);
}

TEST_CASE("gradient_check fails on a corrupted backward rule") {
  GradCheckCase bad;
  bad.name = "corrupted";
  auto rng = derive_rng(5);
  bad.params["x"] = random_normal({3, 3}, 1.0, rng);
  bad.build = [](Tape& t, const ParamStore&) {
    // forward x^2 but derivative claimed to be 3x instead of 2x
    auto y = t.apply_unary(
        t.param("x"), [](double v) { return v * v; }, [](double v, double) { return 3.0 * v; });
    return t.sum(y);
  };
  GradCheckReport rep = gradient_check({bad}, 1e-4);
  CHECK_FALSE(rep.all_pass);
}

TEST_CASE("tape replay determinism") {
  auto run = [](uint64_t seed) {
    auto rng = derive_rng(seed);
    ParamStore store;
    store["w"] = random_normal({4, 4}, 1.0, rng);
    Tape t(&store);
    auto x = t.input("x", random_normal({2, 4}, 1.0, rng));
    auto h = t.relu(t.matmul(x, t.param("w")));
    auto loss = t.mean(h);
    Gradients g = t.backward(loss);
    return std::make_pair(t.value(loss).data[0], g.params["w"].data);
  };
  auto [l1, g1] = run(99);
  auto [l2, g2] = run(99);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("optimizer steps") {
  ParamStore params;
  params["p"] = Tensor::scalar(1.0);
  std::map<std::string, Tensor> grads;
  grads["p"] = Tensor::scalar(2.0);

  OptimizerState plain = OptimizerState::sgd(0.1);
  plain.step(params, grads);
  CHECK(params["p"].data[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(plain.steps == 1);

  OptimizerState zero_lr = OptimizerState::sgd(0.0);
  ParamStore p2;
  p2["p"] = Tensor::scalar(3.0);
  zero_lr.step(p2, grads);
  CHECK(p2["p"].data[0] == 3.0);

  OptimizerState adam = OptimizerState::adam(0.5);
  ParamStore p3;
  p3["p"] = Tensor::scalar(3.0);
  std::map<std::string, Tensor> zg;
  zg["p"] = Tensor::scalar(0.0);
  OptimizerState plain2 = OptimizerState::sgd(0.5);
  plain2.step(p3, zg);
  CHECK(p3["p"].data[0] == 3.0);

  std::map<std::string, Tensor> missing;
  CHECK_THROWS_AS(adam.step(p3, missing), ContractError);

  // adam bias correction: first step moves by ~lr * sign(g)
  ParamStore p4;
  p4["p"] = Tensor::scalar(0.0);
  OptimizerState a2 = OptimizerState::adam(0.1);
  std::map<std::string, Tensor> g4;
  g4["p"] = Tensor::scalar(4.0);
  a2.step(p4, g4);
  CHECK(p4["p"].data[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(a2.m["p"].shape == p4["p"].shape);
  CHECK(a2.steps == 1);
}

TEST_CASE("checkpoint round trip with manifest hash") {
  auto rng = derive_rng(314);
  ParamStore params;
  params["enc.w"] = random_normal({4, 3}, 1.0, rng);
  params["dec.bias"] = random_normal({5}, 1.0, rng);
  std::string path = (std::filesystem::temp_directory_path() / "adalab_ckpt_test.bin").string();
  save_checkpoint(params, path);

  ParamStore loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded.count("enc.w") == 1);
  CHECK(loaded["enc.w"].shape == params["enc.w"].shape);
  for (size_t i = 0; i < params["enc.w"].numel(); ++i) {
    // f32 storage: round trip within single precision
    CHECK(loaded["enc.w"].data[i] ==
          doctest::Approx(params["enc.w"].data[i]).epsilon(1e-6));
    CHECK(loaded["enc.w"].data[i] == static_cast<double>(static_cast<float>(params["enc.w"].data[i])));
  }

  // corrupt the payload; manifest hash must catch it
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(10);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_checkpoint(path), ChecksumError);
  std::filesystem::remove(path);
  std::filesystem::remove(checkpoint_manifest_path(path));
}

TEST_CASE("tensor validation op detects non-finite") {
  Tensor t = Tensor::from({2}, {1.0, 2.0});
  CHECK(t.all_finite());
  t.data[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.check_finite("unit"), NumericError);
}

TEST_SUITE_END();
