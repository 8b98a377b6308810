#include "adalab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adalab/common.hpp"

namespace adalab {

namespace {

double eval_loss(const GradCheckCase& c, const ParamStore& params, const ParamStore& inputs) {
  Tape tape(&params);
  Tape::NodeId loss = c.build(tape, inputs);
  const Tensor& v = tape.value(loss);
  if (v.numel() != 1) throw ContractError("gradient_check case must build a scalar loss");
  return v.data[0];
}

std::vector<size_t> pick_components(size_t n, size_t max_count, std::mt19937_64& rng) {
  if (n <= max_count) {
    std::vector<size_t> all(n);
    std::iota(all.begin(), all.end(), size_t{0});
    return all;
  }
  std::vector<size_t> picks(max_count);
  for (auto& p : picks) p = std::uniform_int_distribution<size_t>(0, n - 1)(rng);
  std::sort(picks.begin(), picks.end());
  picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
  return picks;
}

}  // namespace

GradCheckReport gradient_check(const std::vector<GradCheckCase>& cases, double tolerance,
                               size_t max_components_per_tensor, uint64_t seed) {
  constexpr double h = 1e-5;
  GradCheckReport report;
  for (const auto& c : cases) {
    Tape tape(&c.params);
    Tape::NodeId loss = c.build(tape, c.inputs);
    Gradients grads = tape.backward(loss);

    GradCheckEntry entry;
    entry.name = c.name;
    auto rng = derive_rng(seed, {fnv1a64(c.name.data(), c.name.size())});

    auto check_store = [&](const ParamStore& base, const std::map<std::string, Tensor>& analytic,
                           bool is_param) {
      for (const auto& [name, t] : base) {
        auto it = analytic.find(name);
        if (it == analytic.end()) continue;
        for (size_t i : pick_components(t.numel(), max_components_per_tensor, rng)) {
          ParamStore p = c.params;
          ParamStore in = c.inputs;
          Tensor& target = is_param ? p[name] : in[name];
          double orig = target.data[i];
          target.data[i] = orig + h;
          double up = eval_loss(c, p, in);
          target.data[i] = orig - h;
          double dn = eval_loss(c, p, in);
          target.data[i] = orig;
          double numeric = (up - dn) / (2.0 * h);
          double analytic_v = it->second.data[i];
          double rel = std::abs(analytic_v - numeric) /
                       std::max({1.0, std::abs(analytic_v), std::abs(numeric)});
          entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
      }
    };
    check_store(c.params, grads.params, true);
    check_store(c.inputs, grads.inputs, false);

    entry.pass = entry.max_rel_err < tolerance;
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.all_pass = report.all_pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace adalab
