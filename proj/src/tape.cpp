#include "adalab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "adalab/common.hpp"

namespace adalab {

namespace {

void acc(Tensor& slot, const Tensor& like, const double* delta) {
  if (slot.data.empty()) slot = Tensor::zeros(like.shape);
  for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += delta[i];
}

void acc_tensor(Tensor& slot, const Tensor& like, const Tensor& delta) {
  acc(slot, like, delta.data.data());
}

}  // namespace

void accumulate_grad(Tensor& slot, const Tensor& like, const std::vector<double>& delta) {
  acc(slot, like, delta.data());
}

Tape::NodeId Tape::push(Tensor value, std::function<void(const Tensor&, std::vector<Tensor>&)> back) {
  nodes_.push_back(Node{std::move(value), std::move(back)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::constant(Tensor v) { return push(std::move(v)); }

Tape::NodeId Tape::input(const std::string& name, Tensor v) {
  if (input_nodes_.count(name)) throw ContractError("duplicate input name on tape: " + name);
  NodeId id = push(std::move(v));
  input_nodes_[name] = id;
  return id;
}

Tape::NodeId Tape::param(const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return it->second;
  if (!store_) throw ContractError("tape has no bound parameter store");
  auto p = store_->find(name);
  if (p == store_->end()) throw ContractError("unknown parameter: " + name);
  NodeId id = push(p->second);
  param_nodes_[name] = id;
  return id;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.ndim() != 2 || B.ndim() != 2 || A.shape[1] != B.shape[0])
    throw ShapeError("matmul shape mismatch: " + shape_str(A) + " x " + shape_str(B));
  Tensor out = matmul_values(A, B);
  return push(std::move(out), [this, a, b](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
    // dA = g . B^T
    std::vector<double> da(m * k, 0.0);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) {
        double gv = g.data[i * n + j];
        const double* brow = B.data.data() + 0;
        for (size_t kk = 0; kk < k; ++kk) da[i * k + kk] += gv * brow[kk * n + j];
      }
    // dB = A^T . g
    std::vector<double> db(k * n, 0.0);
    for (size_t i = 0; i < m; ++i)
      for (size_t kk = 0; kk < k; ++kk) {
        double av = A.data[i * k + kk];
        for (size_t j = 0; j < n; ++j) db[kk * n + j] += av * g.data[i * n + j];
      }
    acc(grads[a], A, da.data());
    acc(grads[b], B, db.data());
  });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!same_shape(A, B))
    throw ShapeError("add shape mismatch: " + shape_str(A) + " vs " + shape_str(B));
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
  return push(std::move(out), [this, a, b](const Tensor& g, std::vector<Tensor>& grads) {
    acc_tensor(grads[a], value(a), g);
    acc_tensor(grads[b], value(b), g);
  });
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!same_shape(A, B))
    throw ShapeError("mul shape mismatch: " + shape_str(A) + " vs " + shape_str(B));
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  return push(std::move(out), [this, a, b](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    std::vector<double> da(A.data.size()), db(B.data.size());
    for (size_t i = 0; i < da.size(); ++i) {
      da[i] = g.data[i] * B.data[i];
      db[i] = g.data[i] * A.data[i];
    }
    acc(grads[a], A, da.data());
    acc(grads[b], B, db.data());
  });
}

Tape::NodeId Tape::bias_add(NodeId x, NodeId bias) {
  const Tensor& X = value(x);
  const Tensor& B = value(bias);
  if (B.ndim() != 1 || B.shape[0] != X.cols())
    throw ShapeError("bias_add expects bias [" + std::to_string(X.cols()) + "], got " + shape_str(B));
  Tensor out = X;
  size_t r = X.rows(), c = X.cols();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out.data[i * c + j] += B.data[j];
  return push(std::move(out), [this, x, bias](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    size_t r = X.rows(), c = X.cols();
    acc_tensor(grads[x], X, g);
    std::vector<double> db(c, 0.0);
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) db[j] += g.data[i * c + j];
    acc(grads[bias], value(bias), db.data());
  });
}

Tape::NodeId Tape::relu(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [this, x](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    std::vector<double> dx(X.data.size());
    for (size_t i = 0; i < dx.size(); ++i) dx[i] = X.data[i] > 0.0 ? g.data[i] : 0.0;
    acc(grads[x], X, dx.data());
  });
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias) {
  const Tensor& X = value(x);
  const Tensor& G = value(gain);
  const Tensor& B = value(bias);
  size_t c = X.cols();
  if (G.numel() != c || B.numel() != c)
    throw ShapeError("layer_norm gain/bias must have " + std::to_string(c) + " entries");
  Tensor out = X;
  size_t r = X.rows();
  for (size_t i = 0; i < r; ++i)
    layer_norm_row(X.data.data() + i * c, c, G.data.data(), B.data.data(), out.data.data() + i * c);
  return push(std::move(out), [this, x, gain, bias](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    size_t r = X.rows(), c = X.cols();
    double n = static_cast<double>(c);
    std::vector<double> dx(X.data.size(), 0.0), dg(c, 0.0), db(c, 0.0);
    for (size_t i = 0; i < r; ++i) {
      const double* xr = X.data.data() + i * c;
      const double* gr = g.data.data() + i * c;
      double mean = 0.0;
      for (size_t j = 0; j < c; ++j) mean += xr[j];
      mean /= n;
      double var = 0.0;
      for (size_t j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
      var /= n;
      double inv = 1.0 / std::sqrt(var + kLayerNormEps);
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (size_t j = 0; j < c; ++j) {
        double xhat = (xr[j] - mean) * inv;
        double dxhat = gr[j] * G.data[j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        dg[j] += gr[j] * xhat;
        db[j] += gr[j];
      }
      for (size_t j = 0; j < c; ++j) {
        double xhat = (xr[j] - mean) * inv;
        double dxhat = gr[j] * G.data[j];
        dx[i * c + j] = inv * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
      }
    }
    acc(grads[x], X, dx.data());
    acc(grads[gain], G, dg.data());
    acc(grads[bias], value(bias), db.data());
  });
}

Tape::NodeId Tape::embedding(NodeId table, std::vector<int> ids) {
  const Tensor& T = value(table);
  if (T.ndim() != 2) throw ShapeError("embedding table must be 2-d, got " + shape_str(T));
  size_t v = T.shape[0], e = T.shape[1];
  for (int id : ids)
    if (id < 0 || static_cast<size_t>(id) >= v)
      throw IndexError("embedding id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(v) + ")");
  Tensor out = Tensor::zeros({ids.size(), e});
  for (size_t i = 0; i < ids.size(); ++i)
    std::memcpy(out.data.data() + i * e, T.data.data() + static_cast<size_t>(ids[i]) * e,
                e * sizeof(double));
  return push(std::move(out),
              [this, table, ids = std::move(ids)](const Tensor& g, std::vector<Tensor>& grads) {
                const Tensor& T = value(table);
                size_t e = T.shape[1];
                std::vector<double> dt(T.data.size(), 0.0);
                for (size_t i = 0; i < ids.size(); ++i)
                  for (size_t j = 0; j < e; ++j)
                    dt[static_cast<size_t>(ids[i]) * e + j] += g.data[i * e + j];
                acc(grads[table], T, dt.data());
              });
}

Tape::NodeId Tape::softmax(NodeId x) {
  const Tensor& X = value(x);
  if (X.cols() < 1) throw ShapeError("softmax needs a non-empty last dimension");
  X.check_finite("softmax input");
  Tensor out = X;
  size_t r = X.rows(), c = X.cols();
  for (size_t i = 0; i < r; ++i) softmax_row(X.data.data() + i * c, c, out.data.data() + i * c);
  Tensor probs = out;
  return push(std::move(out), [this, x, probs](const Tensor& g, std::vector<Tensor>& grads) {
    size_t r = probs.rows(), c = probs.cols();
    std::vector<double> dx(probs.data.size());
    for (size_t i = 0; i < r; ++i) {
      const double* p = probs.data.data() + i * c;
      const double* gr = g.data.data() + i * c;
      double dot = 0.0;
      for (size_t j = 0; j < c; ++j) dot += gr[j] * p[j];
      for (size_t j = 0; j < c; ++j) dx[i * c + j] = p[j] * (gr[j] - dot);
    }
    acc(grads[x], value(x), dx.data());
  });
}

Tape::NodeId Tape::cross_entropy(NodeId logits, std::vector<int> targets, std::vector<uint8_t> mask) {
  const Tensor& L = value(logits);
  if (L.ndim() != 2) throw ShapeError("cross_entropy logits must be 2-d, got " + shape_str(L));
  size_t rows = L.shape[0], v = L.shape[1];
  if (targets.size() != rows)
    throw ShapeError("cross_entropy target count " + std::to_string(targets.size()) +
                     " != logit rows " + std::to_string(rows));
  if (!mask.empty() && mask.size() != rows)
    throw ShapeError("cross_entropy mask length mismatch");
  for (int t : targets)
    if (t < 0 || static_cast<size_t>(t) >= v)
      throw IndexError("cross_entropy target " + std::to_string(t) + " out of range [0, " +
                       std::to_string(v) + ")");
  size_t counted = 0;
  Tensor probs = Tensor::zeros(L.shape);
  double loss = 0.0;
  for (size_t i = 0; i < rows; ++i) {
    softmax_row(L.data.data() + i * v, v, probs.data.data() + i * v);
    if (mask.empty() || mask[i]) {
      loss += -std::log(probs.data[i * v + static_cast<size_t>(targets[i])]);
      ++counted;
    }
  }
  if (counted == 0) throw ContractError("cross_entropy mask excludes every position");
  loss /= static_cast<double>(counted);
  return push(Tensor::scalar(loss),
              [this, logits, targets = std::move(targets), mask = std::move(mask), probs,
               counted](const Tensor& g, std::vector<Tensor>& grads) {
                size_t rows = probs.shape[0], v = probs.shape[1];
                double scale = g.data[0] / static_cast<double>(counted);
                std::vector<double> dl(probs.data.size(), 0.0);
                for (size_t i = 0; i < rows; ++i) {
                  if (!mask.empty() && !mask[i]) continue;
                  for (size_t j = 0; j < v; ++j) dl[i * v + j] = probs.data[i * v + j] * scale;
                  dl[i * v + static_cast<size_t>(targets[i])] -= scale;
                }
                acc(grads[logits], value(logits), dl.data());
              });
}

Tape::NodeId Tape::concat_rows(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.ndim() != 2 || B.ndim() != 2 || A.shape[1] != B.shape[1])
    throw ShapeError("concat_rows shape mismatch: " + shape_str(A) + " vs " + shape_str(B));
  Tensor out = Tensor::zeros({A.shape[0] + B.shape[0], A.shape[1]});
  std::copy(A.data.begin(), A.data.end(), out.data.begin());
  std::copy(B.data.begin(), B.data.end(), out.data.begin() + A.data.size());
  return push(std::move(out), [this, a, b](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    acc(grads[a], A, g.data.data());
    acc(grads[b], B, g.data.data() + A.data.size());
  });
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.ndim() != 2 || B.ndim() != 2 || A.shape[0] != B.shape[0])
    throw ShapeError("concat_cols shape mismatch: " + shape_str(A) + " vs " + shape_str(B));
  size_t r = A.shape[0], ca = A.shape[1], cb = B.shape[1];
  Tensor out = Tensor::zeros({r, ca + cb});
  for (size_t i = 0; i < r; ++i) {
    std::memcpy(out.data.data() + i * (ca + cb), A.data.data() + i * ca, ca * sizeof(double));
    std::memcpy(out.data.data() + i * (ca + cb) + ca, B.data.data() + i * cb, cb * sizeof(double));
  }
  return push(std::move(out), [this, a, b, r, ca, cb](const Tensor& g, std::vector<Tensor>& grads) {
    std::vector<double> da(r * ca), db(r * cb);
    for (size_t i = 0; i < r; ++i) {
      std::memcpy(da.data() + i * ca, g.data.data() + i * (ca + cb), ca * sizeof(double));
      std::memcpy(db.data() + i * cb, g.data.data() + i * (ca + cb) + ca, cb * sizeof(double));
    }
    acc(grads[a], value(a), da.data());
    acc(grads[b], value(b), db.data());
  });
}

Tape::NodeId Tape::slice_rows(NodeId x, size_t r0, size_t r1) {
  const Tensor& X = value(x);
  if (X.ndim() != 2 || r0 > r1 || r1 > X.shape[0])
    throw ShapeError("slice_rows [" + std::to_string(r0) + ", " + std::to_string(r1) +
                     ") invalid for " + shape_str(X));
  size_t c = X.shape[1];
  Tensor out = Tensor::zeros({r1 - r0, c});
  std::copy(X.data.begin() + r0 * c, X.data.begin() + r1 * c, out.data.begin());
  return push(std::move(out), [this, x, r0, c](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    std::vector<double> dx(X.data.size(), 0.0);
    std::copy(g.data.begin(), g.data.end(), dx.begin() + r0 * c);
    acc(grads[x], X, dx.data());
  });
}

Tape::NodeId Tape::slice_cols(NodeId x, size_t c0, size_t c1) {
  const Tensor& X = value(x);
  if (X.ndim() != 2 || c0 > c1 || c1 > X.shape[1])
    throw ShapeError("slice_cols [" + std::to_string(c0) + ", " + std::to_string(c1) +
                     ") invalid for " + shape_str(X));
  size_t r = X.shape[0], c = X.shape[1], w = c1 - c0;
  Tensor out = Tensor::zeros({r, w});
  for (size_t i = 0; i < r; ++i)
    std::memcpy(out.data.data() + i * w, X.data.data() + i * c + c0, w * sizeof(double));
  return push(std::move(out), [this, x, c0, w](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    size_t r = X.shape[0], c = X.shape[1];
    std::vector<double> dx(X.data.size(), 0.0);
    for (size_t i = 0; i < r; ++i)
      std::memcpy(dx.data() + i * c + c0, g.data.data() + i * w, w * sizeof(double));
    acc(grads[x], X, dx.data());
  });
}

Tape::NodeId Tape::patchify(NodeId image, size_t patch) {
  const Tensor& X = value(image);
  if (X.ndim() != 2 || X.shape[0] != X.shape[1])
    throw ShapeError("patchify expects a square image, got " + shape_str(X));
  size_t g = X.shape[0];
  if (patch == 0 || g % patch != 0)
    throw ShapeError("image size " + std::to_string(g) + " not divisible by patch " +
                     std::to_string(patch));
  size_t side = g / patch, np = side * side, pe = patch * patch;
  Tensor out = Tensor::zeros({np, pe});
  for (size_t pr = 0; pr < side; ++pr)
    for (size_t pc = 0; pc < side; ++pc)
      for (size_t i = 0; i < patch; ++i)
        for (size_t j = 0; j < patch; ++j)
          out.data[(pr * side + pc) * pe + i * patch + j] =
              X.data[(pr * patch + i) * g + pc * patch + j];
  return push(std::move(out), [this, image, patch](const Tensor& g2, std::vector<Tensor>& grads) {
    const Tensor& X = value(image);
    size_t g = X.shape[0], side = g / patch, pe = patch * patch;
    std::vector<double> dx(X.data.size(), 0.0);
    for (size_t pr = 0; pr < side; ++pr)
      for (size_t pc = 0; pc < side; ++pc)
        for (size_t i = 0; i < patch; ++i)
          for (size_t j = 0; j < patch; ++j)
            dx[(pr * patch + i) * g + pc * patch + j] =
                g2.data[(pr * side + pc) * pe + i * patch + j];
    acc(grads[image], X, dx.data());
  });
}

Tape::NodeId Tape::transpose(NodeId x) {
  const Tensor& X = value(x);
  if (X.ndim() != 2) throw ShapeError("transpose expects 2-d, got " + shape_str(X));
  size_t r = X.shape[0], c = X.shape[1];
  Tensor out = Tensor::zeros({c, r});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out.data[j * r + i] = X.data[i * c + j];
  return push(std::move(out), [this, x, r, c](const Tensor& g, std::vector<Tensor>& grads) {
    std::vector<double> dx(r * c);
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) dx[i * c + j] = g.data[j * r + i];
    acc(grads[x], value(x), dx.data());
  });
}

Tape::NodeId Tape::scale(NodeId x, double cfac) {
  Tensor out = value(x);
  for (double& v : out.data) v *= cfac;
  return push(std::move(out), [this, x, cfac](const Tensor& g, std::vector<Tensor>& grads) {
    std::vector<double> dx(g.data.size());
    for (size_t i = 0; i < dx.size(); ++i) dx[i] = g.data[i] * cfac;
    acc(grads[x], value(x), dx.data());
  });
}

Tape::NodeId Tape::sum(NodeId x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data) s += v;
  return push(Tensor::scalar(s), [this, x](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    std::vector<double> dx(X.data.size(), g.data[0]);
    acc(grads[x], X, dx.data());
  });
}

Tape::NodeId Tape::mean(NodeId x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data) s += v;
  double n = static_cast<double>(X.numel());
  return push(Tensor::scalar(s / n), [this, x, n](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    std::vector<double> dx(X.data.size(), g.data[0] / n);
    acc(grads[x], X, dx.data());
  });
}

Tape::NodeId Tape::apply_unary(NodeId x, std::function<double(double)> f,
                               std::function<double(double, double)> df) {
  const Tensor& X = value(x);
  Tensor out = X;
  for (double& v : out.data) v = f(v);
  NodeId y = push(std::move(out));
  nodes_[y].back = [this, x, y, df = std::move(df)](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& X = value(x);
    const Tensor& Y = value(y);
    std::vector<double> dx(X.data.size());
    for (size_t i = 0; i < dx.size(); ++i) dx[i] = g.data[i] * df(X.data[i], Y.data[i]);
    acc(grads[x], X, dx.data());
  };
  return y;
}

Gradients Tape::backward(NodeId loss) {
  if (loss >= nodes_.size()) throw ContractError("loss node not on tape");
  if (nodes_[loss].value.numel() != 1)
    throw ContractError("backward requires a scalar loss, got " + shape_str(nodes_[loss].value));
  std::vector<Tensor> grads(nodes_.size());
  grads[loss] = Tensor::full(nodes_[loss].value.shape, 1.0);
  for (size_t i = loss + 1; i-- > 0;) {
    if (grads[i].data.empty() || !nodes_[i].back) continue;
    nodes_[i].back(grads[i], grads);
  }
  Gradients out;
  for (const auto& [name, id] : param_nodes_)
    out.params[name] = grads[id].data.empty() ? Tensor::zeros(nodes_[id].value.shape)
                                              : std::move(grads[id]);
  for (const auto& [name, id] : input_nodes_)
    out.inputs[name] = grads[id].data.empty() ? Tensor::zeros(nodes_[id].value.shape)
                                              : std::move(grads[id]);
  return out;
}

}  // namespace adalab
