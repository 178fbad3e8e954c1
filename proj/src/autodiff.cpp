#include "vdn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vdn/error.hpp"

namespace vdn {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::add_bias: return "add_bias";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::relu: return "relu";
    case OpKind::prelu: return "prelu";
    case OpKind::mul_channel: return "mul_channel";
    case OpKind::l05_penalty: return "l05_penalty";
    case OpKind::cross_entropy: return "cross_entropy";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::constant, {}, std::move(value), {}, nullptr, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Tensor copy(p.tensor.shape(), std::vector<double>(p.tensor.values().begin(), p.tensor.values().end()));
  nodes_.push_back(Node{OpKind::parameter, {}, std::move(copy), {}, &p, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), {}, nullptr, needs,
                        needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw Error("backward: loss node belongs to another tape");
  if (value(loss).size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + to_string(value(loss).shape()));
  for (auto& node : nodes_) node.grad.clear();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.backward) {
      // The callback only touches the buffers of earlier nodes.
      node.backward(*this, nodes_[i].grad);
    }
    if (nodes_[i].sink) {
      auto& dst = nodes_[i].sink->tensor.grad();
      const auto& src = nodes_[i].grad;
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  }
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
  return a.tape();
}

void require_matrix(const Tensor& t, const char* op, const char* name) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": " + name + " must be 2-D, got " + to_string(t.shape()));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul", "lhs");
  require_matrix(B, "matmul", "rhs");
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k)
    throw ShapeError("matmul: inner extents disagree, " + to_string(A.shape()) + " * " +
                     to_string(B.shape()));
  Tensor C({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A.data()[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  const auto ia = a.id(), ib = b.id();
  return tape.record(OpKind::matmul, {ia, ib}, std::move(C),
                     [ia, ib, m, k, n](Tape& t, const std::vector<double>& g) {
                       const double* A = t.value(Var(&t, ia)).data();
                       const double* B = t.value(Var(&t, ib)).data();
                       if (t.requires_grad(ia)) {
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             const double* grow = g.data() + i * n;
                             const double* brow = B + p * n;
                             for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                             ga[i * k + p] += s;
                           }
                       }
                       if (t.requires_grad(ib)) {
                         auto& gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = A[i * k + p];
                             const double* grow = g.data() + i * n;
                             double* gbrow = gb.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                           }
                       }
                     });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  if (a.shape() != b.shape())
    throw ShapeError("add: shapes differ, " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a.value();
  out.drop_grad();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record(OpKind::add, {ia, ib}, std::move(out),
                     [ia, ib](Tape& t, const std::vector<double>& g) {
                       for (auto id : {ia, ib}) {
                         if (!t.requires_grad(id)) continue;
                         auto& dst = t.grad_buffer(id);
                         for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                       }
                     });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias, "add_bias");
  const Tensor& X = x.value();
  require_matrix(X, "add_bias", "input");
  const std::size_t rows = X.rows(), cols = X.cols();
  if (bias.value().size() != cols)
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not match input " +
                     to_string(X.shape()));
  Tensor out = X;
  out.drop_grad();
  const double* b = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data()[r * cols + c] += b[c];
  const auto ix = x.id(), ib = bias.id();
  return tape.record(OpKind::add_bias, {ix, ib}, std::move(out),
                     [ix, ib, rows, cols](Tape& t, const std::vector<double>& g) {
                       if (t.requires_grad(ix)) {
                         auto& gx = t.grad_buffer(ix);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         auto& gb = t.grad_buffer(ib);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
                       }
                     });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  out.drop_grad();
  for (auto& v : out.values()) v *= factor;
  const auto ix = x.id();
  return x.tape().record(OpKind::scale, {ix}, std::move(out),
                         [ix, factor](Tape& t, const std::vector<double>& g) {
                           auto& gx = t.grad_buffer(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
                         });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto ix = x.id();
  return x.tape().record(OpKind::sum, {ix}, Tensor::scalar(s),
                         [ix](Tape& t, const std::vector<double>& g) {
                           auto& gx = t.grad_buffer(ix);
                           for (auto& v : gx) v += g[0];
                         });
}

Var relu(Var x) {
  Tensor out = x.value();
  out.drop_grad();
  for (auto& v : out.values()) v = v >= 0.0 ? v : 0.0;
  const auto ix = x.id();
  return x.tape().record(OpKind::relu, {ix}, std::move(out),
                         [ix](Tape& t, const std::vector<double>& g) {
                           const Tensor& X = t.value(Var(&t, ix));
                           auto& gx = t.grad_buffer(ix);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (X[i] >= 0.0) gx[i] += g[i];
                         });
}

Var prelu(Var x, Var slopes, std::span<const std::size_t> unit_map) {
  Tape& tape = same_tape(x, slopes, "prelu");
  const Tensor& X = x.value();
  const std::size_t cols = X.cols(), rows = X.size() / cols;
  const std::size_t nslopes = slopes.value().size();
  if (unit_map.size() != cols)
    throw ShapeError("prelu: unit map has " + std::to_string(unit_map.size()) +
                     " entries for " + std::to_string(cols) + " channels");
  for (std::size_t j = 0; j < cols; ++j)
    if (unit_map[j] >= nslopes)
      throw ShapeError("prelu: channel " + std::to_string(j) + " maps to slope " +
                       std::to_string(unit_map[j]) + ", only " + std::to_string(nslopes) +
                       " slopes exist");
  std::vector<std::size_t> map(unit_map.begin(), unit_map.end());
  const double* a = slopes.value().data();
  Tensor out = X;
  out.drop_grad();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double& v = out.data()[r * cols + c];
      if (v < 0.0) v *= a[map[c]];
    }
  const auto ix = x.id(), ia = slopes.id();
  return tape.record(
      OpKind::prelu, {ix, ia}, std::move(out),
      [ix, ia, rows, cols, map = std::move(map)](Tape& t, const std::vector<double>& g) {
        const double* X = t.value(Var(&t, ix)).data();
        const double* a = t.value(Var(&t, ia)).data();
        if (t.requires_grad(ix)) {
          auto& gx = t.grad_buffer(ix);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t i = r * cols + c;
              gx[i] += X[i] >= 0.0 ? g[i] : a[map[c]] * g[i];
            }
        }
        if (t.requires_grad(ia)) {
          auto& ga = t.grad_buffer(ia);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t i = r * cols + c;
              if (X[i] < 0.0) ga[map[c]] += X[i] * g[i];
            }
        }
      });
}

Var mul_channel(Var x, Var gain) {
  Tape& tape = same_tape(x, gain, "mul_channel");
  const Tensor& X = x.value();
  const std::size_t cols = X.cols(), rows = X.size() / cols;
  if (gain.value().size() != cols)
    throw ShapeError("mul_channel: gain " + to_string(gain.shape()) + " does not match input " +
                     to_string(X.shape()));
  const double* gn = gain.value().data();
  Tensor out = X;
  out.drop_grad();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data()[r * cols + c] *= gn[c];
  const auto ix = x.id(), ig = gain.id();
  return tape.record(OpKind::mul_channel, {ix, ig}, std::move(out),
                     [ix, ig, rows, cols](Tape& t, const std::vector<double>& g) {
                       const double* X = t.value(Var(&t, ix)).data();
                       const double* gn = t.value(Var(&t, ig)).data();
                       if (t.requires_grad(ix)) {
                         auto& gx = t.grad_buffer(ix);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c)
                             gx[r * cols + c] += gn[c] * g[r * cols + c];
                       }
                       if (t.requires_grad(ig)) {
                         auto& gg = t.grad_buffer(ig);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c)
                             gg[c] += X[r * cols + c] * g[r * cols + c];
                       }
                     });
}

Var l05_penalty(Var slopes, std::span<const std::uint8_t> frozen, double guard) {
  const Tensor& A = slopes.value();
  if (!frozen.empty() && frozen.size() != A.size())
    throw ShapeError("l05_penalty: frozen mask has " + std::to_string(frozen.size()) +
                     " entries for " + std::to_string(A.size()) + " slopes");
  std::vector<std::uint8_t> mask(frozen.begin(), frozen.end());
  mask.resize(A.size(), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i)
    if (!mask[i]) total += std::sqrt(std::abs(1.0 - A[i]));
  const auto ia = slopes.id();
  return slopes.tape().record(
      OpKind::l05_penalty, {ia}, Tensor::scalar(total),
      [ia, guard, mask = std::move(mask)](Tape& t, const std::vector<double>& g) {
        const Tensor& A = t.value(Var(&t, ia));
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < A.size(); ++i) {
          if (mask[i]) continue;
          const double d = 1.0 - A[i];
          if (d == 0.0) continue;
          const double magnitude = 0.5 / std::sqrt(std::max(std::abs(d), guard));
          ga[i] += (d > 0.0 ? -magnitude : magnitude) * g[0];
        }
      });
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Tensor& Z = logits.value();
  require_matrix(Z, "cross_entropy", "logits");
  const std::size_t batch = Z.rows(), classes = Z.cols();
  if (labels.size() != batch)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(batch));
  std::vector<double> probs(Z.size());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    if (lab[r] >= classes)
      throw ShapeError("cross_entropy: label " + std::to_string(lab[r]) + " at row " +
                       std::to_string(r) + " outside " + std::to_string(classes) + " classes");
    const double* z = Z.data() + r * classes;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      if (!std::isfinite(z[c]))
        throw NumericError("cross_entropy: non-finite logit at row " + std::to_string(r) +
                           ", class " + std::to_string(c));
      m = std::max(m, z[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(z[c] - m);
      s += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= s;
    total += m + std::log(s) - z[lab[r]];
  }
  const auto iz = logits.id();
  return logits.tape().record(
      OpKind::cross_entropy, {iz}, Tensor::scalar(total / static_cast<double>(batch)),
      [iz, batch, classes, probs = std::move(probs), lab = std::move(lab)](
          Tape& t, const std::vector<double>& g) {
        auto& gz = t.grad_buffer(iz);
        const double w = g[0] / static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t c = 0; c < classes; ++c) {
            const double target = c == lab[r] ? 1.0 : 0.0;
            gz[r * classes + c] += w * (probs[r * classes + c] - target);
          }
      });
}

double grad_check(const std::function<Var(Tape&)>& build_loss, Parameter& param, double step) {
  param.tensor.zero_grad();
  {
    Tape tape;
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  const std::vector<double> analytic = param.tensor.grad();
  auto evaluate = [&] {
    Tape tape;
    return build_loss(tape).value()[0];
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < param.tensor.size(); ++i) {
    const double saved = param.tensor[i];
    param.tensor[i] = saved + step;
    const double up = evaluate();
    param.tensor[i] = saved - step;
    const double down = evaluate();
    param.tensor[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  param.tensor.zero_grad();
  return worst;
}

}  // namespace vdn
