#include "tvc/numcore/tape.hpp"

#include <algorithm>
#include <cmath>

namespace tvc::num {

namespace {

const Node& node_of(Var v) {
  if (!v.valid()) throw NumError("use of an unbound Var");
  return v.tape()->node(v.id());
}

Tape* same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw NumError("operands recorded on different tapes");
  return a.tape();
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeMismatch(std::string(op) + ": " + detail);
}

Var finish(Tape* tape, Node n) {
  if (!all_finite(n.value)) {
    throw NonFiniteValue(std::string("non-finite output from ") + op_name(n.kind));
  }
  return tape->push(std::move(n));
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSum: return "sum";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kRow: return "row";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kDropoutMask: return "dropout_mask";
    case OpKind::kPick: return "pick";
    case OpKind::kNormalize: return "l2_normalize";
  }
  return "?";
}

// ---- Var --------------------------------------------------------------------

const Shape& Var::shape() const { return node_of(*this).shape; }
const std::vector<double>& Var::values() const { return node_of(*this).value; }

double Var::item() const {
  const auto& v = values();
  if (v.size() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_str(shape()));
  return v[0];
}

Tensor Var::tensor() const { return Tensor(shape(), values()); }

// ---- Tape -------------------------------------------------------------------

Var Tape::push(Node node) {
  if (consumed_) throw TapeConsumed("cannot record on a tape after backward");
  bool ng = node.kind == OpKind::kLeaf && node.param != nullptr;
  for (int id : node.parents) {
    if (id >= 0) ng = ng || nodes_[static_cast<std::size_t>(id)].needs_grad;
  }
  for (int id : node.more_parents) ng = ng || nodes_[static_cast<std::size_t>(id)].needs_grad;
  node.needs_grad = ng;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor t) {
  Node n;
  n.kind = OpKind::kConstant;
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  return finish(this, std::move(n));
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  return constant(Tensor(std::move(shape), std::move(values)));
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Node n;
  n.kind = p.requires_grad ? OpKind::kLeaf : OpKind::kConstant;
  n.shape = p.value.shape;
  n.value = p.value.data;
  n.param = p.requires_grad ? &p : nullptr;
  Var v = finish(this, std::move(n));
  bound_.emplace(&p, v.id());
  return v;
}

std::vector<double>& Tape::grad_of(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw TapeConsumed("backward called twice on the same tape");
  if (loss.tape() != this) throw NumError("loss belongs to a different tape");
  if (numel(node(loss.id()).shape) != 1) {
    throw NonScalarLoss("backward requires a scalar loss, got shape " +
                        shape_str(node(loss.id()).shape));
  }
  consumed_ = true;
  grad_of(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.needs_grad) continue;
    backprop_node(n);
  }
  for (auto& n : nodes_) {
    if (n.kind != OpKind::kLeaf || n.param == nullptr) continue;
    Parameter& p = *n.param;
    if (!p.has_grad()) p.zero_grad();
    if (!n.grad.empty()) add_into(p.grad, n.grad);
  }
}

void Tape::backprop_node(Node& n) {
  const std::vector<double>& dy = n.grad;
  switch (n.kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      return;
    case OpKind::kMatMul: {
      const int ia = n.parents[0], ib = n.parents[1];
      const Node& a = nodes_[static_cast<std::size_t>(ia)];
      const Node& b = nodes_[static_cast<std::size_t>(ib)];
      const bool wa = a.needs_grad, wb = b.needs_grad;
      std::vector<double> unused;
      auto& ga = wa ? grad_of(ia) : unused;
      auto& gb = wb ? grad_of(ib) : unused;
      if (a.shape.size() == 2 && b.shape.size() == 2) {
        const std::size_t m = a.shape[0], k = a.shape[1], c = b.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
          const double* drow = &dy[i * c];
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = &b.value[p * c];
            if (wa) {
              double acc = 0.0;
              for (std::size_t j = 0; j < c; ++j) acc += drow[j] * brow[j];
              ga[i * k + p] += acc;
            }
            if (wb) {
              const double av = a.value[i * k + p];
              double* gbrow = &gb[p * c];
              for (std::size_t j = 0; j < c; ++j) gbrow[j] += av * drow[j];
            }
          }
        }
      } else if (a.shape.size() == 2) {
        const std::size_t m = a.shape[0], k = a.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
          const double d = dy[i];
          if (d == 0.0) continue;
          const double* arow = &a.value[i * k];
          if (wa) {
            double* garow = &ga[i * k];
            for (std::size_t p = 0; p < k; ++p) garow[p] += d * b.value[p];
          }
          if (wb) {
            for (std::size_t p = 0; p < k; ++p) gb[p] += d * arow[p];
          }
        }
      } else {
        const std::size_t k = b.shape[0], c = b.shape[1];
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = &b.value[p * c];
          if (wa) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += brow[j] * dy[j];
            ga[p] += acc;
          }
          if (wb) {
            const double av = a.value[p];
            double* gbrow = &gb[p * c];
            for (std::size_t j = 0; j < c; ++j) gbrow[j] += av * dy[j];
          }
        }
      }
      return;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      const double sign = n.kind == OpKind::kAdd ? 1.0 : -1.0;
      const int ia = n.parents[0], ib = n.parents[1];
      add_into(grad_of(ia), dy);
      auto& gb = grad_of(ib);
      if (gb.size() == dy.size()) {
        for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += sign * dy[i];
      } else {
        const std::size_t c = gb.size();
        for (std::size_t i = 0; i < dy.size(); ++i) gb[i % c] += sign * dy[i];
      }
      return;
    }
    case OpKind::kMul: {
      const int ia = n.parents[0], ib = n.parents[1];
      const auto& av = nodes_[static_cast<std::size_t>(ia)].value;
      const auto& bv = nodes_[static_cast<std::size_t>(ib)].value;
      auto& ga = grad_of(ia);
      if (av.size() == bv.size()) {
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * bv[i];
        auto& gb = grad_of(ib);
        for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * av[i];
      } else if (av.size() == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < dy.size(); ++i) acc += dy[i] * bv[i];
        ga[0] += acc;
        auto& gb = grad_of(ib);
        for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * av[0];
      } else {
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * bv[0];
        auto& gb = grad_of(ib);
        double acc = 0.0;
        for (std::size_t i = 0; i < dy.size(); ++i) acc += dy[i] * av[i];
        gb[0] += acc;
      }
      return;
    }
    case OpKind::kScale: {
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += n.scalar * dy[i];
      return;
    }
    case OpKind::kTanh: {
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * (1.0 - n.value[i] * n.value[i]);
      return;
    }
    case OpKind::kRelu: {
      const auto& x = nodes_[static_cast<std::size_t>(n.parents[0])].value;
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (x[i] > 0.0) ga[i] += dy[i];
      }
      return;
    }
    case OpKind::kSigmoid: {
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * n.value[i] * (1.0 - n.value[i]);
      return;
    }
    case OpKind::kExp: {
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * n.value[i];
      return;
    }
    case OpKind::kLog: {
      const auto& x = nodes_[static_cast<std::size_t>(n.parents[0])].value;
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] / x[i];
      return;
    }
    case OpKind::kSum: {
      auto& ga = grad_of(n.parents[0]);
      for (auto& g : ga) g += dy[0];
      return;
    }
    case OpKind::kSoftmax: {
      auto& ga = grad_of(n.parents[0]);
      const std::size_t c = n.shape.empty() ? 1 : n.shape.back();
      for (std::size_t base = 0; base < dy.size(); base += c) {
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += dy[base + j] * n.value[base + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[base + j] += n.value[base + j] * (dy[base + j] - inner);
        }
      }
      return;
    }
    case OpKind::kLogSoftmax: {
      auto& ga = grad_of(n.parents[0]);
      const std::size_t c = n.shape.empty() ? 1 : n.shape.back();
      for (std::size_t base = 0; base < dy.size(); base += c) {
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += dy[base + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[base + j] += dy[base + j] - std::exp(n.value[base + j]) * total;
        }
      }
      return;
    }
    case OpKind::kConcat: {
      std::size_t off = 0;
      for (int pid : n.more_parents) {
        auto& gp = grad_of(pid);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += dy[off + i];
        off += gp.size();
      }
      return;
    }
    case OpKind::kStackRows: {
      std::size_t off = 0;
      for (int pid : n.more_parents) {
        auto& gp = grad_of(pid);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += dy[off + i];
        off += gp.size();
      }
      return;
    }
    case OpKind::kSlice:
    case OpKind::kRow: {
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[n.offset + i] += dy[i];
      return;
    }
    case OpKind::kDropoutMask: {
      auto& ga = grad_of(n.parents[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * n.aux[i];
      return;
    }
    case OpKind::kPick: {
      grad_of(n.parents[0])[n.offset] += dy[0];
      return;
    }
    case OpKind::kNormalize: {
      auto& ga = grad_of(n.parents[0]);
      const double norm = n.aux[0];
      double proj = 0.0;
      for (std::size_t i = 0; i < dy.size(); ++i) proj += n.value[i] * dy[i];
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += (dy[i] - n.value[i] * proj) / norm;
      return;
    }
  }
}

// ---- primitives -------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  Node n;
  n.kind = OpKind::kMatMul;
  n.parents = {a.id(), b.id()};
  const auto ra = na.shape.size(), rb = nb.shape.size();
  auto detail = [&] { return shape_str(na.shape) + " x " + shape_str(nb.shape); };
  if (ra == 2 && rb == 2) {
    const std::size_t m = na.shape[0], k = na.shape[1], c = nb.shape[1];
    if (nb.shape[0] != k) require(false, "matmul", detail());
    n.shape = {m, c};
    n.value.assign(m * c, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double* out = &n.value[i * c];
      for (std::size_t p = 0; p < k; ++p) {
        const double av = na.value[i * k + p];
        const double* brow = &nb.value[p * c];
        for (std::size_t j = 0; j < c; ++j) out[j] += av * brow[j];
      }
    }
  } else if (ra == 2 && rb == 1) {
    const std::size_t m = na.shape[0], k = na.shape[1];
    if (nb.shape[0] != k) require(false, "matmul", detail());
    n.shape = {m};
    n.value.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = &na.value[i * k];
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * nb.value[p];
      n.value[i] = acc;
    }
  } else if (ra == 1 && rb == 2) {
    const std::size_t k = nb.shape[0], c = nb.shape[1];
    if (na.shape[0] != k) require(false, "matmul", detail());
    n.shape = {c};
    n.value.assign(c, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = na.value[p];
      const double* brow = &nb.value[p * c];
      for (std::size_t j = 0; j < c; ++j) n.value[j] += av * brow[j];
    }
  } else {
    require(false, "matmul", detail());
  }
  return finish(tape, std::move(n));
}

namespace {

Var add_sub(Var a, Var b, OpKind kind) {
  Tape* tape = same_tape(a, b);
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  const double sign = kind == OpKind::kAdd ? 1.0 : -1.0;
  Node n;
  n.kind = kind;
  n.parents = {a.id(), b.id()};
  n.shape = na.shape;
  n.value = na.value;
  if (na.shape == nb.shape) {
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += sign * nb.value[i];
  } else if (na.shape.size() == 2 && nb.shape.size() == 1 && nb.shape[0] == na.shape[1]) {
    const std::size_t c = nb.shape[0];
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += sign * nb.value[i % c];
  } else if (nb.value.size() == 1) {
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += sign * nb.value[0];
  } else {
    require(false, op_name(kind), shape_str(na.shape) + " vs " + shape_str(nb.shape));
  }
  return finish(tape, std::move(n));
}

template <typename F>
Var unary(Var a, OpKind kind, F f, double scalar = 0.0) {
  const Node& na = node_of(a);
  Node n;
  n.kind = kind;
  n.scalar = scalar;
  n.parents = {a.id(), -1};
  n.shape = na.shape;
  n.value.resize(na.value.size());
  for (std::size_t i = 0; i < na.value.size(); ++i) n.value[i] = f(na.value[i]);
  return finish(a.tape(), std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return add_sub(a, b, OpKind::kAdd); }
Var sub(Var a, Var b) { return add_sub(a, b, OpKind::kSub); }

Var mul(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  Node n;
  n.kind = OpKind::kMul;
  n.parents = {a.id(), b.id()};
  if (na.shape == nb.shape || (na.value.size() == nb.value.size() && na.value.size() == 1)) {
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] * nb.value[i];
  } else if (na.value.size() == 1) {
    n.shape = nb.shape;
    n.value.resize(nb.value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[0] * nb.value[i];
  } else if (nb.value.size() == 1) {
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] * nb.value[0];
  } else {
    require(false, "mul", shape_str(na.shape) + " vs " + shape_str(nb.shape));
  }
  return finish(tape, std::move(n));
}

Var scale(Var a, double c) {
  return unary(a, OpKind::kScale, [c](double x) { return c * x; }, c);
}

Var tanh(Var a) {
  return unary(a, OpKind::kTanh, [](double x) { return std::tanh(x); });
}

Var relu(Var a) {
  return unary(a, OpKind::kRelu, [](double x) { return x > 0.0 ? x : 0.0; });
}

Var sigmoid(Var a) {
  return unary(a, OpKind::kSigmoid, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Var exp(Var a) {
  return unary(a, OpKind::kExp, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(a, OpKind::kLog, [](double x) { return std::log(x); });
}

Var sum(Var a) {
  const Node& na = node_of(a);
  Node n;
  n.kind = OpKind::kSum;
  n.parents = {a.id(), -1};
  n.shape = {};
  double acc = 0.0;
  for (double v : na.value) acc += v;
  n.value = {acc};
  return finish(a.tape(), std::move(n));
}

Var mean(Var a) {
  const double count = static_cast<double>(a.size());
  return scale(sum(a), 1.0 / count);
}

namespace {

Var softmax_impl(Var a, bool log_space) {
  const Node& na = node_of(a);
  require(!na.shape.empty(), log_space ? "log_softmax" : "softmax", "requires rank >= 1");
  Node n;
  n.kind = log_space ? OpKind::kLogSoftmax : OpKind::kSoftmax;
  n.parents = {a.id(), -1};
  n.shape = na.shape;
  n.value.resize(na.value.size());
  const std::size_t c = na.shape.back();
  for (std::size_t base = 0; base < na.value.size(); base += c) {
    double mx = na.value[base];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, na.value[base + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(na.value[base + j] - mx);
    const double logz = std::log(z);
    for (std::size_t j = 0; j < c; ++j) {
      const double lp = (na.value[base + j] - mx) - logz;
      n.value[base + j] = log_space ? lp : std::exp(lp);
    }
  }
  return finish(a.tape(), std::move(n));
}

}  // namespace

Var softmax(Var a) { return softmax_impl(a, false); }
Var log_softmax(Var a) { return softmax_impl(a, true); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  Tape* tape = parts.front().tape();
  Node n;
  n.kind = OpKind::kConcat;
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    const Node& np = node_of(p);
    require(np.shape.size() <= 1, "concat", "inputs must be rank 0 or 1, got " + shape_str(np.shape));
    total += np.value.size();
  }
  n.value.reserve(total);
  for (const Var& p : parts) {
    const Node& np = node_of(p);
    n.value.insert(n.value.end(), np.value.begin(), np.value.end());
    n.more_parents.push_back(p.id());
  }
  n.shape = {total};
  return finish(tape, std::move(n));
}

Var slice(Var a, std::size_t begin, std::size_t length) {
  const Node& na = node_of(a);
  require(na.shape.size() == 1 && length > 0 && begin + length <= na.value.size(), "slice",
          shape_str(na.shape) + " [" + std::to_string(begin) + ", +" + std::to_string(length) + ")");
  Node n;
  n.kind = OpKind::kSlice;
  n.parents = {a.id(), -1};
  n.offset = begin;
  n.shape = {length};
  n.value.assign(na.value.begin() + static_cast<std::ptrdiff_t>(begin),
                 na.value.begin() + static_cast<std::ptrdiff_t>(begin + length));
  return finish(a.tape(), std::move(n));
}

Var row(Var a, std::size_t r) {
  const Node& na = node_of(a);
  require(na.shape.size() == 2 && r < na.shape[0], "row",
          shape_str(na.shape) + " row " + std::to_string(r));
  const std::size_t c = na.shape[1];
  Node n;
  n.kind = OpKind::kRow;
  n.parents = {a.id(), -1};
  n.offset = r * c;
  n.shape = {c};
  n.value.assign(na.value.begin() + static_cast<std::ptrdiff_t>(r * c),
                 na.value.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  return finish(a.tape(), std::move(n));
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeMismatch("stack_rows: no inputs");
  Tape* tape = rows.front().tape();
  const std::size_t c = node_of(rows.front()).value.size();
  Node n;
  n.kind = OpKind::kStackRows;
  n.value.reserve(c * rows.size());
  for (const Var& r : rows) {
    same_tape(rows.front(), r);
    const Node& nr = node_of(r);
    require(nr.shape.size() == 1 && nr.value.size() == c, "stack_rows",
            "rows must be rank 1 of equal length");
    n.value.insert(n.value.end(), nr.value.begin(), nr.value.end());
    n.more_parents.push_back(r.id());
  }
  n.shape = {rows.size(), c};
  return finish(tape, std::move(n));
}

Var dropout_mask(Var a, std::vector<double> mask) {
  const Node& na = node_of(a);
  require(mask.size() == na.value.size(), "dropout_mask", "mask size differs from input");
  Node n;
  n.kind = OpKind::kDropoutMask;
  n.parents = {a.id(), -1};
  n.shape = na.shape;
  n.value.resize(na.value.size());
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] * mask[i];
  n.aux = std::move(mask);
  return finish(a.tape(), std::move(n));
}

Var pick(Var a, std::size_t index) {
  const Node& na = node_of(a);
  require(na.shape.size() == 1 && index < na.value.size(), "pick",
          shape_str(na.shape) + " index " + std::to_string(index));
  Node n;
  n.kind = OpKind::kPick;
  n.parents = {a.id(), -1};
  n.offset = index;
  n.shape = {};
  n.value = {na.value[index]};
  return finish(a.tape(), std::move(n));
}

// Keeps a zero vector (e.g. a dead relu layer) finite.
constexpr double kNormalizeEps = 1e-12;

Var l2_normalize(Var a) {
  const Node& na = node_of(a);
  require(na.shape.size() == 1, "l2_normalize", "requires rank 1");
  double sq = 0.0;
  for (double v : na.value) sq += v * v;
  const double norm = std::sqrt(sq + kNormalizeEps);
  Node n;
  n.kind = OpKind::kNormalize;
  n.parents = {a.id(), -1};
  n.shape = na.shape;
  n.value.resize(na.value.size());
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] / norm;
  n.aux = {norm};
  return finish(a.tape(), std::move(n));
}

Var detach(Var a) { return a.tape()->constant(a.tensor()); }

Var dot(Var a, Var b) { return sum(mul(a, b)); }
Var square(Var a) { return mul(a, a); }

}  // namespace tvc::num
