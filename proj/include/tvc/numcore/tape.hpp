#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "tvc/numcore/tensor.hpp"

namespace tvc::num {

enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kTanh,
  kRelu,
  kSigmoid,
  kExp,
  kLog,
  kSum,
  kSoftmax,
  kLogSoftmax,
  kConcat,
  kSlice,
  kRow,
  kStackRows,
  kDropoutMask,
  kPick,
  kNormalize,
};

const char* op_name(OpKind kind);

class Tape;

/// Handle to a node recorded on a tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  const std::vector<double>& values() const;
  std::size_t size() const { return values().size(); }
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  Tensor tensor() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct Node {
  OpKind kind = OpKind::kConstant;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::array<int, 2> parents{-1, -1};
  std::vector<int> more_parents;  // concat / stack_rows
  std::size_t offset = 0;         // slice begin, row index, pick index
  double scalar = 0.0;            // scale factor
  std::vector<double> aux;        // dropout mask, normalize norm
  Parameter* param = nullptr;     // leaf target for gradient accumulation
  bool needs_grad = false;        // some trainable leaf is upstream
};

/// Define-by-run reverse-mode tape. Every forward pass records onto a fresh
/// tape; `backward` may be called exactly once.
class Tape {
 public:
  Tape() { nodes_.reserve(1 << 14); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t);
  Var constant(Shape shape, std::vector<double> values);
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  /// Binds a parameter. Repeated calls with the same parameter return the
  /// same node. Frozen parameters become constants.
  Var param(Parameter& p);

  /// Accumulates d(loss)/d(leaf) into every reachable trainable parameter.
  void backward(Var loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Var push(Node node);

 private:
  void backprop_node(Node& n);
  std::vector<double>& grad_of(int id);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
  bool consumed_ = false;
};

// ---- primitives -----------------------------------------------------------
// matmul: [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n].
Var matmul(Var a, Var b);
// add/sub: identical shapes, [m,n] (+/-) [n] broadcast over rows, or a
// single-element right operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
// mul: identical shapes, or either side with a single element.
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
// sum over every element -> scalar.
Var sum(Var a);
Var mean(Var a);
// softmax / log_softmax over the last axis (rows for rank 2).
Var softmax(Var a);
Var log_softmax(Var a);
// concat accepts rank 0 and rank 1 inputs; the rest need rank 1.
Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t begin, std::size_t length);
Var row(Var a, std::size_t r);
Var stack_rows(std::span<const Var> rows);
// elementwise multiply by a fixed mask (no gradient to the mask).
Var dropout_mask(Var a, std::vector<double> mask);
// single element of a rank-1 tensor -> scalar.
Var pick(Var a, std::size_t index);
// a / sqrt(||a||^2 + 1e-12) for rank-1 a.
Var l2_normalize(Var a);

// Same value, no gradient path.
Var detach(Var a);

Var dot(Var a, Var b);
Var square(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace tvc::num
