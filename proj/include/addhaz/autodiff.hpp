#pragma once

// Matrix-valued reverse-mode automatic differentiation.
//
// A Tape records every primitive executed during one forward pass. Each node
// keeps its value, the ids of its operands, a forward rule (used by replay)
// and a local gradient rule. Nodes are appended in execution order, so the
// node vector is already a topological order and backward() simply walks it
// in reverse.
//
// A Tape is confined to one thread. Parameters live in a ParameterStore and
// enter a tape as leaves; backward() returns one gradient per stored
// parameter, zero for parameters the output does not reach.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace addhaz::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using ParamId = int;

class ParameterStore {
 public:
  ParamId add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  Matrix& value(ParamId id) { return values_.at(id); }
  const Matrix& value(ParamId id) const { return values_.at(id); }

  const std::vector<Matrix>& values() const { return values_; }
  void restore(const std::vector<Matrix>& snapshot);

  bool operator==(const ParameterStore&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

using Gradients = std::vector<Matrix>;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using ForwardFn = std::function<Matrix(const Tape&)>;
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(const ParameterStore& store, ParamId id);

  /// Append a primitive. `forward` must recompute `value` from the operand
  /// values; `backward` accumulates into operand gradients via grad().
  Var record(Matrix value, std::vector<int> operands, ForwardFn forward,
             BackwardFn backward);

  const Matrix& value(int id) const { return nodes_.at(id).value; }
  const Matrix& value(const Var& v) const { return value(v.id()); }

  /// Gradient slot of a node, zero-initialised on first access.
  Matrix& grad(int id);

  /// Gradients of a 1x1 output with respect to every parameter in `store`.
  Gradients backward(const Var& output, const ParameterStore& store);

  /// Recompute every recorded primitive from its operands; true when all
  /// values match the recorded ones bit for bit.
  bool replay() const;

  std::size_t size() const { return nodes_.size(); }

  /// Ids visited by the most recent backward(), in visiting order.
  const std::vector<int>& last_backward_order() const { return backward_order_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> operands;
    ForwardFn forward;
    BackwardFn backward;
    ParamId param = -1;
  };

  std::vector<Node> nodes_;
  std::vector<int> backward_order_;
};

// Primitives. All operands must live on the same tape.

/// `x * w^T + 1 b^T`; x (n x in), w (out x in), b (out x 1).
Var affine(const Var& x, const Var& w, const Var& b);
/// ExU layer `clip((x - 1 b^T) * exp(w)^T, 0, 1)`; w (out x in), b (in x 1).
Var exu(const Var& x, const Var& w, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var mul_constant(const Var& a, Matrix mask);
Var scale(const Var& a, double s);
/// Sum of all entries, as 1x1.
Var sum(const Var& a);
/// Sum of squared entries, as 1x1.
Var sum_squares(const Var& a);
/// Rows of `a` picked by `rows` (repeats allowed).
Var gather_rows(const Var& a, std::vector<Index> rows);

}  // namespace addhaz::ad
