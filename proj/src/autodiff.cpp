#include "addhaz/autodiff.hpp"

#include <memory>
#include <utility>

#include "addhaz/errors.hpp"
#include "addhaz/kernels.hpp"

namespace addhaz::ad {

ParamId ParameterStore::add(std::string name, Matrix value) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return static_cast<ParamId>(values_.size() - 1);
}

void ParameterStore::restore(const std::vector<Matrix>& snapshot) {
  if (snapshot.size() != values_.size()) {
    throw ShapeError("ParameterStore::restore: snapshot holds " +
                     std::to_string(snapshot.size()) + " parameters, store holds " +
                     std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (snapshot[i].rows() != values_[i].rows() || snapshot[i].cols() != values_[i].cols()) {
      throw ShapeError("ParameterStore::restore: shape mismatch for " + names_[i]);
    }
    values_[i] = snapshot[i];
  }
}

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, {}, -1});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(const ParameterStore& store, ParamId id) {
  nodes_.push_back(Node{store.value(id), {}, {}, {}, {}, id});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::vector<int> operands, ForwardFn forward,
                 BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), {}, std::move(operands), std::move(forward),
                        std::move(backward), -1});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_.at(id);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Gradients Tape::backward(const Var& output, const ParameterStore& store) {
  if (output.tape_ != this) throw ContractError("backward: output belongs to another tape");
  const Matrix& out = value(output.id());
  if (out.rows() != 1 || out.cols() != 1) {
    throw ContractError("backward: output must be scalar, got " + std::to_string(out.rows()) +
                        "x" + std::to_string(out.cols()));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);

  std::vector<char> reachable(nodes_.size(), 0);
  reachable[output.id()] = 1;
  for (int id = output.id(); id >= 0; --id) {
    if (!reachable[id]) continue;
    for (int op : nodes_[id].operands) reachable[op] = 1;
  }

  grad(output.id())(0, 0) = 1.0;
  backward_order_.clear();
  Gradients result;
  result.reserve(store.size());
  for (std::size_t p = 0; p < store.size(); ++p) {
    result.push_back(Matrix::Zero(store.value(p).rows(), store.value(p).cols()));
  }
  for (int id = output.id(); id >= 0; --id) {
    if (!reachable[id]) continue;
    backward_order_.push_back(id);
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param >= 0) {
      if (static_cast<std::size_t>(n.param) >= store.size()) {
        throw ContractError("backward: parameter id outside the store");
      }
      result[n.param] += n.grad;
    }
  }
  return result;
}

bool Tape::replay() const {
  for (const Node& n : nodes_) {
    if (!n.forward) continue;
    const Matrix again = n.forward(*this);
    if (again.rows() != n.value.rows() || again.cols() != n.value.cols()) return false;
    for (Index i = 0; i < again.size(); ++i) {
      if (again.data()[i] != n.value.data()[i]) return false;
    }
  }
  return true;
}

namespace {

void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

void same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": operand shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + " differ");
  }
}

}  // namespace

Var affine(const Var& x, const Var& w, const Var& b) {
  same_tape(x, w);
  same_tape(x, b);
  if (b.value().cols() != 1 || b.value().rows() != w.value().rows()) {
    throw ShapeError("affine: bias has " + std::to_string(b.value().rows()) + " rows, weight has " +
                     std::to_string(w.value().rows()));
  }
  const int ix = x.id(), iw = w.id(), ib = b.id();
  // Training graphs only need replay() to reproduce the recorded values, not
  // row invariance, so the forward uses blocked GEMM.
  auto fwd = [ix, iw, ib](const Tape& t) {
    Matrix y(t.value(ix).rows(), t.value(iw).rows());
    y.noalias() = t.value(ix) * t.value(iw).transpose();
    y.rowwise() += t.value(ib).col(0).transpose();
    return y;
  };
  Matrix y = fwd(x.tape());
  return x.tape().record(
      std::move(y), {ix, iw, ib}, fwd,
      [ix, iw, ib](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        t.grad(ix).noalias() += g * t.value(iw);
        t.grad(iw).noalias() += g.transpose() * t.value(ix);
        t.grad(ib) += g.colwise().sum().transpose();
      });
}

Var exu(const Var& x, const Var& w, const Var& b) {
  same_tape(x, w);
  same_tape(x, b);
  if (b.value().cols() != 1 || b.value().rows() != w.value().cols()) {
    throw ShapeError("exu: bias has " + std::to_string(b.value().rows()) + " rows, layer input is " +
                     std::to_string(w.value().cols()));
  }
  const int ix = x.id(), iw = w.id(), ib = b.id();
  auto fwd = [ix, iw, ib](const Tape& t) {
    return Matrix(kernels::clip_unit(
        kernels::exu_preactivation(t.value(ix), t.value(iw), t.value(ib).col(0))));
  };
  Matrix y = fwd(x.tape());
  return x.tape().record(
      std::move(y), {ix, iw, ib}, fwd, [ix, iw, ib](Tape& t, int self) {
        const Matrix& xv = t.value(ix);
        const Matrix& wv = t.value(iw);
        const Matrix& bv = t.value(ib);
        const Matrix pre = kernels::exu_preactivation(xv, wv, bv.col(0));
        Matrix g = t.grad(self);
        for (Index i = 0; i < g.size(); ++i) {
          const double p = pre.data()[i];
          if (!(p > 0.0 && p < kExuCeiling)) g.data()[i] = 0.0;
        }
        const Matrix ew = wv.unaryExpr([](double v) { return std::exp(v); });
        Matrix centered = xv;
        for (Index i = 0; i < xv.cols(); ++i) centered.col(i).array() -= bv(i, 0);
        const Matrix gx = g * ew;
        t.grad(ix) += gx;
        t.grad(iw) += ((g.transpose() * centered).array() * ew.array()).matrix();
        t.grad(ib) -= gx.colwise().sum().transpose();
      });
}

Var relu(const Var& x) {
  const int ix = x.id();
  return x.tape().record(
      Matrix(kernels::relu(x.value())), {ix},
      [ix](const Tape& t) { return Matrix(kernels::relu(t.value(ix))); },
      [ix](Tape& t, int self) {
        t.grad(ix).array() += (t.value(ix).array() > 0.0).select(t.grad(self).array(), 0.0);
      });
}

Var sigmoid(const Var& x) {
  const int ix = x.id();
  return x.tape().record(
      Matrix(kernels::sigmoid(x.value())), {ix},
      [ix](const Tape& t) { return Matrix(kernels::sigmoid(t.value(ix))); },
      [ix](Tape& t, int self) {
        const auto s = t.value(self).array();
        t.grad(ix).array() += s * (1.0 - s) * t.grad(self).array();
      });
}

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape("add", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(
      a.value() + b.value(), {ia, ib},
      [ia, ib](const Tape& t) { return Matrix(t.value(ia) + t.value(ib)); },
      [ia, ib](Tape& t, int self) {
        t.grad(ia) += t.grad(self);
        t.grad(ib) += t.grad(self);
      });
}

Var mul(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape("mul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(
      a.value().cwiseProduct(b.value()), {ia, ib},
      [ia, ib](const Tape& t) { return Matrix(t.value(ia).cwiseProduct(t.value(ib))); },
      [ia, ib](Tape& t, int self) {
        const Matrix g = t.grad(self);
        t.grad(ia) += g.cwiseProduct(t.value(ib));
        t.grad(ib) += g.cwiseProduct(t.value(ia));
      });
}

Var mul_constant(const Var& a, Matrix mask) {
  same_shape("mul_constant", a.value(), mask);
  const int ia = a.id();
  auto m = std::make_shared<const Matrix>(std::move(mask));
  Matrix y = a.value().cwiseProduct(*m);
  return a.tape().record(
      std::move(y), {ia},
      [ia, m](const Tape& t) { return Matrix(t.value(ia).cwiseProduct(*m)); },
      [ia, m](Tape& t, int self) { t.grad(ia) += t.grad(self).cwiseProduct(*m); });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape().record(
      a.value() * s, {ia}, [ia, s](const Tape& t) { return Matrix(t.value(ia) * s); },
      [ia, s](Tape& t, int self) { t.grad(ia) += t.grad(self) * s; });
}

Var sum(const Var& a) {
  const int ia = a.id();
  return a.tape().record(
      Matrix::Constant(1, 1, a.value().sum()), {ia},
      [ia](const Tape& t) { return Matrix(Matrix::Constant(1, 1, t.value(ia).sum())); },
      [ia](Tape& t, int self) { t.grad(ia).array() += t.grad(self)(0, 0); });
}

Var sum_squares(const Var& a) {
  const int ia = a.id();
  return a.tape().record(
      Matrix::Constant(1, 1, a.value().squaredNorm()), {ia},
      [ia](const Tape& t) { return Matrix(Matrix::Constant(1, 1, t.value(ia).squaredNorm())); },
      [ia](Tape& t, int self) { t.grad(ia) += 2.0 * t.grad(self)(0, 0) * t.value(ia); });
}

Var gather_rows(const Var& a, std::vector<Index> rows) {
  const int ia = a.id();
  const Index n = a.value().rows();
  for (Index r : rows) {
    if (r < 0 || r >= n) throw ShapeError("gather_rows: row index out of range");
  }
  auto fwd = [ia, rows](const Tape& t) {
    const Matrix& v = t.value(ia);
    Matrix y(static_cast<Index>(rows.size()), v.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) y.row(static_cast<Index>(k)) = v.row(rows[k]);
    return y;
  };
  Matrix y = fwd(a.tape());
  return a.tape().record(std::move(y), {ia}, fwd, [ia, rows](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < rows.size(); ++k) ga.row(rows[k]) += g.row(static_cast<Index>(k));
  });
}

}  // namespace addhaz::ad
