#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow {

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class OpKind {
  kConstant,
  kParameter,
  kAffine,      // x * W + b
  kRelu,
  kTanh,
  kExp,
  kAdd,
  kSub,
  kMul,
  kScale,       // c * x
  kAddScalar,   // x + c
  kAbs,
  kSquare,
  kSliceCols,
  kConcatCols,
  kRowSum,
  kSum,
  kMean,
  kGather,      // vector[k] = x[index[k]]
};

/// Reverse-mode differentiation tape. Values are computed eagerly when an op
/// is recorded; nodes are stored in recording order, which is a topological
/// order. Single writer: one training step owns one tape.
template <typename Real>
class DiffTape {
 public:
  using TensorT = BasicTensor<Real>;

  struct Node {
    OpKind op = OpKind::kConstant;
    std::array<NodeId, 3> inputs{};
    std::size_t arity = 0;
    double scalar = 0.0;
    std::size_t begin = 0;
    std::size_t count = 0;
    std::vector<std::size_t> index;
    TensorT value;
  };

  NodeId constant(TensorT value) { return leaf(OpKind::kConstant, std::move(value)); }

  NodeId parameter(TensorT value) {
    NodeId id = leaf(OpKind::kParameter, std::move(value));
    parameters_.push_back(id);
    return id;
  }

  NodeId affine(NodeId x, NodeId w, NodeId b) { return record(OpKind::kAffine, {x, w, b}, 3); }
  NodeId relu(NodeId x) { return record(OpKind::kRelu, {x}, 1); }
  NodeId tanh(NodeId x) { return record(OpKind::kTanh, {x}, 1); }
  NodeId exp(NodeId x) { return record(OpKind::kExp, {x}, 1); }
  NodeId add(NodeId a, NodeId b) { return record(OpKind::kAdd, {a, b}, 2); }
  NodeId sub(NodeId a, NodeId b) { return record(OpKind::kSub, {a, b}, 2); }
  NodeId mul(NodeId a, NodeId b) { return record(OpKind::kMul, {a, b}, 2); }
  NodeId abs(NodeId x) { return record(OpKind::kAbs, {x}, 1); }
  NodeId square(NodeId x) { return record(OpKind::kSquare, {x}, 1); }
  NodeId concat_cols(NodeId a, NodeId b) { return record(OpKind::kConcatCols, {a, b}, 2); }
  NodeId row_sum(NodeId x) { return record(OpKind::kRowSum, {x}, 1); }
  NodeId sum(NodeId x) { return record(OpKind::kSum, {x}, 1); }
  NodeId mean(NodeId x) { return record(OpKind::kMean, {x}, 1); }

  NodeId scale(NodeId x, double c) {
    Node n = make(OpKind::kScale, {x}, 1);
    n.scalar = c;
    return push(std::move(n));
  }

  NodeId add_scalar(NodeId x, double c) {
    Node n = make(OpKind::kAddScalar, {x}, 1);
    n.scalar = c;
    return push(std::move(n));
  }

  NodeId slice_cols(NodeId x, std::size_t begin, std::size_t count) {
    Node n = make(OpKind::kSliceCols, {x}, 1);
    n.begin = begin;
    n.count = count;
    return push(std::move(n));
  }

  NodeId gather(NodeId x, std::vector<std::size_t> index) {
    Node n = make(OpKind::kGather, {x}, 1);
    n.index = std::move(index);
    return push(std::move(n));
  }

  const TensorT& value(NodeId id) const { return nodes_.at(id.index).value; }
  const Node& node(NodeId id) const { return nodes_.at(id.index); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& parameters() const { return parameters_; }

  /// Replace the value of a leaf; call replay() afterwards to propagate.
  void set_leaf(NodeId id, TensorT value) {
    Node& n = nodes_.at(id.index);
    if (n.op != OpKind::kConstant && n.op != OpKind::kParameter) {
      throw ContractError("set_leaf on a non-leaf node");
    }
    if (value.dims() != n.value.dims()) throw DimensionError("set_leaf changes leaf shape");
    n.value = std::move(value);
  }

  /// Recompute every non-leaf value from the leaves in recording order.
  void replay() {
    for (auto& n : nodes_) {
      if (n.op == OpKind::kConstant || n.op == OpKind::kParameter) continue;
      n.value = evaluate(n);
    }
  }

  struct Backward {
    // Gradient per parameter node, in registration order.
    std::vector<TensorT> parameter_grads;
    // Nodes whose adjoint was propagated, in visit order.
    std::vector<NodeId> visited;
  };

  Backward backward(NodeId loss) const {
    const TensorT& lv = value(loss);
    if (lv.size() != 1) {
      throw ContractError("backprop needs a scalar loss, got " + dims_to_string(lv.dims()));
    }
    std::vector<std::optional<TensorT>> grads(nodes_.size());
    grads[loss.index] = TensorT(lv.dims(), Real{1});
    Backward result;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      if (!grads[i]) continue;
      result.visited.push_back(NodeId{i});
      propagate(nodes_[i], *grads[i], grads);
    }
    result.parameter_grads.reserve(parameters_.size());
    for (NodeId p : parameters_) {
      if (grads[p.index]) {
        result.parameter_grads.push_back(std::move(*grads[p.index]));
      } else {
        result.parameter_grads.emplace_back(value(p).dims());
      }
    }
    return result;
  }

 private:
  NodeId leaf(OpKind op, TensorT value) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
  }

  Node make(OpKind op, std::array<NodeId, 3> inputs, std::size_t arity) const {
    for (std::size_t i = 0; i < arity; ++i) {
      if (inputs[i].index >= nodes_.size()) throw ContractError("unknown tape node");
    }
    Node n;
    n.op = op;
    n.inputs = inputs;
    n.arity = arity;
    return n;
  }

  NodeId record(OpKind op, std::array<NodeId, 3> inputs, std::size_t arity) {
    return push(make(op, inputs, arity));
  }

  NodeId push(Node n) {
    n.value = evaluate(n);
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
  }

  const TensorT& in(const Node& n, std::size_t k) const { return nodes_[n.inputs[k].index].value; }

  TensorT evaluate(const Node& n) const {
    namespace k = kernels;
    switch (n.op) {
      case OpKind::kAffine:
        return k::affine(in(n, 0), in(n, 1), &in(n, 2));
      case OpKind::kRelu:
        return k::map(in(n, 0), [](Real v) { return v > Real{0} ? v : Real{0}; });
      case OpKind::kTanh:
        return k::map(in(n, 0), [](Real v) { return std::tanh(v); });
      case OpKind::kExp:
        return k::map(in(n, 0), [](Real v) { return std::exp(v); });
      case OpKind::kAdd:
        return k::zip(in(n, 0), in(n, 1), [](Real a, Real b) { return a + b; });
      case OpKind::kSub:
        return k::zip(in(n, 0), in(n, 1), [](Real a, Real b) { return a - b; });
      case OpKind::kMul:
        return k::zip(in(n, 0), in(n, 1), [](Real a, Real b) { return a * b; });
      case OpKind::kScale: {
        const Real c = static_cast<Real>(n.scalar);
        return k::map(in(n, 0), [c](Real v) { return c * v; });
      }
      case OpKind::kAddScalar: {
        const Real c = static_cast<Real>(n.scalar);
        return k::map(in(n, 0), [c](Real v) { return v + c; });
      }
      case OpKind::kAbs:
        return k::map(in(n, 0), [](Real v) { return std::abs(v); });
      case OpKind::kSquare:
        return k::map(in(n, 0), [](Real v) { return v * v; });
      case OpKind::kSliceCols:
        return k::slice_cols(in(n, 0), n.begin, n.count);
      case OpKind::kConcatCols:
        return k::concat_cols(in(n, 0), in(n, 1));
      case OpKind::kRowSum:
        return k::row_sum(in(n, 0));
      case OpKind::kSum:
        return TensorT::scalar(static_cast<Real>(k::sum_all(in(n, 0))));
      case OpKind::kMean: {
        const auto& x = in(n, 0);
        return TensorT::scalar(static_cast<Real>(k::sum_all(x) / static_cast<double>(x.size())));
      }
      case OpKind::kGather: {
        const auto& x = in(n, 0);
        if (n.index.empty()) throw DimensionError("gather with empty index");
        TensorT out(Dims{n.index.size()});
        for (std::size_t i = 0; i < n.index.size(); ++i) {
          if (n.index[i] >= x.size()) throw DimensionError("gather index out of range");
          out[i] = x[n.index[i]];
        }
        return out;
      }
      case OpKind::kConstant:
      case OpKind::kParameter:
        break;
    }
    throw ContractError("evaluate called on a leaf");
  }

  static void accumulate(std::optional<TensorT>& slot, TensorT g) {
    if (!slot) {
      slot = std::move(g);
      return;
    }
    auto dst = slot->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  void propagate(const Node& n, const TensorT& g, std::vector<std::optional<TensorT>>& grads) const {
    namespace k = kernels;
    auto slot = [&](std::size_t i) -> std::optional<TensorT>& {
      return grads[n.inputs[i].index];
    };
    switch (n.op) {
      case OpKind::kConstant:
      case OpKind::kParameter:
        return;
      case OpKind::kAffine: {
        const auto& x = in(n, 0);
        const auto& w = in(n, 1);
        accumulate(slot(0), k::matmul_nt(g, w));
        accumulate(slot(1), k::matmul_tn(x, g));
        TensorT gb(Dims{w.cols()});
        std::vector<double> acc(w.cols(), 0.0);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) acc[j] += g[i * g.cols() + j];
        }
        for (std::size_t j = 0; j < acc.size(); ++j) gb[j] = static_cast<Real>(acc[j]);
        accumulate(slot(2), std::move(gb));
        return;
      }
      case OpKind::kRelu:
        accumulate(slot(0), k::zip(in(n, 0), g, [](Real x, Real gv) {
                     return x > Real{0} ? gv : Real{0};
                   }));
        return;
      case OpKind::kTanh:
        accumulate(slot(0), k::zip(n.value, g, [](Real y, Real gv) {
                     return gv * (Real{1} - y * y);
                   }));
        return;
      case OpKind::kExp:
        accumulate(slot(0), k::zip(n.value, g, [](Real y, Real gv) { return gv * y; }));
        return;
      case OpKind::kAdd:
        accumulate(slot(0), g);
        accumulate(slot(1), g);
        return;
      case OpKind::kSub:
        accumulate(slot(0), g);
        accumulate(slot(1), k::map(g, [](Real v) { return -v; }));
        return;
      case OpKind::kMul:
        accumulate(slot(0), k::zip(in(n, 1), g, [](Real b, Real gv) { return gv * b; }));
        accumulate(slot(1), k::zip(in(n, 0), g, [](Real a, Real gv) { return gv * a; }));
        return;
      case OpKind::kScale: {
        const Real c = static_cast<Real>(n.scalar);
        accumulate(slot(0), k::map(g, [c](Real v) { return c * v; }));
        return;
      }
      case OpKind::kAddScalar:
        accumulate(slot(0), g);
        return;
      case OpKind::kAbs:
        accumulate(slot(0), k::zip(in(n, 0), g, [](Real x, Real gv) {
                     return x > Real{0} ? gv : (x < Real{0} ? -gv : Real{0});
                   }));
        return;
      case OpKind::kSquare:
        accumulate(slot(0), k::zip(in(n, 0), g, [](Real x, Real gv) { return Real{2} * x * gv; }));
        return;
      case OpKind::kSliceCols: {
        const auto& x = in(n, 0);
        TensorT gx(x.dims());
        const std::size_t rows = x.rows(), m = x.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < n.count; ++j) gx[i * m + n.begin + j] = g[i * n.count + j];
        }
        accumulate(slot(0), std::move(gx));
        return;
      }
      case OpKind::kConcatCols: {
        const std::size_t ma = in(n, 0).cols(), mb = in(n, 1).cols();
        accumulate(slot(0), k::slice_cols(g, 0, ma));
        accumulate(slot(1), k::slice_cols(g, ma, mb));
        return;
      }
      case OpKind::kRowSum: {
        const auto& x = in(n, 0);
        TensorT gx(x.dims());
        const std::size_t m = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < m; ++j) gx[i * m + j] = g[i];
        }
        accumulate(slot(0), std::move(gx));
        return;
      }
      case OpKind::kSum:
        accumulate(slot(0), TensorT(in(n, 0).dims(), g[0]));
        return;
      case OpKind::kMean: {
        const auto& x = in(n, 0);
        accumulate(slot(0), TensorT(x.dims(), static_cast<Real>(g[0] / static_cast<Real>(x.size()))));
        return;
      }
      case OpKind::kGather: {
        TensorT gx(in(n, 0).dims());
        for (std::size_t i = 0; i < n.index.size(); ++i) gx[n.index[i]] += g[i];
        accumulate(slot(0), std::move(gx));
        return;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> parameters_;
};

/// dLoss/dtheta for every parameter node of the tape; untouched parameters
/// receive a zero tensor of matching shape.
template <typename Real>
std::vector<BasicTensor<Real>> backprop(const DiffTape<Real>& tape, NodeId loss) {
  return tape.backward(loss).parameter_grads;
}

}  // namespace voxflow
