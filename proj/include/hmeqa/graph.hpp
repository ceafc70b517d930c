#pragma once

#include <cstdint>
#include <deque>
#include <initializer_list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmeqa/parameters.hpp"
#include "hmeqa/tensor.hpp"

namespace hmeqa {

/// Primitive tag recorded on every graph node.
enum class Op : std::uint8_t {
  kInput,
  kParameter,
  kMatMul,
  kMatMulBT,
  kAdd,
  kSub,
  kMul,
  kAddRowwise,
  kAffine,
  kScale,
  kElement,
  kSlice,
  kSigmoid,
  kTanh,
  kRelu,
  kConcat,
  kWeightedRows,
  kOuter,
  kScaleRows,
  kSum,
  kMean,
  kMaskedSoftmax,
  kSoftmaxCrossEntropy,
  kGatherRows,
  kRow,
  kStackRows,
};

std::string_view op_name(Op op);

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;

  Graph<T>* graph() const noexcept { return graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Graph<T>;
  Var(Graph<T>* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Append-only tape of primitive applications. Node order is a topological
/// order by construction, so backward is a single reverse sweep. Node storage
/// never moves: value references stay valid while the graph lives.
///
/// A graph and its nodes belong to one thread. Parameters bound through
/// parameter() receive their gradient on backward(); the parameter set itself
/// is only read during the forward pass.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding `value`. Gradients are kept only when `requires_grad`.
  Var<T> input(Tensor<T> value, bool requires_grad = false);
  /// Leaf bound to a trainable parameter; repeated calls return the same node.
  Var<T> parameter(Parameter<T>& param);
  Var<T> zeros(Shape shape) { return input(Tensor<T>(std::move(shape))); }

  const Tensor<T>& value(Var<T> v) const { return node(v).value; }
  /// Gradient from the last backward sweep (zeros when not reached).
  Tensor<T> grad(Var<T> v) const;
  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }
  Op op(Var<T> v) const { return node(v).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Node gradients restart from zero on
  /// every sweep; parameter gradients accumulate until zero_grad().
  void backward(Var<T> loss);

  /// Used by the primitive implementations.
  struct Node {
    Op op;
    std::vector<std::uint32_t> inputs;
    Tensor<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::vector<T> aux;
    std::vector<std::size_t> index;
  };
  Var<T> record(Op op, std::vector<std::uint32_t> inputs, Tensor<T> value,
                std::vector<T> aux = {}, std::vector<std::size_t> index = {});
  const Node& node(Var<T> v) const;

 private:
  void propagate(std::uint32_t id);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> param_nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(*this);
}

// Primitives. Vectors are rank-1 tensors, matrices rank-2.

/// A[m×k]·B[k×n] -> [m×n]; a rank-1 B[k] yields [m].
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// A[m×k]·B[n×k]ᵀ -> [m×n].
template <typename T> Var<T> matmul_bt(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
/// Hadamard product.
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
/// M[r×c] + b[c] broadcast over rows (the only broadcast supported).
template <typename T> Var<T> add_rowwise(Var<T> m, Var<T> bias);
/// alpha·x + beta with constant alpha, beta.
template <typename T> Var<T> affine(Var<T> x, T alpha, T beta);
/// x·s for a one-element s.
template <typename T> Var<T> scale(Var<T> x, Var<T> s);
/// Element k of a vector as a one-element vector.
template <typename T> Var<T> element(Var<T> v, std::size_t k);
template <typename T> Var<T> slice(Var<T> v, std::size_t start, std::size_t length);
template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> tanh(Var<T> x);
template <typename T> Var<T> relu(Var<T> x);
/// Concatenation along the last axis (vectors, or matrices with equal rows).
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat(std::initializer_list<Var<T>> parts) {
  return concat(std::vector<Var<T>>(parts));
}
/// Σ_i w[i]·M[i,:] -> [c].
template <typename T> Var<T> weighted_rows(Var<T> m, Var<T> w);
/// a[r] ⊗ b[c] -> [r×c].
template <typename T> Var<T> outer(Var<T> a, Var<T> b);
/// Row i of M multiplied by w[i].
template <typename T> Var<T> scale_rows(Var<T> m, Var<T> w);
template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);
/// Softmax over positions where mask is true; exact zeros elsewhere.
template <typename T> Var<T> masked_softmax(Var<T> v, const std::vector<bool>& mask);
template <typename T> Var<T> softmax(Var<T> v);
/// -log softmax(logits)[target], evaluated with log-sum-exp.
template <typename T> Var<T> softmax_cross_entropy(Var<T> logits, std::size_t target);
/// Rows of table[K×E] selected by ids -> [N×E].
template <typename T> Var<T> gather_rows(Var<T> table, const std::vector<std::size_t>& ids);
template <typename T> Var<T> row(Var<T> m, std::size_t i);
/// Stacks vectors into an [n_rows × c] matrix: rows[j] lands at row j and
/// rows past rows.size() are zero.
template <typename T> Var<T> stack_rows(const std::vector<Var<T>>& rows, std::size_t n_rows);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace hmeqa
