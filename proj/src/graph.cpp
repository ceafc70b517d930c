#include "hmeqa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hmeqa/errors.hpp"

namespace hmeqa {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParameter: return "parameter";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulBT: return "matmul_bt";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAddRowwise: return "add_rowwise";
    case Op::kAffine: return "affine";
    case Op::kScale: return "scale";
    case Op::kElement: return "element";
    case Op::kSlice: return "slice";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kConcat: return "concat";
    case Op::kWeightedRows: return "weighted_rows";
    case Op::kOuter: return "outer";
    case Op::kScaleRows: return "scale_rows";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kMaskedSoftmax: return "masked_softmax";
    case Op::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case Op::kGatherRows: return "gather_rows";
    case Op::kRow: return "row";
    case Op::kStackRows: return "stack_rows";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

// Dense kernels on raw storage. Row-major throughout.
template <typename T>
T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T s0{0}, s1{0}, s2{0}, s3{0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y += alpha·x
template <typename T>
void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C[m×n] += A[m×k]·B[k×n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) axpy(a[i * k + l], b + l * n, c + i * n, n);
}

// C[m×n] += A[m×k]·B[n×k]ᵀ
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
}

// C[k×n] += A[m×k]ᵀ·B[m×n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) axpy(a[i * k + l], b + i * n, c + l * n, n);
}

template <typename T>
Graph<T>& same_graph(Var<T> a, Var<T> b) {
  if (!a.valid() || a.graph() != b.graph()) throw ContractError("operands belong to different graphs");
  return *a.graph();
}

template <typename T>
Graph<T>& graph_of(Var<T> a) {
  if (!a.valid()) throw ContractError("operation on an unbound variable");
  return *a.graph();
}

bool is_vector(const Shape& s) { return s.size() == 1; }
bool is_matrix(const Shape& s) { return s.size() == 2; }

}  // namespace

// ---------------------------------------------------------------------------
// Graph

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var<T> v) const {
  if (v.graph() != this || v.id() >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  return nodes_[v.id()];
}

template <typename T>
Var<T> Graph<T>::record(Op op, std::vector<std::uint32_t> inputs, Tensor<T> value,
                        std::vector<T> aux, std::vector<std::size_t> index) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op_name(op)) + " node #" +
                       std::to_string(nodes_.size()) + " " + shape_string(value.shape()));
  }
  bool needs_grad = false;
  for (auto id : inputs) needs_grad = needs_grad || nodes_[id].requires_grad;
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), {}, needs_grad, nullptr,
                        std::move(aux), std::move(index)});
  return Var<T>(this, id);
}

template <typename T>
Var<T> Graph<T>::input(Tensor<T> value, bool requires_grad) {
  auto v = record(Op::kInput, {}, std::move(value));
  nodes_[v.id()].requires_grad = requires_grad;
  return v;
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var<T>(this, it->second);
  auto v = record(Op::kParameter, {}, param.value);
  nodes_[v.id()].requires_grad = true;
  nodes_[v.id()].param = &param;
  param_nodes_.emplace(&param, v.id());
  return v;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var<T> v) const {
  const auto& n = node(v);
  if (n.grad.empty()) return Tensor<T>(n.value.shape());
  return Tensor<T>(n.value.shape(), n.grad);
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  const auto& root = node(loss);
  if (root.value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) {
      n.grad.assign(n.value.size(), T{0});
    } else {
      n.grad.clear();
    }
  }
  if (!root.requires_grad) return;
  nodes_[loss.id()].grad[0] = T{1};

  for (std::int64_t i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad) continue;
    for (T g : n.grad) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient at " + std::string(op_name(n.op)) + " node #" +
                           std::to_string(i));
      }
    }
    if (n.op == Op::kParameter) {
      auto dst = n.param->grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    } else {
      propagate(static_cast<std::uint32_t>(i));
    }
  }
}

template <typename T>
void Graph<T>::propagate(std::uint32_t id) {
  Node& n = nodes_[id];
  const std::vector<T>& g = n.grad;
  const auto& y = n.value;
  auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return in(k).requires_grad; };

  switch (n.op) {
    case Op::kInput:
    case Op::kParameter:
      break;

    case Op::kMatMul: {
      Node& a = in(0);
      Node& b = in(1);
      const std::size_t m = a.value.rows(), k = a.value.cols();
      const std::size_t cols = is_vector(b.value.shape()) ? 1 : b.value.cols();
      const T* av = a.value.data().data();
      const T* bv = b.value.data().data();
      if (a.requires_grad) {
        if (cols == 1) {
          for (std::size_t i = 0; i < m; ++i) axpy(g[i], bv, a.grad.data() + i * k, k);
        } else {
          gemm_nt(g.data(), bv, a.grad.data(), m, cols, k);
        }
      }
      if (b.requires_grad) {
        if (cols == 1) {
          for (std::size_t i = 0; i < m; ++i) axpy(g[i], av + i * k, b.grad.data(), k);
        } else {
          gemm_tn(av, g.data(), b.grad.data(), m, k, cols);
        }
      }
      break;
    }

    case Op::kMatMulBT: {
      Node& a = in(0);
      Node& b = in(1);
      const std::size_t m = a.value.rows(), k = a.value.cols(), n_rows = b.value.rows();
      // G[m×n]: dA += G·B, dB += Gᵀ·A
      if (a.requires_grad) gemm_nn(g.data(), b.value.data().data(), a.grad.data(), m, n_rows, k);
      if (b.requires_grad) gemm_tn(g.data(), a.value.data().data(), b.grad.data(), m, n_rows, k);
      break;
    }

    case Op::kAdd:
    case Op::kSub: {
      const T sign = n.op == Op::kAdd ? T{1} : T{-1};
      if (wants(0))
        for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += g[i];
      if (wants(1))
        for (std::size_t i = 0; i < g.size(); ++i) in(1).grad[i] += sign * g[i];
      break;
    }

    case Op::kMul: {
      Node& a = in(0);
      Node& b = in(1);
      if (a.requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * b.value[i];
      if (b.requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) b.grad[i] += g[i] * a.value[i];
      break;
    }

    case Op::kAddRowwise: {
      const std::size_t cols = y.cols();
      if (wants(0))
        for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += g[i];
      if (wants(1))
        for (std::size_t i = 0; i < g.size(); ++i) in(1).grad[i % cols] += g[i];
      break;
    }

    case Op::kAffine: {
      const T alpha = n.aux[0];
      for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += alpha * g[i];
      break;
    }

    case Op::kScale: {
      Node& x = in(0);
      Node& s = in(1);
      if (x.requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) x.grad[i] += g[i] * s.value[0];
      if (s.requires_grad) {
        T acc{0};
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value[i];
        s.grad[0] += acc;
      }
      break;
    }

    case Op::kElement:
    case Op::kSlice: {
      const std::size_t start = n.index[0];
      for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[start + i] += g[i];
      break;
    }

    case Op::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += g[i] * y[i] * (T{1} - y[i]);
      break;

    case Op::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += g[i] * (T{1} - y[i] * y[i]);
      break;

    case Op::kRelu:
      // Subgradient 0 at the kink.
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] > T{0}) in(0).grad[i] += g[i];
      break;

    case Op::kConcat: {
      const std::size_t rows = is_matrix(y.shape()) ? y.rows() : 1;
      const std::size_t total = is_vector(y.shape()) ? y.size() : y.cols();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Node& part = in(k);
        const std::size_t width = is_vector(part.value.shape()) ? part.value.size() : part.value.cols();
        if (part.requires_grad)
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < width; ++c) part.grad[r * width + c] += g[r * total + offset + c];
        offset += width;
      }
      break;
    }

    case Op::kWeightedRows: {
      Node& m = in(0);
      Node& w = in(1);
      const std::size_t rows = m.value.rows(), cols = m.value.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        if (m.requires_grad)
          for (std::size_t c = 0; c < cols; ++c) m.grad[i * cols + c] += w.value[i] * g[c];
        if (w.requires_grad) {
          T acc{0};
          for (std::size_t c = 0; c < cols; ++c) acc += m.value[i * cols + c] * g[c];
          w.grad[i] += acc;
        }
      }
      break;
    }

    case Op::kOuter: {
      Node& a = in(0);
      Node& b = in(1);
      const std::size_t rows = a.value.size(), cols = b.value.size();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
          const T gij = g[i * cols + j];
          if (a.requires_grad) a.grad[i] += gij * b.value[j];
          if (b.requires_grad) b.grad[j] += gij * a.value[i];
        }
      break;
    }

    case Op::kScaleRows: {
      Node& m = in(0);
      Node& w = in(1);
      const std::size_t rows = m.value.rows(), cols = m.value.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        T acc{0};
        for (std::size_t c = 0; c < cols; ++c) {
          if (m.requires_grad) m.grad[i * cols + c] += w.value[i] * g[i * cols + c];
          acc += m.value[i * cols + c] * g[i * cols + c];
        }
        if (w.requires_grad) w.grad[i] += acc;
      }
      break;
    }

    case Op::kSum:
      for (auto& d : in(0).grad) d += g[0];
      break;

    case Op::kMean: {
      auto& d = in(0).grad;
      const T share = g[0] / static_cast<T>(d.size());
      for (auto& x : d) x += share;
      break;
    }

    case Op::kMaskedSoftmax: {
      T dot{0};
      for (std::size_t i = 0; i < g.size(); ++i) dot += y[i] * g[i];
      for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += y[i] * (g[i] - dot);
      break;
    }

    case Op::kSoftmaxCrossEntropy: {
      // aux holds the softmax probabilities.
      const std::size_t target = n.index[0];
      for (std::size_t i = 0; i < n.aux.size(); ++i)
        in(0).grad[i] += g[0] * (n.aux[i] - (i == target ? T{1} : T{0}));
      break;
    }

    case Op::kGatherRows: {
      const std::size_t cols = y.cols();
      auto& d = in(0).grad;
      for (std::size_t r = 0; r < n.index.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) d[n.index[r] * cols + c] += g[r * cols + c];
      break;
    }

    case Op::kRow: {
      const std::size_t start = n.index[0] * g.size();
      for (std::size_t c = 0; c < g.size(); ++c) in(0).grad[start + c] += g[c];
      break;
    }

    case Op::kStackRows: {
      const std::size_t cols = y.cols();
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!wants(k)) continue;
        for (std::size_t c = 0; c < cols; ++c) in(k).grad[c] += g[k * cols + c];
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& g = same_graph(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (!is_matrix(av.shape()) || bv.rank() > 2 || av.cols() != bv.rows()) {
    shape_error("matmul", av.shape(), bv.shape());
  }
  const std::size_t m = av.rows(), k = av.cols();
  const bool vec = is_vector(bv.shape());
  const std::size_t cols = vec ? 1 : bv.cols();
  Tensor<T> out(vec ? Shape{m} : Shape{m, cols});
  if (vec) {
    for (std::size_t i = 0; i < m; ++i) out[i] = dot(av.data().data() + i * k, bv.data().data(), k);
  } else {
    gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, cols);
  }
  return g.record(Op::kMatMul, {a.id(), b.id()}, std::move(out));
}

template <typename T>
Var<T> matmul_bt(Var<T> a, Var<T> b) {
  auto& g = same_graph(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (!is_matrix(av.shape()) || !is_matrix(bv.shape()) || av.cols() != bv.cols()) {
    shape_error("matmul_bt", av.shape(), bv.shape());
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out({m, n});
  gemm_nt(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return g.record(Op::kMatMulBT, {a.id(), b.id()}, std::move(out));
}

namespace {

template <typename T, typename F>
Var<T> binary_elementwise(Op op, Var<T> a, Var<T> b, F f) {
  auto& g = same_graph(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_error(op_name(op), av.shape(), bv.shape());
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return g.record(op, {a.id(), b.id()}, std::move(out));
}

template <typename T, typename F>
Var<T> unary_elementwise(Op op, Var<T> x, F f) {
  auto& g = graph_of(x);
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = f(v);
  return g.record(op, {x.id()}, std::move(out));
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary_elementwise(Op::kAdd, a, b, [](T x, T y) { return x + y; });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary_elementwise(Op::kSub, a, b, [](T x, T y) { return x - y; });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  return binary_elementwise(Op::kMul, a, b, [](T x, T y) { return x * y; });
}

template <typename T>
Var<T> add_rowwise(Var<T> m, Var<T> bias) {
  auto& g = same_graph(m, bias);
  const auto& mv = m.value();
  const auto& bv = bias.value();
  if (!is_matrix(mv.shape()) || !is_vector(bv.shape()) || bv.size() != mv.cols()) {
    shape_error("add_rowwise", mv.shape(), bv.shape());
  }
  Tensor<T> out = mv;
  const std::size_t cols = mv.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % cols];
  return g.record(Op::kAddRowwise, {m.id(), bias.id()}, std::move(out));
}

template <typename T>
Var<T> affine(Var<T> x, T alpha, T beta) {
  auto& g = graph_of(x);
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = alpha * v + beta;
  return g.record(Op::kAffine, {x.id()}, std::move(out), {alpha, beta});
}

template <typename T>
Var<T> scale(Var<T> x, Var<T> s) {
  auto& g = same_graph(x, s);
  if (s.size() != 1) shape_error("scale", x.shape(), s.shape());
  const T factor = s.value()[0];
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v *= factor;
  return g.record(Op::kScale, {x.id(), s.id()}, std::move(out));
}

template <typename T>
Var<T> element(Var<T> v, std::size_t k) {
  auto& g = graph_of(v);
  if (!is_vector(v.shape()) || k >= v.size()) {
    throw DimensionError("element " + std::to_string(k) + " out of range for " + shape_string(v.shape()));
  }
  return g.record(Op::kElement, {v.id()}, Tensor<T>({1}, {v.value()[k]}), {}, {k});
}

template <typename T>
Var<T> slice(Var<T> v, std::size_t start, std::size_t length) {
  auto& g = graph_of(v);
  if (!is_vector(v.shape()) || length == 0 || start + length > v.size()) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for " + shape_string(v.shape()));
  }
  const auto data = v.value().data().subspan(start, length);
  return g.record(Op::kSlice, {v.id()}, Tensor<T>({length}, {data.begin(), data.end()}), {}, {start});
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return unary_elementwise(Op::kSigmoid, x, [](T v) {
    // Branches keep exp() from overflowing for large |v|.
    if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
    const T e = std::exp(v);
    return e / (T{1} + e);
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  return unary_elementwise(Op::kTanh, x, [](T v) { return std::tanh(v); });
}

template <typename T>
Var<T> relu(Var<T> x) {
  return unary_elementwise(Op::kRelu, x, [](T v) { return v > T{0} ? v : T{0}; });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  auto& g = graph_of(parts.front());
  const auto& first = parts.front().value();
  const bool vectors = is_vector(first.shape());
  const std::size_t rows = vectors ? 1 : first.rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    if (p.graph() != &g) throw ContractError("operands belong to different graphs");
    if (vectors ? !is_vector(pv.shape()) : (!is_matrix(pv.shape()) || pv.rows() != rows)) {
      shape_error("concat", first.shape(), pv.shape());
    }
    total += vectors ? pv.size() : pv.cols();
  }
  Tensor<T> out(vectors ? Shape{total} : Shape{rows, total});
  std::vector<std::uint32_t> ids;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    const std::size_t width = vectors ? pv.size() : pv.cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) out[r * total + offset + c] = pv[r * width + c];
    offset += width;
    ids.push_back(p.id());
  }
  return g.record(Op::kConcat, std::move(ids), std::move(out));
}

template <typename T>
Var<T> weighted_rows(Var<T> m, Var<T> w) {
  auto& g = same_graph(m, w);
  const auto& mv = m.value();
  const auto& wv = w.value();
  if (!is_matrix(mv.shape()) || !is_vector(wv.shape()) || wv.size() != mv.rows()) {
    shape_error("weighted_rows", mv.shape(), wv.shape());
  }
  const std::size_t rows = mv.rows(), cols = mv.cols();
  Tensor<T> out({cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t c = 0; c < cols; ++c) out[c] += wv[i] * mv[i * cols + c];
  return g.record(Op::kWeightedRows, {m.id(), w.id()}, std::move(out));
}

template <typename T>
Var<T> outer(Var<T> a, Var<T> b) {
  auto& g = same_graph(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (!is_vector(av.shape()) || !is_vector(bv.shape())) shape_error("outer", av.shape(), bv.shape());
  Tensor<T> out({av.size(), bv.size()});
  for (std::size_t i = 0; i < av.size(); ++i)
    for (std::size_t j = 0; j < bv.size(); ++j) out[i * bv.size() + j] = av[i] * bv[j];
  return g.record(Op::kOuter, {a.id(), b.id()}, std::move(out));
}

template <typename T>
Var<T> scale_rows(Var<T> m, Var<T> w) {
  auto& g = same_graph(m, w);
  const auto& mv = m.value();
  const auto& wv = w.value();
  if (!is_matrix(mv.shape()) || !is_vector(wv.shape()) || wv.size() != mv.rows()) {
    shape_error("scale_rows", mv.shape(), wv.shape());
  }
  Tensor<T> out = mv;
  const std::size_t cols = mv.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= wv[i / cols];
  return g.record(Op::kScaleRows, {m.id(), w.id()}, std::move(out));
}

template <typename T>
Var<T> sum(Var<T> x) {
  auto& g = graph_of(x);
  T acc{0};
  for (T v : x.value().data()) acc += v;
  return g.record(Op::kSum, {x.id()}, Tensor<T>({1}, {acc}));
}

template <typename T>
Var<T> mean(Var<T> x) {
  auto& g = graph_of(x);
  T acc{0};
  for (T v : x.value().data()) acc += v;
  return g.record(Op::kMean, {x.id()}, Tensor<T>({1}, {acc / static_cast<T>(x.size())}));
}

template <typename T>
Var<T> masked_softmax(Var<T> v, const std::vector<bool>& mask) {
  auto& g = graph_of(v);
  const auto& vv = v.value();
  if (!is_vector(vv.shape()) || mask.size() != vv.size()) {
    throw DimensionError("masked_softmax: mask of length " + std::to_string(mask.size()) +
                         " for logits " + shape_string(vv.shape()));
  }
  T peak = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < vv.size(); ++i)
    if (mask[i]) {
      peak = std::max(peak, vv[i]);
      any = true;
    }
  if (!any) throw ContractError("masked_softmax: every position is masked (empty support)");
  Tensor<T> out(vv.shape());
  T total{0};
  for (std::size_t i = 0; i < vv.size(); ++i)
    if (mask[i]) {
      out[i] = std::exp(vv[i] - peak);
      total += out[i];
    }
  for (auto& x : out.data()) x /= total;
  return g.record(Op::kMaskedSoftmax, {v.id()}, std::move(out));
}

template <typename T>
Var<T> softmax(Var<T> v) {
  return masked_softmax(v, std::vector<bool>(v.size(), true));
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::size_t target) {
  auto& g = graph_of(logits);
  const auto& z = logits.value();
  if (!is_vector(z.shape())) throw DimensionError("softmax_cross_entropy expects a vector, got " + shape_string(z.shape()));
  if (target >= z.size()) {
    throw ContractError("target class " + std::to_string(target) + " out of range for " +
                        std::to_string(z.size()) + " classes");
  }
  const T peak = *std::max_element(z.data().begin(), z.data().end());
  T total{0};
  std::vector<T> probs(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    probs[i] = std::exp(z[i] - peak);
    total += probs[i];
  }
  for (auto& p : probs) p /= total;
  const T loss = peak + std::log(total) - z[target];
  return g.record(Op::kSoftmaxCrossEntropy, {logits.id()}, Tensor<T>({1}, {loss}), std::move(probs),
                  {target});
}

template <typename T>
Var<T> gather_rows(Var<T> table, const std::vector<std::size_t>& ids) {
  auto& g = graph_of(table);
  const auto& tv = table.value();
  if (!is_matrix(tv.shape())) throw DimensionError("gather_rows expects a matrix, got " + shape_string(tv.shape()));
  if (ids.empty()) throw ContractError("gather_rows with no ids");
  const std::size_t cols = tv.cols();
  Tensor<T> out({ids.size(), cols});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= tv.rows()) {
      throw ContractError("row id " + std::to_string(ids[r]) + " out of range for " + shape_string(tv.shape()));
    }
    auto src = tv.row(ids[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return g.record(Op::kGatherRows, {table.id()}, std::move(out), {}, ids);
}

template <typename T>
Var<T> row(Var<T> m, std::size_t i) {
  auto& g = graph_of(m);
  const auto& mv = m.value();
  if (!is_matrix(mv.shape()) || i >= mv.rows()) {
    throw DimensionError("row " + std::to_string(i) + " out of range for " + shape_string(mv.shape()));
  }
  auto src = mv.row(i);
  return g.record(Op::kRow, {m.id()}, Tensor<T>({mv.cols()}, {src.begin(), src.end()}), {}, {i});
}

template <typename T>
Var<T> stack_rows(const std::vector<Var<T>>& rows, std::size_t n_rows) {
  if (rows.empty()) throw ContractError("stack_rows of zero rows");
  if (rows.size() > n_rows) throw DimensionError("stack_rows: more rows than the output holds");
  auto& g = graph_of(rows.front());
  const std::size_t cols = rows.front().size();
  Tensor<T> out({n_rows, cols});
  std::vector<std::uint32_t> ids;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& rv = rows[k].value();
    if (rows[k].graph() != &g) throw ContractError("operands belong to different graphs");
    if (!is_vector(rv.shape()) || rv.size() != cols) shape_error("stack_rows", rows.front().shape(), rv.shape());
    std::copy(rv.data().begin(), rv.data().end(), out.row(k).begin());
    ids.push_back(rows[k].id());
  }
  return g.record(Op::kStackRows, std::move(ids), std::move(out));
}

#define HMEQA_INSTANTIATE_OPS(T)                                                     \
  template class Graph<T>;                                                          \
  template Var<T> matmul(Var<T>, Var<T>);                                           \
  template Var<T> matmul_bt(Var<T>, Var<T>);                                        \
  template Var<T> add(Var<T>, Var<T>);                                              \
  template Var<T> sub(Var<T>, Var<T>);                                              \
  template Var<T> mul(Var<T>, Var<T>);                                              \
  template Var<T> add_rowwise(Var<T>, Var<T>);                                      \
  template Var<T> affine(Var<T>, T, T);                                             \
  template Var<T> scale(Var<T>, Var<T>);                                            \
  template Var<T> element(Var<T>, std::size_t);                                     \
  template Var<T> slice(Var<T>, std::size_t, std::size_t);                          \
  template Var<T> sigmoid(Var<T>);                                                  \
  template Var<T> tanh(Var<T>);                                                     \
  template Var<T> relu(Var<T>);                                                     \
  template Var<T> concat(const std::vector<Var<T>>&);                               \
  template Var<T> weighted_rows(Var<T>, Var<T>);                                    \
  template Var<T> outer(Var<T>, Var<T>);                                            \
  template Var<T> scale_rows(Var<T>, Var<T>);                                       \
  template Var<T> sum(Var<T>);                                                      \
  template Var<T> mean(Var<T>);                                                     \
  template Var<T> masked_softmax(Var<T>, const std::vector<bool>&);                 \
  template Var<T> softmax(Var<T>);                                                  \
  template Var<T> softmax_cross_entropy(Var<T>, std::size_t);                       \
  template Var<T> gather_rows(Var<T>, const std::vector<std::size_t>&);             \
  template Var<T> row(Var<T>, std::size_t);                                         \
  template Var<T> stack_rows(const std::vector<Var<T>>&, std::size_t);

HMEQA_INSTANTIATE_OPS(float)
HMEQA_INSTANTIATE_OPS(double)

}  // namespace hmeqa
