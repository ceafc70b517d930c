#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hmeqa/graph.hpp"

namespace hmeqa {

/// Registers a [rows×cols] weight with Glorot-uniform values.
template <typename T>
Parameter<T>* make_weight(ParameterSet<T>& params, const std::string& name, std::size_t rows,
                          std::size_t cols, Rng& rng) {
  auto& p = params.add(name, {rows, cols});
  init_glorot_uniform(p.value, cols, rows, rng);
  return &p;
}

/// Registers a vector of `n` entries, all equal to `fill`.
template <typename T>
Parameter<T>* make_bias(ParameterSet<T>& params, const std::string& name, std::size_t n, T fill = T{0}) {
  auto& p = params.add(name, {n});
  p.value.fill(fill);
  return &p;
}

/// Registers an attention vector v (read as a 1-output layer).
template <typename T>
Parameter<T>* make_score_vector(ParameterSet<T>& params, const std::string& name, std::size_t n, Rng& rng) {
  auto& p = params.add(name, {n});
  init_glorot_uniform(p.value, n, 1, rng);
  return &p;
}

template <typename T>
Var<T> bind(Graph<T>& g, Parameter<T>* p) {
  return g.parameter(*p);
}

/// W₁·x₁ + W₂·x₂ + … + b, summed left to right.
template <typename T>
Var<T> linear_sum(Graph<T>& g, const std::vector<std::pair<Parameter<T>*, Var<T>>>& terms, Parameter<T>* bias) {
  Var<T> acc;
  for (const auto& [weight, x] : terms) {
    auto term = matmul(bind(g, weight), x);
    acc = acc.valid() ? add(acc, term) : term;
  }
  return add(acc, bind(g, bias));
}

/// Additive attention scores: score_i = vᵀ·tanh(query_term + row_i) where
/// `rows` holds one pre-projected key per row.
template <typename T>
Var<T> additive_scores(Var<T> rows, Var<T> query_term, Var<T> v) {
  return matmul(tanh(add_rowwise(rows, query_term)), v);
}

/// Scores for attention over memory slots. With `slot_term` (U) each slot
/// contributes U·m_i to its own logit; without it every slot receives the
/// same logit vᵀ·tanh(shared).
template <typename T>
Var<T> slot_scores(Graph<T>& g, Var<T> shared, Var<T> memory, Parameter<T>* slot_term, Parameter<T>* v,
                   bool strict) {
  const std::size_t slots = memory.value().rows();
  const std::size_t dim = shared.size();
  Var<T> rows = strict ? g.zeros({slots, dim}) : matmul_bt(memory, bind(g, slot_term));
  return additive_scores(rows, shared, bind(g, v));
}

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

}  // namespace hmeqa
