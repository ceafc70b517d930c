#include "hmeqa/question_memory.hpp"

#include "hmeqa/errors.hpp"
#include "hmeqa/layers.hpp"

namespace hmeqa {

template <typename T>
QuestionMemory<T>::QuestionMemory(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                                  std::size_t memory_dim, std::size_t slots, Rng& rng, Options options)
    : memory_dim_(memory_dim), slots_(slots), options_(options) {
  const std::size_t d = memory_dim;
  W_oc_ = make_weight(params, prefix + ".W_oc", d, input_dim, rng);
  W_hc_ = make_weight(params, prefix + ".W_hc", d, d, rng);
  b_c_ = make_bias(params, prefix + ".b_c", d);
  W_ca_ = make_weight(params, prefix + ".W_ca", d, d, rng);
  W_ha_ = make_weight(params, prefix + ".W_ha", d, d, rng);
  b_a_ = make_bias(params, prefix + ".b_a", d);
  v_a_ = make_score_vector(params, prefix + ".v_a", d, rng);
  U_a_ = make_weight(params, prefix + ".U_a", d, d, rng);
  W_cb_ = make_weight(params, prefix + ".W_cb", d, d, rng);
  W_hb_ = make_weight(params, prefix + ".W_hb", d, d, rng);
  b_b_ = make_bias(params, prefix + ".b_b", d);
  v_b_ = make_score_vector(params, prefix + ".v_b", d, rng);
  U_b_ = make_weight(params, prefix + ".U_b", d, d, rng);
  W_oh_ = make_weight(params, prefix + ".W_oh", d, input_dim, rng);
  W_rh_ = make_weight(params, prefix + ".W_rh", d, d, rng);
  W_hh_ = make_weight(params, prefix + ".W_hh", d, d, rng);
  b_h_ = make_bias(params, prefix + ".b_h", d);
}

template <typename T>
QuestionMemoryState<T> QuestionMemory<T>::initial_state(Graph<T>& g) const {
  return {g.zeros({slots_, memory_dim_}), g.zeros({memory_dim_})};
}

template <typename T>
Var<T> QuestionMemory<T>::content(Var<T> encoded, Var<T> h_prev) const {
  auto& g = *encoded.graph();
  return sigmoid(linear_sum(g, {{W_oc_, encoded}, {W_hc_, h_prev}}, b_c_));
}

template <typename T>
Var<T> QuestionMemory<T>::write_weights(Var<T> content, Var<T> h_prev, Var<T> memory) const {
  auto& g = *content.graph();
  auto shared = linear_sum(g, {{W_ca_, content}, {W_ha_, h_prev}}, b_a_);
  return softmax(slot_scores(g, shared, memory, U_a_, v_a_, options_.strict_eq));
}

template <typename T>
Var<T> QuestionMemory<T>::blend(Var<T> memory, Var<T> alpha, Var<T> content) const {
  return add(scale_rows(memory, affine(alpha, T{-1}, T{1})), outer(alpha, content));
}

template <typename T>
typename QuestionMemory<T>::Write QuestionMemory<T>::write(Var<T> memory, Var<T> content, Var<T> h_prev) const {
  auto alpha = write_weights(content, h_prev, memory);
  return {alpha, blend(memory, alpha, content)};
}

template <typename T>
typename QuestionMemory<T>::Read QuestionMemory<T>::read(Var<T> memory, Var<T> content, Var<T> h_prev) const {
  auto& g = *memory.graph();
  auto shared = linear_sum(g, {{W_cb_, content}, {W_hb_, h_prev}}, b_b_);
  auto beta = softmax(slot_scores(g, shared, memory, U_b_, v_b_, options_.strict_eq));
  return {beta, weighted_rows(memory, beta)};
}

template <typename T>
Var<T> QuestionMemory<T>::hidden_update(Var<T> encoded, Var<T> read_content, Var<T> h_prev) const {
  auto& g = *encoded.graph();
  return sigmoid(linear_sum(g, {{W_oh_, encoded}, {W_rh_, read_content}, {W_hh_, h_prev}}, b_h_));
}

template <typename T>
typename QuestionMemory<T>::Step QuestionMemory<T>::step(const QuestionMemoryState<T>& prev, Var<T> encoded) const {
  auto c = content(encoded, prev.hidden);
  auto w = write(prev.memory, c, prev.hidden);
  auto r = read(w.memory, c, prev.hidden);
  auto h = hidden_update(encoded, r.content, prev.hidden);
  return {{w.memory, h}, w.weights, r.weights};
}

template <typename T>
typename QuestionMemory<T>::Output QuestionMemory<T>::process(const EncodedSequence<T>& question) const {
  if (question.valid_len == 0) throw ContractError("question memory needs at least one word");
  auto& g = *question.outputs.graph();
  Output out;
  out.valid_len = question.valid_len;
  auto state = initial_state(g);
  std::vector<Var<T>> hidden;
  for (std::size_t t = 0; t < question.valid_len; ++t) {
    auto s = step(state, row(question.outputs, t));
    state = s.state;
    hidden.push_back(state.hidden);
    out.trace.push_back({to_doubles(s.alpha.value()), to_doubles(s.beta.value())});
  }
  out.question_features = stack_rows(hidden, question.length());
  out.final_state = state;
  return out;
}

template class QuestionMemory<float>;
template class QuestionMemory<double>;

}  // namespace hmeqa
