#include "hmeqa/encoders.hpp"

#include <algorithm>

#include "hmeqa/errors.hpp"
#include "hmeqa/layers.hpp"

namespace hmeqa {

template <typename T>
FeatureSequence<T> FeatureSequence<T>::make(Tensor<T> frames, std::size_t valid_len) {
  if (frames.rank() != 2) throw DimensionError("feature sequence must be a matrix, got " + shape_string(frames.shape()));
  if (valid_len == 0) throw ContractError("feature sequence is empty");
  if (valid_len > frames.rows()) {
    throw ContractError("valid length " + std::to_string(valid_len) + " exceeds " +
                        std::to_string(frames.rows()) + " frames");
  }
  for (std::size_t r = valid_len; r < frames.rows(); ++r) std::ranges::fill(frames.row(r), T{0});
  return FeatureSequence{std::move(frames), valid_len};
}

template <typename T>
LstmLayer<T>::LstmLayer(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                        std::size_t hidden_dim, Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  w_input_ = make_weight(params, prefix + ".W_x", 4 * hidden_dim, input_dim, rng);
  w_recurrent_ = make_weight(params, prefix + ".W_h", 4 * hidden_dim, hidden_dim, rng);
  bias_ = make_bias(params, prefix + ".b", 4 * hidden_dim);
  for (std::size_t k = hidden_dim; k < 2 * hidden_dim; ++k) bias_->value[k] = T{1};
}

template <typename T>
LstmState<T> LstmLayer<T>::zero_state(Graph<T>& g) const {
  return {g.zeros({hidden_dim_}), g.zeros({hidden_dim_})};
}

template <typename T>
Var<T> LstmLayer<T>::project_inputs(Var<T> sequence) const {
  return matmul_bt(sequence, bind(*sequence.graph(), w_input_));
}

template <typename T>
LstmState<T> LstmLayer<T>::step(Var<T> x, const LstmState<T>& state) const {
  if (x.shape() != Shape{input_dim_}) {
    throw DimensionError("lstm input " + shape_string(x.shape()) + " does not match input size " +
                         std::to_string(input_dim_));
  }
  return step_projected(matmul(bind(*x.graph(), w_input_), x), state);
}

template <typename T>
LstmState<T> LstmLayer<T>::step_projected(Var<T> input_term, const LstmState<T>& state) const {
  auto& g = *input_term.graph();
  const std::size_t h = hidden_dim_;
  if (state.h.shape() != Shape{h} || state.c.shape() != Shape{h}) {
    throw DimensionError("lstm state " + shape_string(state.h.shape()) + " does not match hidden size " +
                         std::to_string(h));
  }
  auto z = add(add(input_term, matmul(bind(g, w_recurrent_), state.h)), bind(g, bias_));
  auto input_gate = sigmoid(slice(z, 0, h));
  auto forget_gate = sigmoid(slice(z, h, h));
  auto output_gate = sigmoid(slice(z, 2 * h, h));
  auto candidate = tanh(slice(z, 3 * h, h));
  auto cell = add(mul(forget_gate, state.c), mul(input_gate, candidate));
  return {mul(output_gate, tanh(cell)), cell};
}

template <typename T>
LstmEncoder<T>::LstmEncoder(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                            std::size_t hidden_dim, std::size_t layers, Rng& rng) {
  if (layers == 0) throw ConfigError("encoder needs at least one layer");
  for (std::size_t l = 0; l < layers; ++l) {
    layers_.emplace_back(params, prefix + ".l" + std::to_string(l), l == 0 ? input_dim : hidden_dim,
                         hidden_dim, rng);
  }
}

template <typename T>
EncodedSequence<T> LstmEncoder<T>::encode(Var<T> sequence, std::size_t valid_len) const {
  auto& g = *sequence.graph();
  const auto& shape = sequence.shape();
  if (shape.size() != 2 || shape[1] != layers_.front().input_dim()) {
    throw DimensionError("encoder input " + shape_string(shape) + " does not match input size " +
                         std::to_string(layers_.front().input_dim()));
  }
  const std::size_t steps = shape[0];
  if (valid_len == 0) throw ContractError("cannot encode an empty sequence");
  if (valid_len > steps) throw ContractError("valid length exceeds sequence length");

  Var<T> layer_input = sequence;
  for (const auto& layer : layers_) {
    auto projected = layer.project_inputs(layer_input);
    auto state = layer.zero_state(g);
    std::vector<Var<T>> outputs;
    outputs.reserve(valid_len);
    for (std::size_t t = 0; t < valid_len; ++t) {
      state = layer.step_projected(row(projected, t), state);
      outputs.push_back(state.h);
    }
    layer_input = stack_rows(outputs, steps);
  }
  return {layer_input, valid_len};
}

template <typename T>
EncodedSequence<T> LstmEncoder<T>::encode(Graph<T>& g, const FeatureSequence<T>& seq) const {
  return encode(g.input(seq.frames), seq.valid_len);
}

template <typename T>
Embedding<T>::Embedding(ParameterSet<T>& params, const std::string& name, std::size_t vocab_size,
                        std::size_t dim, Rng& rng) {
  auto& p = params.add(name, {vocab_size, dim});
  init_glorot_uniform(p.value, vocab_size, dim, rng);
  table_ = &p;
}

template <typename T>
Var<T> Embedding<T>::embed(Graph<T>& g, const QuestionSequence& q) const {
  if (q.token_ids.empty()) throw ContractError("question has no tokens");
  for (auto id : q.token_ids) {
    if (id >= vocab_size()) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab_size()));
    }
  }
  return gather_rows(bind(g, table_), q.token_ids);
}

template struct FeatureSequence<float>;
template struct FeatureSequence<double>;
template class LstmLayer<float>;
template class LstmLayer<double>;
template class LstmEncoder<float>;
template class LstmEncoder<double>;
template class Embedding<float>;
template class Embedding<double>;

}  // namespace hmeqa
