#pragma once

#include <string>
#include <vector>

#include "hmeqa/graph.hpp"

namespace hmeqa {

/// Per-frame descriptors with a valid prefix; rows past valid_len are zero.
template <typename T>
struct FeatureSequence {
  Tensor<T> frames;
  std::size_t valid_len = 0;

  /// Validates 1 ≤ valid_len ≤ rows and zeroes the padded rows.
  static FeatureSequence make(Tensor<T> frames, std::size_t valid_len);
};

struct QuestionSequence {
  std::vector<std::size_t> token_ids;
  std::size_t valid_len = 0;
};

/// Encoder outputs, one row per input position; rows past valid_len are zero.
template <typename T>
struct EncodedSequence {
  Var<T> outputs;
  std::size_t valid_len = 0;

  std::size_t length() const { return outputs.value().rows(); }
  std::size_t width() const { return outputs.value().cols(); }
};

template <typename T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

/// One LSTM layer. Gate rows of the stacked weights are ordered i, f, o, g.
/// Parameters: <prefix>.W_x [4H×in], <prefix>.W_h [4H×H], <prefix>.b [4H]
/// with the forget-gate slice of b initialized to 1.
template <typename T>
class LstmLayer {
 public:
  LstmLayer(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
            std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  LstmState<T> zero_state(Graph<T>& g) const;
  LstmState<T> step(Var<T> x, const LstmState<T>& state) const;
  /// Step with W_x·x supplied by the caller.
  LstmState<T> step_projected(Var<T> input_term, const LstmState<T>& state) const;
  /// X·W_xᵀ for a whole [N×in] sequence.
  Var<T> project_inputs(Var<T> sequence) const;

 private:
  std::size_t input_dim_;
  std::size_t hidden_dim_;
  Parameter<T>* w_input_;
  Parameter<T>* w_recurrent_;
  Parameter<T>* bias_;
};

/// Stacked LSTM over a sequence, starting from zero states. Only the first
/// valid_len steps run; later output rows are zero.
template <typename T>
class LstmEncoder {
 public:
  LstmEncoder(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
              std::size_t hidden_dim, std::size_t layers, Rng& rng);

  EncodedSequence<T> encode(Var<T> sequence, std::size_t valid_len) const;
  EncodedSequence<T> encode(Graph<T>& g, const FeatureSequence<T>& seq) const;

  std::size_t hidden_dim() const { return layers_.back().hidden_dim(); }
  const std::vector<LstmLayer<T>>& layers() const { return layers_; }

 private:
  std::vector<LstmLayer<T>> layers_;
};

/// Learnable word embedding table <name> [K×E].
template <typename T>
class Embedding {
 public:
  Embedding(ParameterSet<T>& params, const std::string& name, std::size_t vocab_size,
            std::size_t dim, Rng& rng);

  /// [N_q×E] rows looked up from the table; throws VocabularyError on an id
  /// outside the vocabulary.
  Var<T> embed(Graph<T>& g, const QuestionSequence& q) const;

  std::size_t vocab_size() const { return table_->value.rows(); }
  Parameter<T>& table() const { return *table_; }

 private:
  Parameter<T>* table_;
};

extern template struct FeatureSequence<float>;
extern template struct FeatureSequence<double>;
extern template class LstmLayer<float>;
extern template class LstmLayer<double>;
extern template class LstmEncoder<float>;
extern template class LstmEncoder<double>;
extern template class Embedding<float>;
extern template class Embedding<double>;

}  // namespace hmeqa
