#pragma once

#include <string>
#include <vector>

#include "hmeqa/encoders.hpp"
#include "hmeqa/graph.hpp"

namespace hmeqa {

/// Additive temporal attention over a padded sequence:
///   g_i = vᵀ·tanh(W·s + V·h_i + b),  γ = masked_softmax(g),  c = Σ γ_i·h_i.
/// Parameters: <prefix>.{W_g,V_g,b_g,v_g}.
template <typename T>
class TemporalAttention {
 public:
  struct Result {
    Var<T> weights;  // γ [N]
    Var<T> context;  // [D_in]
  };

  TemporalAttention(ParameterSet<T>& params, const std::string& prefix, std::size_t state_dim,
                    std::size_t input_dim, std::size_t attention_dim, Rng& rng);

  /// V·h_i for every row, reusable across queries.
  Var<T> keys(Var<T> sequence) const;
  Result attend(Var<T> query, Var<T> sequence, Var<T> keys, std::size_t valid_len) const;
  Result attend(Var<T> query, Var<T> sequence, std::size_t valid_len) const {
    return attend(query, sequence, keys(sequence), valid_len);
  }

 private:
  std::size_t input_dim_;
  Parameter<T>* W_;
  Parameter<T>* V_;
  Parameter<T>* b_;
  Parameter<T>* v_;
};

template <typename T>
struct FusionState {
  LstmState<T> controller;
  std::size_t step = 0;
};

struct FusionStepTrace {
  std::vector<double> gamma_video;
  std::vector<double> gamma_question;
  std::vector<double> phi;  // video, question
};

/// A padded feature sequence fed to the reasoner.
template <typename T>
struct AttendedSequence {
  Var<T> features;
  std::size_t valid_len = 0;
};

/// Multi-step multimodal fusion. Each iteration:
///   γ^v, c^v = attend(s, h^v)           γ^q, c^q = attend(s, h^q)
///   d^k      = relu(W_d^k·c^k + b_d^k)
///   p^k      = v_pᵀ·tanh(W_p^k·s + V_p^k·d^k + b_p^k)
///   φ        = softmax(p^v, p^q),  x = φ_v·d^v + φ_q·d^q
///   s        = LSTM(x, s)
/// Parameters: <prefix>.<video|question>.{W_g,V_g,b_g,v_g,W_d,b_d,W_p,V_p,b_p},
/// <prefix>.v_p, <prefix>.controller.{W_x,W_h,b}.
template <typename T>
class FusionReasoner {
 public:
  struct Bank {
    TemporalAttention<T> attention;
    Parameter<T>* W_d;
    Parameter<T>* b_d;
    Parameter<T>* W_p;
    Parameter<T>* V_p;
    Parameter<T>* b_p;
  };

  struct Fused {
    Var<T> weights;  // φ [2]
    Var<T> fused;    // x [D_s]
  };

  struct StepResult {
    FusionState<T> state;
    Var<T> gamma_video, gamma_question, phi;
  };

  struct Output {
    Var<T> final_state;  // s_L
    std::vector<FusionStepTrace> trace;
  };

  FusionReasoner(ParameterSet<T>& params, const std::string& prefix, std::size_t video_dim,
                 std::size_t question_dim, std::size_t controller_dim, Rng& rng);

  std::size_t controller_dim() const { return controller_.hidden_dim(); }

  FusionState<T> initial_state(Graph<T>& g) const;
  typename TemporalAttention<T>::Result attend_video(Var<T> s, const AttendedSequence<T>& seq) const;
  typename TemporalAttention<T>::Result attend_question(Var<T> s, const AttendedSequence<T>& seq) const;
  Var<T> transform_video(Var<T> context) const;
  Var<T> transform_question(Var<T> context) const;
  Fused fuse(Var<T> s, Var<T> d_video, Var<T> d_question) const;

  StepResult reason_step(const FusionState<T>& state, const AttendedSequence<T>& video,
                         const AttendedSequence<T>& question) const;
  Output reason(const AttendedSequence<T>& video, const AttendedSequence<T>& question, std::size_t steps) const;
  /// Continues from `state` for `steps` more iterations, appending to `trace`.
  FusionState<T> continue_reasoning(FusionState<T> state, const AttendedSequence<T>& video,
                                    const AttendedSequence<T>& question, std::size_t steps,
                                    std::vector<FusionStepTrace>* trace) const;

 private:
  Bank make_bank(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                 std::size_t controller_dim, Rng& rng);
  Var<T> transform(const Bank& bank, Var<T> context) const;
  Var<T> modality_logit(const Bank& bank, Var<T> s, Var<T> d) const;

  Bank video_;
  Bank question_;
  Parameter<T>* v_p_;
  LstmLayer<T> controller_;
};

/// Final ST-VQA-style attention over encoded video streams with s_L as the
/// query; s_A = [s_L ; ctx_1 ; ... ; ctx_k]. Parameters: <prefix>.<stream>.*.
template <typename T>
class AnswerRepresentation {
 public:
  AnswerRepresentation(ParameterSet<T>& params, const std::string& prefix,
                       const std::vector<std::pair<std::string, std::size_t>>& streams,
                       std::size_t controller_dim, Rng& rng);

  struct Output {
    Var<T> representation;
    std::vector<Var<T>> weights;
  };

  Output build(Var<T> final_state, const std::vector<EncodedSequence<T>>& streams) const;
  std::size_t output_dim() const { return output_dim_; }

 private:
  std::vector<TemporalAttention<T>> banks_;
  std::size_t output_dim_;
};

extern template class TemporalAttention<float>;
extern template class TemporalAttention<double>;
extern template class FusionReasoner<float>;
extern template class FusionReasoner<double>;
extern template class AnswerRepresentation<float>;
extern template class AnswerRepresentation<double>;

}  // namespace hmeqa
