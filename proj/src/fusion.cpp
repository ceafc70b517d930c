#include "hmeqa/fusion.hpp"

#include "hmeqa/errors.hpp"
#include "hmeqa/layers.hpp"

namespace hmeqa {

template <typename T>
TemporalAttention<T>::TemporalAttention(ParameterSet<T>& params, const std::string& prefix, std::size_t state_dim,
                                        std::size_t input_dim, std::size_t attention_dim, Rng& rng)
    : input_dim_(input_dim) {
  W_ = make_weight(params, prefix + ".W_g", attention_dim, state_dim, rng);
  V_ = make_weight(params, prefix + ".V_g", attention_dim, input_dim, rng);
  b_ = make_bias(params, prefix + ".b_g", attention_dim);
  v_ = make_score_vector(params, prefix + ".v_g", attention_dim, rng);
}

template <typename T>
Var<T> TemporalAttention<T>::keys(Var<T> sequence) const {
  return matmul_bt(sequence, bind(*sequence.graph(), V_));
}

template <typename T>
typename TemporalAttention<T>::Result TemporalAttention<T>::attend(Var<T> query, Var<T> sequence, Var<T> keys,
                                                                   std::size_t valid_len) const {
  auto& g = *query.graph();
  const std::size_t n = sequence.value().rows();
  if (valid_len == 0) throw ContractError("temporal attention over an empty sequence");
  if (valid_len > n) throw ContractError("valid length exceeds sequence length");
  if (sequence.value().cols() != input_dim_) {
    throw DimensionError("attention input " + shape_string(sequence.shape()) + " does not match width " +
                         std::to_string(input_dim_));
  }
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(valid_len), true);
  auto query_term = linear_sum(g, {{W_, query}}, b_);
  auto gamma = masked_softmax(additive_scores(keys, query_term, bind(g, v_)), mask);
  return {gamma, weighted_rows(sequence, gamma)};
}

template <typename T>
typename FusionReasoner<T>::Bank FusionReasoner<T>::make_bank(ParameterSet<T>& params, const std::string& prefix,
                                                              std::size_t input_dim, std::size_t controller_dim,
                                                              Rng& rng) {
  const std::size_t ds = controller_dim;
  TemporalAttention<T> attention(params, prefix, ds, input_dim, ds, rng);
  auto W_d = make_weight(params, prefix + ".W_d", ds, input_dim, rng);
  auto b_d = make_bias(params, prefix + ".b_d", ds);
  auto W_p = make_weight(params, prefix + ".W_p", ds, ds, rng);
  auto V_p = make_weight(params, prefix + ".V_p", ds, ds, rng);
  auto b_p = make_bias(params, prefix + ".b_p", ds);
  return {attention, W_d, b_d, W_p, V_p, b_p};
}

template <typename T>
FusionReasoner<T>::FusionReasoner(ParameterSet<T>& params, const std::string& prefix, std::size_t video_dim,
                                  std::size_t question_dim, std::size_t controller_dim, Rng& rng)
    : video_(make_bank(params, prefix + ".video", video_dim, controller_dim, rng)),
      question_(make_bank(params, prefix + ".question", question_dim, controller_dim, rng)),
      v_p_(make_score_vector(params, prefix + ".v_p", controller_dim, rng)),
      controller_(params, prefix + ".controller", controller_dim, controller_dim, rng) {}

template <typename T>
FusionState<T> FusionReasoner<T>::initial_state(Graph<T>& g) const {
  return {controller_.zero_state(g), 0};
}

template <typename T>
typename TemporalAttention<T>::Result FusionReasoner<T>::attend_video(Var<T> s,
                                                                      const AttendedSequence<T>& seq) const {
  return video_.attention.attend(s, seq.features, seq.valid_len);
}

template <typename T>
typename TemporalAttention<T>::Result FusionReasoner<T>::attend_question(Var<T> s,
                                                                         const AttendedSequence<T>& seq) const {
  return question_.attention.attend(s, seq.features, seq.valid_len);
}

template <typename T>
Var<T> FusionReasoner<T>::transform(const Bank& bank, Var<T> context) const {
  return relu(linear_sum(*context.graph(), {{bank.W_d, context}}, bank.b_d));
}

template <typename T>
Var<T> FusionReasoner<T>::transform_video(Var<T> context) const {
  return transform(video_, context);
}

template <typename T>
Var<T> FusionReasoner<T>::transform_question(Var<T> context) const {
  return transform(question_, context);
}

template <typename T>
Var<T> FusionReasoner<T>::modality_logit(const Bank& bank, Var<T> s, Var<T> d) const {
  auto& g = *s.graph();
  auto feature = tanh(linear_sum(g, {{bank.W_p, s}, {bank.V_p, d}}, bank.b_p));
  return sum(mul(bind(g, v_p_), feature));
}

template <typename T>
typename FusionReasoner<T>::Fused FusionReasoner<T>::fuse(Var<T> s, Var<T> d_video, Var<T> d_question) const {
  auto phi = softmax(concat({modality_logit(video_, s, d_video), modality_logit(question_, s, d_question)}));
  return {phi, add(scale(d_video, element(phi, 0)), scale(d_question, element(phi, 1)))};
}

template <typename T>
typename FusionReasoner<T>::StepResult FusionReasoner<T>::reason_step(const FusionState<T>& state,
                                                                      const AttendedSequence<T>& video,
                                                                      const AttendedSequence<T>& question) const {
  auto s = state.controller.h;
  auto v = attend_video(s, video);
  auto q = attend_question(s, question);
  auto f = fuse(s, transform_video(v.context), transform_question(q.context));
  return {{controller_.step(f.fused, state.controller), state.step + 1}, v.weights, q.weights, f.weights};
}

template <typename T>
FusionState<T> FusionReasoner<T>::continue_reasoning(FusionState<T> state, const AttendedSequence<T>& video,
                                                     const AttendedSequence<T>& question, std::size_t steps,
                                                     std::vector<FusionStepTrace>* trace) const {
  for (std::size_t l = 0; l < steps; ++l) {
    auto r = reason_step(state, video, question);
    state = r.state;
    if (trace) {
      trace->push_back({to_doubles(r.gamma_video.value()), to_doubles(r.gamma_question.value()),
                        to_doubles(r.phi.value())});
    }
  }
  return state;
}

template <typename T>
typename FusionReasoner<T>::Output FusionReasoner<T>::reason(const AttendedSequence<T>& video,
                                                             const AttendedSequence<T>& question,
                                                             std::size_t steps) const {
  if (steps == 0) throw ConfigError("reasoning needs at least one step");
  Output out;
  auto state = continue_reasoning(initial_state(*video.features.graph()), video, question, steps, &out.trace);
  out.final_state = state.controller.h;
  return out;
}

template <typename T>
AnswerRepresentation<T>::AnswerRepresentation(ParameterSet<T>& params, const std::string& prefix,
                                              const std::vector<std::pair<std::string, std::size_t>>& streams,
                                              std::size_t controller_dim, Rng& rng)
    : output_dim_(controller_dim) {
  for (const auto& [name, dim] : streams) {
    banks_.emplace_back(params, prefix + "." + name, controller_dim, dim, controller_dim, rng);
    output_dim_ += dim;
  }
}

template <typename T>
typename AnswerRepresentation<T>::Output AnswerRepresentation<T>::build(
    Var<T> final_state, const std::vector<EncodedSequence<T>>& streams) const {
  if (streams.size() != banks_.size()) {
    throw ContractError("expected " + std::to_string(banks_.size()) + " video streams, got " +
                        std::to_string(streams.size()));
  }
  Output out;
  std::vector<Var<T>> parts{final_state};
  for (std::size_t k = 0; k < streams.size(); ++k) {
    auto r = banks_[k].attend(final_state, streams[k].outputs, streams[k].valid_len);
    parts.push_back(r.context);
    out.weights.push_back(r.weights);
  }
  out.representation = concat(parts);
  return out;
}

template class TemporalAttention<float>;
template class TemporalAttention<double>;
template class FusionReasoner<float>;
template class FusionReasoner<double>;
template class AnswerRepresentation<float>;
template class AnswerRepresentation<double>;

}  // namespace hmeqa
