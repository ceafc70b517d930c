#include "hmeqa/visual_memory.hpp"

#include "hmeqa/errors.hpp"
#include "hmeqa/layers.hpp"

namespace hmeqa {

template <typename T>
VisualMemory<T>::VisualMemory(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                              std::size_t memory_dim, std::size_t slots, Rng& rng, Options options)
    : memory_dim_(memory_dim), slots_(slots), options_(options) {
  const std::size_t d = memory_dim;
  for (auto stream : {Stream::kMotion, Stream::kAppearance}) {
    const std::string p = prefix + (stream == Stream::kMotion ? ".motion" : ".appearance");
    auto& b = banks_[static_cast<int>(stream)];
    b.W_oc = make_weight(params, p + ".W_oc", d, input_dim, rng);
    b.W_hc = make_weight(params, p + ".W_hc", d, d, rng);
    b.b_c = make_bias(params, p + ".b_c", d);
    b.W_ca = make_weight(params, p + ".W_ca", d, d, rng);
    b.W_ha = make_weight(params, p + ".W_ha", d, d, rng);
    b.b_a = make_bias(params, p + ".b_a", d);
    b.v_a = make_score_vector(params, p + ".v_a", d, rng);
    b.U_a = make_weight(params, p + ".U_a", d, d, rng);
    b.W_hh = make_weight(params, p + ".W_hh", d, d, rng);
    b.W_oh = make_weight(params, p + ".W_oh", d, input_dim, rng);
    b.W_rh = make_weight(params, p + ".W_rh", d, d, rng);
    b.b_h = make_bias(params, p + ".b_h", d);
  }
  W_he_ = make_weight(params, prefix + ".W_he", d, d, rng);
  W_me_ = make_weight(params, prefix + ".W_me", d, d, rng);
  W_ae_ = make_weight(params, prefix + ".W_ae", d, d, rng);
  b_e_ = make_bias(params, prefix + ".b_e", d);
  V_e_ = make_weight(params, prefix + ".V_e", 3, d, rng);
  W_hb_ = make_weight(params, prefix + ".W_hb", d, d, rng);
  W_mb_ = make_weight(params, prefix + ".W_mb", d, d, rng);
  W_ab_ = make_weight(params, prefix + ".W_ab", d, d, rng);
  b_b_ = make_bias(params, prefix + ".b_b", d);
  v_b_ = make_score_vector(params, prefix + ".v_b", d, rng);
  U_b_ = make_weight(params, prefix + ".U_b", d, d, rng);
  W_hh_video_ = make_weight(params, prefix + ".video.W_hh", d, d, rng);
  W_rh_video_ = make_weight(params, prefix + ".video.W_rh", d, d, rng);
  b_h_video_ = make_bias(params, prefix + ".video.b_h", d);
}

template <typename T>
VisualMemoryState<T> VisualMemory<T>::initial_state(Graph<T>& g) const {
  return {g.zeros({slots_, memory_dim_}), g.zeros({memory_dim_}), g.zeros({memory_dim_}),
          g.zeros({memory_dim_})};
}

template <typename T>
Var<T> VisualMemory<T>::content(Var<T> encoded, Var<T> h_prev, Stream stream) const {
  auto& g = *encoded.graph();
  const auto& b = bank(stream);
  return sigmoid(linear_sum(g, {{b.W_oc, encoded}, {b.W_hc, h_prev}}, b.b_c));
}

template <typename T>
Var<T> VisualMemory<T>::write_weights(Var<T> content, Var<T> h_prev, Var<T> memory, Stream stream) const {
  auto& g = *content.graph();
  const auto& b = bank(stream);
  auto shared = linear_sum(g, {{b.W_ca, content}, {b.W_ha, h_prev}}, b.b_a);
  return softmax(slot_scores(g, shared, memory, b.U_a, b.v_a, options_.strict_eq));
}

template <typename T>
Var<T> VisualMemory<T>::modality_weights(Var<T> h_video, Var<T> content_motion,
                                         Var<T> content_appearance) const {
  auto& g = *h_video.graph();
  if (options_.forced_modality_weights) {
    const auto& w = *options_.forced_modality_weights;
    return g.input(Tensor<T>({3}, {static_cast<T>(w[0]), static_cast<T>(w[1]), static_cast<T>(w[2])}));
  }
  auto feature = tanh(linear_sum(g, {{W_he_, h_video}, {W_me_, content_motion}, {W_ae_, content_appearance}}, b_e_));
  return softmax(matmul(bind(g, V_e_), feature));
}

template <typename T>
Var<T> VisualMemory<T>::update(Var<T> memory, Var<T> alpha_motion, Var<T> alpha_appearance,
                               Var<T> content_motion, Var<T> content_appearance, Var<T> epsilon) const {
  auto motion_write = scale(outer(alpha_motion, content_motion), element(epsilon, 0));
  auto appearance_write = scale(outer(alpha_appearance, content_appearance), element(epsilon, 1));
  auto retained = scale(memory, element(epsilon, 2));
  return add(add(motion_write, appearance_write), retained);
}

template <typename T>
typename VisualMemory<T>::Read VisualMemory<T>::read(Var<T> memory, Var<T> h_video, Var<T> content_motion,
                                                      Var<T> content_appearance) const {
  auto& g = *memory.graph();
  auto shared = linear_sum(g, {{W_hb_, h_video}, {W_mb_, content_motion}, {W_ab_, content_appearance}}, b_b_);
  auto beta = softmax(slot_scores(g, shared, memory, U_b_, v_b_, options_.strict_eq));
  return {beta, weighted_rows(memory, beta)};
}

template <typename T>
typename VisualMemory<T>::Hidden VisualMemory<T>::hidden_update(const VisualMemoryState<T>& prev,
                                                                Var<T> encoded_motion,
                                                                Var<T> encoded_appearance,
                                                                Var<T> read_content) const {
  auto& g = *read_content.graph();
  auto stream_hidden = [&](Stream s, Var<T> h_prev, Var<T> encoded) {
    const auto& b = bank(s);
    return sigmoid(linear_sum(g, {{b.W_hh, h_prev}, {b.W_oh, encoded}, {b.W_rh, read_content}}, b.b_h));
  };
  // The global state sees the frame only through the memory read.
  auto video = sigmoid(linear_sum(g, {{W_hh_video_, prev.h_video}, {W_rh_video_, read_content}}, b_h_video_));
  return {stream_hidden(Stream::kMotion, prev.h_motion, encoded_motion),
          stream_hidden(Stream::kAppearance, prev.h_appearance, encoded_appearance), video};
}

template <typename T>
typename VisualMemory<T>::Step VisualMemory<T>::step(const VisualMemoryState<T>& prev, Var<T> encoded_motion,
                                                     Var<T> encoded_appearance) const {
  auto c_m = content(encoded_motion, prev.h_motion, Stream::kMotion);
  auto c_a = content(encoded_appearance, prev.h_appearance, Stream::kAppearance);
  auto alpha_m = write_weights(c_m, prev.h_motion, prev.memory, Stream::kMotion);
  auto alpha_a = write_weights(c_a, prev.h_appearance, prev.memory, Stream::kAppearance);
  auto eps = modality_weights(prev.h_video, c_m, c_a);
  auto memory = update(prev.memory, alpha_m, alpha_a, c_m, c_a, eps);
  auto r = read(memory, prev.h_video, c_m, c_a);
  auto hidden = hidden_update(prev, encoded_motion, encoded_appearance, r.content);
  return {{memory, hidden.motion, hidden.appearance, hidden.video}, alpha_m, alpha_a, eps, r.weights};
}

template <typename T>
typename VisualMemory<T>::Output VisualMemory<T>::process(const EncodedSequence<T>& motion,
                                                          const EncodedSequence<T>& appearance) const {
  if (motion.valid_len != appearance.valid_len || motion.length() != appearance.length()) {
    throw ContractError("motion and appearance streams are not frame-aligned (" +
                        std::to_string(motion.valid_len) + " vs " + std::to_string(appearance.valid_len) +
                        " valid frames)");
  }
  if (motion.valid_len == 0) throw ContractError("visual memory needs at least one frame");
  auto& g = *motion.outputs.graph();
  Output out;
  out.valid_len = motion.valid_len;
  auto state = initial_state(g);
  std::vector<Var<T>> video;
  for (std::size_t t = 0; t < motion.valid_len; ++t) {
    auto s = step(state, row(motion.outputs, t), row(appearance.outputs, t));
    state = s.state;
    video.push_back(state.h_video);
    out.trace.push_back({to_doubles(s.alpha_motion.value()), to_doubles(s.alpha_appearance.value()),
                         to_doubles(s.epsilon.value()), to_doubles(s.beta.value())});
  }
  out.video_features = stack_rows(video, motion.length());
  out.final_state = state;
  return out;
}

template class VisualMemory<float>;
template class VisualMemory<double>;

}  // namespace hmeqa
