#include "hmeqa/model.hpp"

#include "hmeqa/errors.hpp"
#include "hmeqa/layers.hpp"

namespace hmeqa {

namespace {

template <typename T>
Tensor<T> cast_features(const Tensor<double>& src, std::size_t valid) {
  std::vector<T> values(src.data().begin(), src.data().end());
  return FeatureSequence<T>::make(Tensor<T>(src.shape(), std::move(values)), valid).frames;
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const auto& c = config_;
  const std::size_t h = c.encoder_hidden;
  const std::size_t d = c.memory_dim;
  const std::size_t ds = c.fusion_dim();
  const bool vm = uses_visual_memory(c.variant);
  const bool qm = uses_question_memory(c.variant);
  const bool early = c.variant == Variant::kEF;

  embedding_.emplace(params_, "embedding", c.vocab_size, c.embed_dim, rng);
  question_encoder_.emplace(params_, "encoder.question", c.embed_dim, h, c.encoder_layers, rng);
  if (early) {
    video_encoder_.emplace(params_, "encoder.video", c.appearance_dim + c.motion_dim, h, c.encoder_layers, rng);
  } else {
    motion_encoder_.emplace(params_, "encoder.motion", c.motion_dim, h, c.encoder_layers, rng);
    appearance_encoder_.emplace(params_, "encoder.appearance", c.appearance_dim, h, c.encoder_layers, rng);
  }
  if (vm) {
    visual_memory_.emplace(params_, "visual_memory", h, d, c.visual_slots, rng,
                           typename VisualMemory<T>::Options{c.strict_eq, std::nullopt});
  }
  if (qm) {
    question_memory_.emplace(params_, "question_memory", h, d, c.question_slots, rng,
                             typename QuestionMemory<T>::Options{c.strict_eq});
  }
  const std::size_t video_dim = vm ? d : (early ? h : 2 * h);
  const std::size_t question_dim = qm ? d : h;
  reasoner_.emplace(params_, "fusion", video_dim, question_dim, ds, rng);
  std::vector<std::pair<std::string, std::size_t>> streams;
  if (early) {
    streams = {{"video", h}};
  } else {
    streams = {{"motion", h}, {"appearance", h}};
  }
  representation_.emplace(params_, "answer_attention", streams, ds, rng);
  const std::size_t head_in = c.head_on_controller_state ? ds : representation_->output_dim();
  if (c.task == TaskKind::kOpen) {
    open_head_.emplace(params_, "head.open", head_in, c.answer_classes, rng);
  } else {
    choice_head_.emplace(params_, "head.choice", head_in, rng);
  }
}

template <typename T>
std::vector<std::size_t> Model<T>::candidate_tokens(const SampleRecord& sample, std::size_t k) {
  std::vector<std::size_t> tokens = sample.question;
  tokens.push_back(vocab::kSep);
  tokens.insert(tokens.end(), sample.candidates.at(k).begin(), sample.candidates.at(k).end());
  return tokens;
}

template <typename T>
typename Model<T>::VideoSide Model<T>::encode_video(Graph<T>& g, const SampleRecord& sample) const {
  const std::size_t valid = sample.valid_frames;
  auto appearance = g.input(cast_features<T>(sample.appearance, valid));
  auto motion = g.input(cast_features<T>(sample.motion, valid));
  VideoSide side;
  if (video_encoder_) {
    auto encoded = video_encoder_->encode(concat({appearance, motion}), valid);
    side.features = {encoded.outputs, valid};
    side.streams = {encoded};
    return side;
  }
  auto o_m = motion_encoder_->encode(motion, valid);
  auto o_a = appearance_encoder_->encode(appearance, valid);
  side.streams = {o_m, o_a};
  if (visual_memory_) {
    auto out = visual_memory_->process(o_m, o_a);
    side.features = {out.video_features, valid};
    side.trace = std::move(out.trace);
  } else {
    side.features = {concat({o_m.outputs, o_a.outputs}), valid};
  }
  return side;
}

template <typename T>
typename Model<T>::QuestionSide Model<T>::encode_question(Graph<T>& g,
                                                           const std::vector<std::size_t>& tokens) const {
  QuestionSequence q{tokens, tokens.size()};
  auto encoded = question_encoder_->encode(embedding_->embed(g, q), q.valid_len);
  QuestionSide side;
  if (question_memory_) {
    auto out = question_memory_->process(encoded);
    side.features = {out.question_features, q.valid_len};
    side.trace = std::move(out.trace);
  } else {
    side.features = {encoded.outputs, q.valid_len};
  }
  return side;
}

template <typename T>
typename Model<T>::Answer Model<T>::answer(const VideoSide& video, const QuestionSide& question) const {
  auto reasoned = reasoner_->reason(video.features, question.features, config_.reasoning_steps);
  auto rep = representation_->build(reasoned.final_state, video.streams);
  Answer a;
  a.head_input = config_.head_on_controller_state ? reasoned.final_state : rep.representation;
  a.fusion = std::move(reasoned.trace);
  for (const auto& w : rep.weights) a.final_attention.push_back(to_doubles(w.value()));
  return a;
}

template <typename T>
ForwardResult<T> Model<T>::forward(Graph<T>& g, const SampleRecord& sample) const {
  validate_sample(sample, config_);
  ForwardResult<T> result;
  auto video = encode_video(g, sample);
  result.trace.visual = video.trace;

  if (open_head_) {
    auto question = encode_question(g, sample.question);
    auto a = answer(video, question);
    auto logits = open_head_->logits(a.head_input);
    result.loss = open_head_->loss(logits, sample.answer);
    result.scores = to_doubles(softmax(logits).value());
    result.prediction = predict(result.scores);
    result.trace.question = std::move(question.trace);
    result.trace.fusion = std::move(a.fusion);
    result.trace.final_attention = std::move(a.final_attention);
    return result;
  }

  std::vector<Var<T>> scores;
  std::vector<QuestionSide> questions;
  std::vector<Answer> answers;
  for (std::size_t k = 0; k < sample.candidates.size(); ++k) {
    questions.push_back(encode_question(g, candidate_tokens(sample, k)));
    answers.push_back(answer(video, questions.back()));
    scores.push_back(choice_head_->score(answers.back().head_input));
  }
  auto all = concat(scores);
  result.loss = mc_loss(all, sample.answer, static_cast<T>(config_.margin));
  result.scores = to_doubles(all.value());
  result.prediction = predict(result.scores);
  result.trace.question = std::move(questions[result.prediction].trace);
  result.trace.fusion = std::move(answers[result.prediction].fusion);
  result.trace.final_attention = std::move(answers[result.prediction].final_attention);
  return result;
}

template class Model<float>;
template class Model<double>;

}  // namespace hmeqa
