#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "hmeqa/answer_heads.hpp"
#include "hmeqa/config.hpp"
#include "hmeqa/dataset.hpp"
#include "hmeqa/encoders.hpp"
#include "hmeqa/fusion.hpp"
#include "hmeqa/question_memory.hpp"
#include "hmeqa/visual_memory.hpp"

namespace hmeqa {

/// Attention weights recorded during one forward pass. For multiple choice
/// the question-side entries belong to the predicted candidate.
struct ModelTrace {
  std::vector<VisualStepTrace> visual;
  std::vector<QuestionStepTrace> question;
  std::vector<FusionStepTrace> fusion;
  /// Final attention over each encoded video stream (motion, appearance; or
  /// the single fused stream for EF).
  std::vector<std::vector<double>> final_attention;
};

template <typename T>
struct ForwardResult {
  Var<T> loss;
  /// Class probabilities (open) or candidate scores (multiple choice).
  std::vector<double> scores;
  std::size_t prediction = 0;
  ModelTrace trace;
};

/// The complete network for one variant. Parameters are created in a fixed
/// order from an Rng seeded with config.seed.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  VisualMemory<T>* visual_memory() { return visual_memory_ ? &*visual_memory_ : nullptr; }
  QuestionMemory<T>* question_memory() { return question_memory_ ? &*question_memory_ : nullptr; }

  ForwardResult<T> forward(Graph<T>& g, const SampleRecord& sample) const;

  /// Builds the question sequence for one candidate: [question ; SEP ; candidate].
  static std::vector<std::size_t> candidate_tokens(const SampleRecord& sample, std::size_t k);

 private:
  struct VideoSide {
    AttendedSequence<T> features;
    std::vector<EncodedSequence<T>> streams;
    std::vector<VisualStepTrace> trace;
  };
  struct QuestionSide {
    AttendedSequence<T> features;
    std::vector<QuestionStepTrace> trace;
  };
  struct Answer {
    Var<T> head_input;
    std::vector<FusionStepTrace> fusion;
    std::vector<std::vector<double>> final_attention;
  };

  VideoSide encode_video(Graph<T>& g, const SampleRecord& sample) const;
  QuestionSide encode_question(Graph<T>& g, const std::vector<std::size_t>& tokens) const;
  Answer answer(const VideoSide& video, const QuestionSide& question) const;

  ModelConfig config_;
  ParameterSet<T> params_;
  std::optional<Embedding<T>> embedding_;
  std::optional<LstmEncoder<T>> question_encoder_;
  std::optional<LstmEncoder<T>> video_encoder_;  // EF only
  std::optional<LstmEncoder<T>> motion_encoder_;
  std::optional<LstmEncoder<T>> appearance_encoder_;
  std::optional<VisualMemory<T>> visual_memory_;
  std::optional<QuestionMemory<T>> question_memory_;
  std::optional<FusionReasoner<T>> reasoner_;
  std::optional<AnswerRepresentation<T>> representation_;
  std::optional<OpenHead<T>> open_head_;
  std::optional<ChoiceHead<T>> choice_head_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace hmeqa
