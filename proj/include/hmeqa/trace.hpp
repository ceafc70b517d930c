#pragma once

#include <string>

#include <json.hpp>

#include "hmeqa/dataset.hpp"
#include "hmeqa/model.hpp"

namespace hmeqa {

inline constexpr int kTraceSchemaVersion = 1;

/// Attention trace of one sample:
///   {schema_version, sample_id, variant, task, predicted, answer, correct,
///    valid_frames, question_length,
///    reasoning: [{step, gamma_video[], gamma_question[], phi[2]}],
///    visual_memory: [{frame, alpha_motion[], alpha_appearance[], epsilon[3], beta[]}],
///    question_memory: [{word, alpha[], beta[]}],
///    final_attention: [[...] per video stream]}
/// Every distribution is checked to sum to 1 within 1e-6; ContractError otherwise.
nlohmann::json trace_document(const SampleRecord& sample, const ModelConfig& config, const ModelTrace& trace,
                              std::size_t predicted);

/// Heatmap grids (rows = reasoning steps, columns = frames, then words) with
/// fill opacity equal to the weight.
std::string trace_svg(const nlohmann::json& document);

template <typename T>
nlohmann::json trace_sample(const Model<T>& model, const SampleRecord& sample);

}  // namespace hmeqa
