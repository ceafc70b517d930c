#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hmeqa {

/// Architecture variants of the ablation study.
///   EF  appearance and motion concatenated per frame, one encoder, no memories
///   LF  two encoders, encodings concatenated per frame, no memories
///   VM  heterogeneous visual memory; question side uses the plain encoder output
///   QM  question memory; visual side as LF
///   VQ  both memories (full model)
enum class Variant { kEF, kLF, kVM, kQM, kVQ };

enum class TaskKind { kOpen, kMultipleChoice };

enum class Precision { kF64, kF32 };

std::string_view to_string(Variant v);
std::string_view to_string(TaskKind t);
std::string_view to_string(Precision p);
Variant parse_variant(std::string_view s);
TaskKind parse_task(std::string_view s);
Precision parse_precision(std::string_view s);

bool uses_visual_memory(Variant v);
bool uses_question_memory(Variant v);

struct ModelConfig {
  std::size_t encoder_hidden = 32;
  std::size_t encoder_layers = 2;
  std::size_t embed_dim = 32;
  std::size_t memory_dim = 32;
  /// Fusion controller size; 0 means memory_dim.
  std::size_t controller_dim = 0;
  std::size_t visual_slots = 8;
  std::size_t question_slots = 4;
  std::size_t reasoning_steps = 3;
  std::size_t vocab_size = 23;
  std::size_t appearance_dim = 10;
  std::size_t motion_dim = 10;
  TaskKind task = TaskKind::kOpen;
  std::size_t answer_classes = 10;
  std::size_t choices = 4;
  double margin = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 300;
  std::uint64_t seed = 1;
  Variant variant = Variant::kVQ;
  /// Literal slot-independent logits for the memory read/write heads.
  bool strict_eq = false;
  Precision precision = Precision::kF64;
  double clip_norm = 5.0;
  double validation_fraction = 0.1;
  /// Open-ended head reads the controller state alone instead of the full
  /// answer representation.
  bool head_on_controller_state = false;

  std::size_t fusion_dim() const { return controller_dim ? controller_dim : memory_dim; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ModelConfig& c);

ModelConfig load_config(const std::string& path);

}  // namespace hmeqa
