#include "hmeqa/config.hpp"

#include <fstream>

#include "hmeqa/errors.hpp"

namespace hmeqa {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kEF: return "EF";
    case Variant::kLF: return "LF";
    case Variant::kVM: return "VM";
    case Variant::kQM: return "QM";
    case Variant::kVQ: return "VQ";
  }
  return "?";
}

std::string_view to_string(TaskKind t) {
  return t == TaskKind::kOpen ? "open" : "mc";
}

std::string_view to_string(Precision p) {
  return p == Precision::kF64 ? "f64" : "f32";
}

Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::kEF, Variant::kLF, Variant::kVM, Variant::kQM, Variant::kVQ})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected EF, LF, VM, QM or VQ)");
}

TaskKind parse_task(std::string_view s) {
  if (s == "open") return TaskKind::kOpen;
  if (s == "mc") return TaskKind::kMultipleChoice;
  throw ConfigError("unknown task kind '" + std::string(s) + "' (expected open or mc)");
}

Precision parse_precision(std::string_view s) {
  if (s == "f64") return Precision::kF64;
  if (s == "f32") return Precision::kF32;
  throw ConfigError("unknown precision '" + std::string(s) + "' (expected f64 or f32)");
}

bool uses_visual_memory(Variant v) { return v == Variant::kVM || v == Variant::kVQ; }
bool uses_question_memory(Variant v) { return v == Variant::kQM || v == Variant::kVQ; }

void ModelConfig::validate() const {
  auto positive = [](std::size_t value, const char* name) {
    if (value == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(encoder_hidden, "encoder_hidden");
  positive(encoder_layers, "encoder_layers");
  positive(embed_dim, "embed_dim");
  positive(memory_dim, "memory_dim");
  positive(visual_slots, "visual_slots");
  positive(question_slots, "question_slots");
  positive(reasoning_steps, "reasoning_steps");
  positive(vocab_size, "vocab_size");
  positive(appearance_dim, "appearance_dim");
  positive(motion_dim, "motion_dim");
  positive(batch_size, "batch_size");
  if (task == TaskKind::kOpen) positive(answer_classes, "answer_classes");
  if (task == TaskKind::kMultipleChoice && choices < 2) throw ConfigError("choices must be at least 2");
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"encoder_hidden", c.encoder_hidden},
      {"encoder_layers", c.encoder_layers},
      {"embed_dim", c.embed_dim},
      {"memory_dim", c.memory_dim},
      {"controller_dim", c.controller_dim},
      {"visual_slots", c.visual_slots},
      {"question_slots", c.question_slots},
      {"reasoning_steps", c.reasoning_steps},
      {"vocab_size", c.vocab_size},
      {"appearance_dim", c.appearance_dim},
      {"motion_dim", c.motion_dim},
      {"task", to_string(c.task)},
      {"answer_classes", c.answer_classes},
      {"choices", c.choices},
      {"margin", c.margin},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"variant", to_string(c.variant)},
      {"strict_eq", c.strict_eq},
      {"precision", to_string(c.precision)},
      {"clip_norm", c.clip_norm},
      {"validation_fraction", c.validation_fraction},
      {"head_on_controller_state", c.head_on_controller_state},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json defaults = c;
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("encoder_hidden", c.encoder_hidden);
    get("encoder_layers", c.encoder_layers);
    get("embed_dim", c.embed_dim);
    get("memory_dim", c.memory_dim);
    get("controller_dim", c.controller_dim);
    get("visual_slots", c.visual_slots);
    get("question_slots", c.question_slots);
    get("reasoning_steps", c.reasoning_steps);
    get("vocab_size", c.vocab_size);
    get("appearance_dim", c.appearance_dim);
    get("motion_dim", c.motion_dim);
    get("answer_classes", c.answer_classes);
    get("choices", c.choices);
    get("margin", c.margin);
    get("learning_rate", c.learning_rate);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("strict_eq", c.strict_eq);
    get("clip_norm", c.clip_norm);
    get("validation_fraction", c.validation_fraction);
    get("head_on_controller_state", c.head_on_controller_state);
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  ModelConfig c = j.get<ModelConfig>();
  c.validate();
  return c;
}

}  // namespace hmeqa
