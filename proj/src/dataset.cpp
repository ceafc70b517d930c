#include "hmeqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "hmeqa/errors.hpp"
#include "hmeqa/random.hpp"

namespace hmeqa {

namespace {

using nlohmann::json;

Tensor<double> one_hot_rows(const std::vector<std::size_t>& symbols, std::size_t width) {
  Tensor<double> t({symbols.size(), width});
  for (std::size_t r = 0; r < symbols.size(); ++r) t.at(r, symbols[r]) = 1.0;
  return t;
}

json rows_to_json(const Tensor<double>& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto span = t.row(r);
    rows.push_back(std::vector<double>(span.begin(), span.end()));
  }
  return rows;
}

Tensor<double> rows_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw DatasetError("field '" + field + "' must be a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols || cols == 0) {
      throw DatasetError("field '" + field + "' has ragged or empty rows");
    }
    for (const auto& x : row) values.push_back(x.get<double>());
  }
  return Tensor<double>({rows, cols}, std::move(values));
}

}  // namespace

void validate_sample(const SampleRecord& s, const ModelConfig& config) {
  auto fail = [&](const std::string& what) { throw DatasetError("sample '" + s.id + "': " + what); };
  if (s.appearance.rank() != 2 || s.motion.rank() != 2) fail("features must be matrices");
  if (s.appearance.rows() != s.motion.rows()) fail("appearance and motion frame counts differ");
  if (s.appearance.cols() != config.appearance_dim) fail("appearance width does not match the config");
  if (s.motion.cols() != config.motion_dim) fail("motion width does not match the config");
  if (s.valid_frames == 0 || s.valid_frames > s.appearance.rows()) fail("valid_frames out of range");
  if (s.question.empty()) fail("empty question");
  auto check_ids = [&](const std::vector<std::size_t>& ids) {
    for (auto id : ids)
      if (id >= config.vocab_size) fail("token id " + std::to_string(id) + " outside the vocabulary");
  };
  check_ids(s.question);
  if (s.task != config.task) fail("task kind does not match the config");
  if (s.task == TaskKind::kOpen) {
    if (s.answer >= config.answer_classes) fail("answer class out of range");
  } else {
    if (s.candidates.size() < 2) fail("multiple choice needs at least two candidates");
    if (s.answer >= s.candidates.size()) fail("positive index out of range");
    for (const auto& c : s.candidates) {
      if (c.empty()) fail("empty candidate");
      check_ids(c);
    }
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  const bool mc = spec.family == "flagged-slot-mc";
  if (!mc && spec.family != "flagged-slot") throw DatasetError("unknown task family '" + spec.family + "'");
  if (spec.frames == 0 || spec.symbols < 2) throw DatasetError("synthetic spec needs frames and ≥2 symbols");
  if (mc && (spec.choices < 2 || spec.choices > spec.symbols)) {
    throw DatasetError("choice count must lie in [2, symbols]");
  }
  Rng rng(seed);
  Dataset out;
  out.reserve(spec.samples);
  for (std::size_t n = 0; n < spec.samples; ++n) {
    std::vector<std::size_t> app(spec.frames), mot(spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      app[t] = rng.below(spec.symbols);
      mot[t] = rng.below(spec.symbols);
    }
    const bool ask_appearance = rng.below(2) == 0;
    const std::size_t frame = rng.below(spec.frames);
    const std::size_t symbol = ask_appearance ? app[frame] : mot[frame];

    SampleRecord s;
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", n);
    s.id = id;
    s.appearance = one_hot_rows(app, spec.symbols);
    s.motion = one_hot_rows(mot, spec.symbols);
    s.valid_frames = spec.frames;
    s.question = {vocab::kQuery, ask_appearance ? vocab::kAppearance : vocab::kMotion,
                  vocab::kFirstPosition + frame};
    if (!mc) {
      s.task = TaskKind::kOpen;
      s.answer = symbol;
    } else {
      s.task = TaskKind::kMultipleChoice;
      std::vector<std::size_t> distractors;
      for (auto k : rng.permutation(spec.symbols))
        if (k != symbol && distractors.size() + 1 < spec.choices) distractors.push_back(k);
      s.answer = rng.below(spec.choices);
      for (std::size_t c = 0, d = 0; c < spec.choices; ++c) {
        const std::size_t sym = c == s.answer ? symbol : distractors[d++];
        s.candidates.push_back({spec.answer_token(sym)});
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

SyntheticSpec synthetic_spec_for(const ModelConfig& config, std::size_t samples) {
  SyntheticSpec spec;
  spec.samples = samples;
  spec.symbols = config.answer_classes;
  spec.choices = config.choices;
  spec.family = config.task == TaskKind::kOpen ? "flagged-slot" : "flagged-slot-mc";
  if (config.appearance_dim != spec.symbols || config.motion_dim != spec.symbols ||
      config.vocab_size <= 5 + spec.symbols) {
    throw ConfigError("config does not describe a flagged-slot task: need appearance_dim = motion_dim = "
                      "answer_classes and vocab_size = 5 + frames + answer_classes");
  }
  spec.frames = config.vocab_size - 5 - spec.symbols;
  return spec;
}

SyntheticQuery decode_synthetic_query(const SampleRecord& s) {
  if (s.question.size() < 3 || s.question[0] != vocab::kQuery ||
      (s.question[1] != vocab::kAppearance && s.question[1] != vocab::kMotion) ||
      s.question[2] < vocab::kFirstPosition) {
    throw DatasetError("sample '" + s.id + "' is not a flagged-slot question");
  }
  return {s.question[1] == vocab::kAppearance, s.question[2] - vocab::kFirstPosition};
}

std::string to_jsonl_line(const SampleRecord& s) {
  json j;
  j["id"] = s.id;
  j["task"] = s.task == TaskKind::kOpen ? "open" : "mc";
  j["appearance"] = rows_to_json(s.appearance);
  j["motion"] = rows_to_json(s.motion);
  j["valid_frames"] = s.valid_frames;
  j["question"] = s.question;
  if (s.task == TaskKind::kOpen) {
    j["answer"] = s.answer;
  } else {
    j["candidates"] = s.candidates;
    j["positive"] = s.answer;
  }
  return j.dump();
}

SampleRecord parse_jsonl_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed record: ") + e.what());
  }
  SampleRecord s;
  try {
    s.id = j.at("id").get<std::string>();
    const auto task = j.at("task").get<std::string>();
    if (task == "open") {
      s.task = TaskKind::kOpen;
      s.answer = j.at("answer").get<std::size_t>();
    } else if (task == "mc") {
      s.task = TaskKind::kMultipleChoice;
      s.candidates = j.at("candidates").get<std::vector<std::vector<std::size_t>>>();
      s.answer = j.at("positive").get<std::size_t>();
    } else {
      throw DatasetError("record '" + s.id + "': unknown task '" + task + "'");
    }
    s.appearance = rows_from_json(j.at("appearance"), "appearance");
    s.motion = rows_from_json(j.at("motion"), "motion");
    s.valid_frames = j.contains("valid_frames") ? j["valid_frames"].get<std::size_t>() : s.appearance.rows();
    s.question = j.at("question").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw DatasetError("record '" + s.id + "': " + e.what());
  }
  return s;
}

Dataset read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  Dataset out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_jsonl_line(line));
    } catch (const DatasetError& e) {
      throw DatasetError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  if (out.empty()) throw DatasetError("dataset '" + path + "' has no records");
  return out;
}

void write_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write dataset '" + path + "'");
  for (const auto& s : data) out << to_jsonl_line(s) << '\n';
  if (!out) throw DatasetError("write to '" + path + "' failed");
}

Split split_dataset(const Dataset& data, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  Rng rng(seed);
  auto order = rng.permutation(data.size());
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::ranges::sort(val);
  std::ranges::sort(train);
  Split split;
  for (auto i : train) split.train.push_back(data[i]);
  for (auto i : val) split.validation.push_back(data[i]);
  return split;
}

}  // namespace hmeqa
