#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmeqa/config.hpp"
#include "hmeqa/tensor.hpp"

namespace hmeqa {

/// One question about one video. For multiple choice, `answer` is the index
/// of the correct entry in `candidates`.
struct SampleRecord {
  std::string id;
  TaskKind task = TaskKind::kOpen;
  Tensor<double> appearance;  // [N_v×D_app]
  Tensor<double> motion;      // [N_v×D_mot]
  std::size_t valid_frames = 0;
  std::vector<std::size_t> question;
  std::size_t answer = 0;
  std::vector<std::vector<std::size_t>> candidates;

  bool operator==(const SampleRecord&) const = default;
};

using Dataset = std::vector<SampleRecord>;

/// Checks the record against a config: feature widths, frame alignment,
/// vocabulary range and answer range. Throws DatasetError.
void validate_sample(const SampleRecord& s, const ModelConfig& config);

/// Reserved token ids of the synthetic vocabulary.
namespace vocab {
inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kSep = 1;
inline constexpr std::size_t kQuery = 2;
inline constexpr std::size_t kAppearance = 3;
inline constexpr std::size_t kMotion = 4;
inline constexpr std::size_t kFirstPosition = 5;
}  // namespace vocab

/// Flagged-slot recall. Each frame carries one appearance symbol and one
/// motion symbol (one-hot rows); the question names a stream and a frame and
/// the answer is that stream's symbol there.
///
/// Tokens: PAD SEP QUERY APPEARANCE MOTION P0..P{frames-1} A0..A{symbols-1}.
/// Open question: [QUERY, stream, P_t], answer class = symbol.
/// Multiple choice: `choices` distinct candidate answers [A_k], one correct.
struct SyntheticSpec {
  std::string family = "flagged-slot";  // or "flagged-slot-mc"
  std::size_t samples = 512;
  std::size_t frames = 8;
  std::size_t symbols = 10;
  std::size_t choices = 4;

  std::size_t vocab_size() const { return 5 + frames + symbols; }
  std::size_t answer_token(std::size_t symbol) const { return 5 + frames + symbol; }
};

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// The synthetic task whose vocabulary and feature widths match a config.
/// Throws ConfigError when the config cannot host one.
SyntheticSpec synthetic_spec_for(const ModelConfig& config, std::size_t samples);

/// The stream and frame a synthetic question asks about.
struct SyntheticQuery {
  bool appearance;
  std::size_t frame;
};
SyntheticQuery decode_synthetic_query(const SampleRecord& s);

/// JSON Lines: one record per line with fields
///   id, task ("open"|"mc"), appearance, motion (arrays of rows),
///   valid_frames (optional, defaults to the row count), question (ids),
///   answer (class, open only), candidates (arrays of ids) and positive (mc only).
Dataset read_jsonl(const std::string& path);
void write_jsonl(const Dataset& data, const std::string& path);
std::string to_jsonl_line(const SampleRecord& s);
SampleRecord parse_jsonl_line(const std::string& line);

/// Seeded train/validation split; validation gets round(fraction·n) records.
struct Split {
  Dataset train;
  Dataset validation;
};
Split split_dataset(const Dataset& data, double validation_fraction, std::uint64_t seed);

}  // namespace hmeqa
