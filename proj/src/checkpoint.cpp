#include "hmeqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "hmeqa/errors.hpp"

namespace hmeqa {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'H', 'M', 'E', 'Q', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

template <typename T>
constexpr const char* element_name() {
  return sizeof(T) == 8 ? "f64" : "f32";
}

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
  return value;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;

struct Contents {
  json manifest;
  std::string blob;
};

Contents read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const auto length = get_le<std::uint64_t>(reinterpret_cast<const unsigned char*>(bytes.data() + 8));
  if (length > bytes.size() - 16) throw CheckpointError("checkpoint '" + path + "' is truncated (manifest)");
  Contents c;
  try {
    c.manifest = json::parse(bytes.substr(16, length));
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "' has a corrupt manifest: " + e.what());
  }
  c.blob = bytes.substr(16 + length);
  return c;
}

}  // namespace

template <typename T>
void save_checkpoint(const ParameterSet<T>& params, const ModelConfig& config, const std::string& path) {
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["element_type"] = element_name<T>();
  manifest["config"] = config;
  json entries = json::array();
  std::string blob;
  for (const auto& p : params) {
    entries.push_back({{"name", p.name},
                       {"shape", p.value.shape()},
                       {"offset", blob.size()},
                       {"bytes", p.value.size() * sizeof(T)}});
    for (T x : p.value.data()) put_le(blob, std::bit_cast<Bits<T>>(x));
  }
  manifest["params"] = entries;
  const std::string text = manifest.dump();
  std::string out(kMagic, 8);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += blob;
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("cannot write checkpoint '" + path + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError("write to '" + path + "' failed");
}

ModelConfig read_checkpoint_config(const std::string& path) {
  auto c = read_file(path);
  try {
    return c.manifest.at("config").get<ModelConfig>();
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "' has no usable config: " + e.what());
  }
}

template <typename T>
void load_checkpoint(const std::string& path, ParameterSet<T>& params) {
  auto c = read_file(path);
  const auto& m = c.manifest;
  try {
    if (m.at("format_version").get<int>() != kFormatVersion) {
      throw CheckpointError("checkpoint '" + path + "' has unsupported format version");
    }
    if (m.at("element_type").get<std::string>() != element_name<T>()) {
      throw CheckpointError("checkpoint '" + path + "' stores " + m["element_type"].get<std::string>() +
                            " values, expected " + element_name<T>());
    }
    const auto& entries = m.at("params");
    if (entries.size() != params.size()) {
      throw CheckpointError("checkpoint '" + path + "' holds " + std::to_string(entries.size()) +
                            " parameters, model has " + std::to_string(params.size()));
    }
    std::size_t k = 0;
    for (auto& p : params) {
      const auto& e = entries[k++];
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<Shape>();
      if (name != p.name || shape != p.value.shape()) {
        throw CheckpointError("checkpoint '" + path + "' manifest mismatch: " + name + " " + shape_string(shape) +
                              " vs model " + p.name + " " + shape_string(p.value.shape()));
      }
      const auto offset = e.at("offset").get<std::size_t>();
      const auto bytes = e.at("bytes").get<std::size_t>();
      if (bytes != p.value.size() * sizeof(T)) throw CheckpointError("checkpoint '" + path + "': bad byte count for " + name);
      if (offset > c.blob.size() || bytes > c.blob.size() - offset) {
        throw CheckpointError("checkpoint '" + path + "' is truncated (data of " + name + ")");
      }
      const auto* src = reinterpret_cast<const unsigned char*>(c.blob.data() + offset);
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        p.value[i] = std::bit_cast<T>(get_le<Bits<T>>(src + i * sizeof(T)));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "' has a corrupt manifest: " + e.what());
  }
}

template void save_checkpoint(const ParameterSet<float>&, const ModelConfig&, const std::string&);
template void save_checkpoint(const ParameterSet<double>&, const ModelConfig&, const std::string&);
template void load_checkpoint(const std::string&, ParameterSet<float>&);
template void load_checkpoint(const std::string&, ParameterSet<double>&);

}  // namespace hmeqa
