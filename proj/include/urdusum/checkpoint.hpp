#pragma once

// Checkpoint file: one line of compact JSON, '\n', then every tensor of
// Parameters::tensors() as raw little-endian IEEE-754 doubles, row-major,
// back to back. The header lists each tensor's name, shape and byte length.
//
//   {"format_version":1,"model":{...},"vocab":[...],"train":{"seed":1,"epochs":20},
//    "tensors":[{"name":"embedding","rows":V,"cols":E,"bytes":8*V*E},...]}

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "urdusum/corpus.hpp"
#include "urdusum/error.hpp"
#include "urdusum/io.hpp"
#include "urdusum/model.hpp"

namespace urdusum {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelConfig model;
  Vocabulary vocab;
  Parameters params;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
};

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& m) {
  return {{"vocab_size", m.vocab_size},         {"embedding_dim", m.embedding_dim},
          {"hidden_dim", m.hidden_dim},         {"num_layers", m.num_layers},
          {"max_source_len", m.max_source_len}, {"max_target_len", m.max_target_len}};
}

namespace detail {

inline void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

inline double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<double>(bits);
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& file) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(file, 1, std::string("checkpoint header lacks '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(file, 1, std::string("checkpoint header field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  ck.model.validate();
  ck.params.check_shapes(ck.model);
  if (ck.vocab.size() != ck.model.vocab_size) throw ShapeMismatch("checkpoint vocabulary size != model vocab_size");

  const auto names = Parameters::tensor_names(ck.model.num_layers);
  const auto tensors = ck.params.tensors();
  nlohmann::ordered_json listing = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    listing.push_back({{"name", names[i]},
                       {"rows", tensors[i]->rows()},
                       {"cols", tensors[i]->cols()},
                       {"bytes", tensors[i]->size() * sizeof(double)}});
  const nlohmann::ordered_json header{{"format_version", kCheckpointFormatVersion},
                                      {"model", model_config_to_json(ck.model)},
                                      {"vocab", ck.vocab.tokens()},
                                      {"train", {{"seed", ck.seed}, {"epochs", ck.epochs}}},
                                      {"tensors", listing}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const Matrix* m : tensors)
    for (double v : m->values()) detail::append_le(out, v);
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view bytes, const std::string& file = {}) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw ParseError(file, 1, "checkpoint header is not terminated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file, 1, std::string("checkpoint header: ") + e.what());
  }
  const int version = detail::required<int>(header, "format_version", file);
  if (version != kCheckpointFormatVersion)
    throw ParseError(file, 1, "unsupported checkpoint format_version " + std::to_string(version));

  const auto& m = header.contains("model") ? header["model"] : nlohmann::json();
  ModelConfig cfg;
  cfg.vocab_size = detail::required<std::size_t>(m, "vocab_size", file);
  cfg.embedding_dim = detail::required<std::size_t>(m, "embedding_dim", file);
  cfg.hidden_dim = detail::required<std::size_t>(m, "hidden_dim", file);
  cfg.num_layers = detail::required<std::size_t>(m, "num_layers", file);
  cfg.max_source_len = detail::required<std::size_t>(m, "max_source_len", file);
  cfg.max_target_len = detail::required<std::size_t>(m, "max_target_len", file);
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(file, 1, e.what());
  }

  auto tokens = detail::required<std::vector<std::string>>(header, "vocab", file);
  std::optional<Vocabulary> vocab;
  try {
    vocab.emplace(std::move(tokens));
  } catch (const InvalidArgument& e) {
    throw ParseError(file, 1, std::string("checkpoint vocabulary: ") + e.what());
  }
  if (vocab->size() != cfg.vocab_size) throw ParseError(file, 1, "checkpoint vocabulary size != model vocab_size");

  const auto& train = header.contains("train") ? header["train"] : nlohmann::json();
  const auto seed = detail::required<std::uint64_t>(train, "seed", file);
  const auto epochs = detail::required<std::size_t>(train, "epochs", file);

  const auto listing = detail::required<nlohmann::json>(header, "tensors", file);
  const auto names = Parameters::tensor_names(cfg.num_layers);
  const auto shapes = Parameters::tensor_shapes(cfg);
  if (!listing.is_array() || listing.size() != shapes.size())
    throw ParseError(file, 1, "checkpoint tensor list does not match the model config");

  Parameters params = Parameters::zeros(cfg);
  auto dst = params.tensors();
  std::size_t offset = newline + 1;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto name = detail::required<std::string>(listing[i], "name", file);
    const auto rows = detail::required<std::size_t>(listing[i], "rows", file);
    const auto cols = detail::required<std::size_t>(listing[i], "cols", file);
    const auto size = detail::required<std::size_t>(listing[i], "bytes", file);
    if (name != names[i] || rows != shapes[i].first || cols != shapes[i].second || size != rows * cols * sizeof(double))
      throw ParseError(file, 1, "checkpoint tensor " + std::to_string(i) + " ('" + name + "') does not match the model");
    if (bytes.size() - offset < size) throw ParseError(file, 0, "checkpoint truncated inside tensor '" + name + "'");
    for (double& v : dst[i]->values()) {
      v = detail::read_le(bytes.data() + offset);
      offset += sizeof(double);
    }
  }
  if (offset != bytes.size()) throw ParseError(file, 0, "trailing bytes after the last checkpoint tensor");
  return Checkpoint{cfg, std::move(*vocab), std::move(params), seed, epochs};
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path), path.string()); }

}  // namespace urdusum
