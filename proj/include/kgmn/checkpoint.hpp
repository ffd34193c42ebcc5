#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "error.hpp"
#include "params.hpp"
#include "vocab.hpp"

namespace kgmn {

// Layout: one JSON header line, then the tensors as little-endian f64 in
// header order.
inline constexpr std::string_view kCheckpointFormat = "kgmn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointHeader {
  std::string kind;  // extractor | generator
  std::size_t step = 0;
  RunConfig config;
  Vocab vocab;
  nlohmann::json tensors;
};

inline void save_checkpoint(const std::string& path, const std::string& kind, const RunConfig& config,
                            const Vocab& vocab, const nn::ParamStore& params) {
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : params) {
    tensors.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
    offset += p.value.size();
  }
  nlohmann::json header = {{"format", kCheckpointFormat}, {"version", kCheckpointVersion},
                           {"dtype", "f64"},              {"kind", kind},
                           {"step", params.step()},       {"config", config_to_json(config)},
                           {"vocab", vocab.to_json()},    {"tensors", tensors}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << header.dump() << '\n';
  static_assert(sizeof(double) == 8);
  for (const auto& p : params)
    out.write(reinterpret_cast<const char*>(p.value.values().data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

namespace detail {

inline CheckpointHeader read_header(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint '" + path + "' is empty");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("'" + path + "' is not a checkpoint");
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw DataError("'" + path + "' is not a checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw DataError("checkpoint '" + path + "' has unsupported version");
  if (j.value("dtype", "") != "f64") throw DataError("checkpoint '" + path + "' has unsupported dtype");
  CheckpointHeader h;
  try {
    h.kind = j.at("kind").get<std::string>();
    h.step = j.at("step").get<std::size_t>();
    h.tensors = j.at("tensors");
    h.vocab = Vocab::from_json(j.at("vocab"));
    h.config = config_from_json(j.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' header is damaged: " + e.what());
  }
  return h;
}

}  // namespace detail

inline CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return detail::read_header(in, path);
}

// Fills `params` from the checkpoint. Every stored tensor must match a
// parameter of the same name and shape, in the same order, and vice versa.
inline CheckpointHeader load_checkpoint(const std::string& path, nn::ParamStore& params,
                                        const std::string& expected_kind = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  auto h = detail::read_header(in, path);
  if (!expected_kind.empty() && h.kind != expected_kind)
    throw DataError("checkpoint '" + path + "' holds a " + h.kind + " model, expected " + expected_kind);
  if (h.tensors.size() != params.size())
    throw DataError("checkpoint '" + path + "' has " + std::to_string(h.tensors.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  std::size_t i = 0;
  for (auto& p : params) {
    const auto& t = h.tensors[i++];
    const auto name = t.at("name").get<std::string>();
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (name != p.name) throw DataError("checkpoint tensor '" + name + "' where '" + p.name + "' was expected");
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols())
      throw DataError("checkpoint tensor '" + name + "' has shape " + t.at("shape").dump() + ", model expects [" +
                      std::to_string(p.value.rows()) + "," + std::to_string(p.value.cols()) + "]");
  }
  for (auto& p : params) {
    in.read(reinterpret_cast<char*>(p.value.values().data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint '" + path + "' is truncated at tensor '" + p.name + "'");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint '" + path + "' has trailing data");
  params.set_step(h.step);
  return h;
}

// The architecture fields that must agree between a run and a checkpoint.
inline void require_compatible(const RunConfig& expected, const RunConfig& stored, const std::string& path) {
  if (expected.hidden != stored.hidden)
    throw DataError("checkpoint '" + path + "' was trained with hidden=" + std::to_string(stored.hidden) +
                    " but hidden=" + std::to_string(expected.hidden) + " was requested");
  if (expected.timesteps != stored.timesteps)
    throw DataError("checkpoint '" + path + "' was trained with timesteps=" + std::to_string(stored.timesteps) +
                    " but timesteps=" + std::to_string(expected.timesteps) + " was requested");
}

struct LoadedExtractor {
  CheckpointHeader header;
  ExtractorModel model;
};

struct LoadedGenerator {
  CheckpointHeader header;
  GeneratorModel model;
};

inline LoadedExtractor load_extractor(const std::string& path) {
  auto h = read_checkpoint_header(path);
  auto model = make_extractor(h.config, h.vocab.size());
  h = load_checkpoint(path, model.params(), "extractor");
  return LoadedExtractor{std::move(h), std::move(model)};
}

inline LoadedGenerator load_generator(const std::string& path) {
  auto h = read_checkpoint_header(path);
  auto model = make_generator(h.config, h.vocab.size());
  h = load_checkpoint(path, model.params(), "generator");
  return LoadedGenerator{std::move(h), std::move(model)};
}

}  // namespace kgmn
