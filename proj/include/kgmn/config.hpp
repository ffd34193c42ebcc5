#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include <json.hpp>

#include "error.hpp"
#include "extractor.hpp"
#include "generator.hpp"
#include "ggnn.hpp"
#include "keywords.hpp"
#include "training.hpp"

namespace kgmn {

struct RunConfig {
  // encoder
  std::size_t hidden = 256;
  std::size_t timesteps = 4;
  bool tie_timesteps = false;
  // optimizer
  double learning_rate = 0.0005;
  double decay = 0.95;
  std::size_t decay_interval = 3000;
  double clip_norm = 5.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t patience = 5;
  // extractor
  std::size_t extractor_epochs = 20;
  std::string extractor_loss = "full";  // full | positive-only
  bool positive_weighting = true;
  // generator
  std::size_t generator_epochs = 30;
  bool use_key_gate = true;
  bool use_graph_gate = true;
  bool use_dual_attention = true;
  bool tie_keyword_embeddings = true;
  bool teacher_forcing = true;
  std::size_t max_decode_length = 8;
  std::size_t beam_width = 1;
  // keywords and data
  std::string keyword_strategy = "extractor";
  std::size_t keywords_k = 4;
  std::size_t min_count = 5;
  std::string data;
  std::string work_dir = "work";

  bool operator==(const RunConfig&) const = default;
};

// Calls f(name, member) for every field, in declaration order.
template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("hidden", c.hidden);
  f("timesteps", c.timesteps);
  f("tie_timesteps", c.tie_timesteps);
  f("learning_rate", c.learning_rate);
  f("decay", c.decay);
  f("decay_interval", c.decay_interval);
  f("clip_norm", c.clip_norm);
  f("batch_size", c.batch_size);
  f("seed", c.seed);
  f("patience", c.patience);
  f("extractor_epochs", c.extractor_epochs);
  f("extractor_loss", c.extractor_loss);
  f("positive_weighting", c.positive_weighting);
  f("generator_epochs", c.generator_epochs);
  f("use_key_gate", c.use_key_gate);
  f("use_graph_gate", c.use_graph_gate);
  f("use_dual_attention", c.use_dual_attention);
  f("tie_keyword_embeddings", c.tie_keyword_embeddings);
  f("teacher_forcing", c.teacher_forcing);
  f("max_decode_length", c.max_decode_length);
  f("beam_width", c.beam_width);
  f("keyword_strategy", c.keyword_strategy);
  f("keywords_k", c.keywords_k);
  f("min_count", c.min_count);
  f("data", c.data);
  f("work_dir", c.work_dir);
}

inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw DataError("invalid configuration: " + m); };
  if (c.hidden == 0 || c.hidden % 2 != 0) fail("hidden must be a positive even number");
  if (c.learning_rate <= 0.0) fail("learning_rate must be positive");
  if (c.decay <= 0.0 || c.decay > 1.0) fail("decay must lie in (0, 1]");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (c.beam_width == 0) fail("beam_width must be at least 1");
  if (c.max_decode_length == 0) fail("max_decode_length must be positive");
  if (c.keywords_k == 0) fail("keywords_k must be positive");
  if (c.extractor_loss != "full" && c.extractor_loss != "positive-only")
    fail("extractor_loss must be 'full' or 'positive-only'");
  if (!keyword_source_from_name(c.keyword_strategy))
    fail("keyword_strategy must be one of extractor, random, textrank, tfidf, reference");
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  visit_fields(c, [&](const char* name, const auto& v) { j[name] = v; });
  return j;
}

// Fields missing from `j` keep their current values; unknown keys are errors.
inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("configuration must be an object");
  std::set<std::string> known;
  visit_fields(c, [&](const char* name, auto& v) {
    known.insert(name);
    auto it = j.find(name);
    if (it == j.end()) return;
    using T = std::decay_t<decltype(v)>;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw DataError("");
      } else if constexpr (std::is_arithmetic_v<T> && !std::is_floating_point_v<T>) {
        if (!it->is_number_integer() || it->template get<long long>() < 0) throw DataError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw DataError("");
      } else {
        if (!it->is_string()) throw DataError("");
      }
      v = it->template get<T>();
    } catch (const std::exception&) {
      throw DataError(std::string("configuration field '") + name + "' has the wrong type");
    }
  });
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw DataError("unknown configuration field '" + it.key() + "'");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  apply_config_json(c, j);
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open configuration '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("configuration '" + path + "' is malformed: " + e.what());
  }
  return config_from_json(j);
}

// Independent streams derived from the one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t {
  kExtractorInit = 1,
  kExtractorShuffle = 2,
  kGeneratorInit = 3,
  kGeneratorShuffle = 4,
  kRandomKeywords = 5,
};

inline GgnnConfig ggnn_config(const RunConfig& c) {
  GgnnConfig g;
  g.hidden = c.hidden;
  g.timesteps = c.timesteps;
  g.tie_timesteps = c.tie_timesteps;
  return g;
}

inline GeneratorConfig generator_config(const RunConfig& c) {
  GeneratorConfig g;
  g.use_key_gate = c.use_key_gate;
  g.use_graph_gate = c.use_graph_gate;
  g.use_dual_attention = c.use_dual_attention;
  g.tie_keyword_embeddings = c.tie_keyword_embeddings;
  g.teacher_forcing = c.teacher_forcing;
  g.max_decode_length = c.max_decode_length;
  g.beam_width = c.beam_width;
  return g;
}

inline ExtractorLossConfig extractor_loss_config(const RunConfig& c) {
  return ExtractorLossConfig{c.extractor_loss == "positive-only", c.positive_weighting};
}

inline TrainOptions train_options(const RunConfig& c, std::size_t epochs, SeedStream stream) {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = c.batch_size;
  o.adam.learning_rate = c.learning_rate;
  o.adam.decay = c.decay;
  o.adam.decay_interval = c.decay_interval;
  o.adam.clip_norm = c.clip_norm;
  o.patience = c.patience;
  o.seed = derive_seed(c.seed, stream);
  return o;
}

inline ExtractorModel make_extractor(const RunConfig& c, std::size_t vocab_size) {
  return ExtractorModel(ggnn_config(c), vocab_size, derive_seed(c.seed, kExtractorInit));
}

inline GeneratorModel make_generator(const RunConfig& c, std::size_t vocab_size) {
  return GeneratorModel(ggnn_config(c), generator_config(c), vocab_size, derive_seed(c.seed, kGeneratorInit));
}

}  // namespace kgmn
