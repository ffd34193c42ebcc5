#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "config.hpp"
#include "error.hpp"
#include "extractor.hpp"
#include "generator.hpp"
#include "graph_io.hpp"
#include "keywords.hpp"
#include "metrics.hpp"
#include "vocab.hpp"

namespace kgmn {

using Logger = std::function<void(const std::string&)>;

inline constexpr std::array<std::string_view, 3> kSplits = {"train", "valid", "test"};

// ---- artifact files ----

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("'" + path + "' is malformed: " + e.what());
  }
}

inline void save_vocab(const std::string& path, const Vocab& v) { write_json_file(path, v.to_json()); }
inline Vocab load_vocab(const std::string& path) { return Vocab::from_json(read_json_file(path)); }

inline void save_keywords(const std::string& path, const std::vector<KeywordSet>& sets) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& ks : sets) out << keyword_set_to_json(ks).dump() << '\n';
}

inline std::vector<KeywordSet> load_keywords(const std::string& path) {
  std::vector<KeywordSet> out;
  for_each_json_line(path, [&](std::size_t, const nlohmann::json& j) { out.push_back(keyword_set_from_json(j)); });
  return out;
}

// Keyword sets reordered to follow `graphs`; every graph needs one.
inline std::vector<KeywordSet> align_keywords(const std::vector<KeywordSet>& sets, const std::vector<CodeGraph>& graphs) {
  std::map<std::string, const KeywordSet*> by_id;
  for (const auto& ks : sets) by_id[ks.id] = &ks;
  std::vector<KeywordSet> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw DataError("no keywords for method '" + g.id + "'");
    out.push_back(*it->second);
  }
  return out;
}

inline nlohmann::json prediction_to_json(const std::string& id, const DecodeResult& r, const Tokens& keywords) {
  return {{"id", id}, {"predicted", r.tokens}, {"keywords", keywords}, {"p_gen", r.p_gen}};
}

inline std::vector<Prediction> load_predictions(const std::string& path) {
  std::vector<Prediction> out;
  for_each_json_line(path, [&](std::size_t, const nlohmann::json& j) {
    try {
      out.push_back(Prediction{j.at("id").get<std::string>(), j.at("predicted").get<Tokens>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad prediction record: ") + e.what());
    }
  });
  return out;
}

// ---- stage building blocks ----

inline nlohmann::json stats_to_json(const SharedTokenStats& st) {
  return {{"name_tokens", st.name_tokens}, {"found_in_body", st.found_tokens}, {"ratio", st.ratio},
          {"methods_by_shared_tokens", st.buckets}};
}

inline std::vector<KeywordSet> compute_keywords(KeywordSource strategy, const std::vector<CodeGraph>& graphs,
                                                std::size_t k, std::uint64_t seed,
                                                const std::vector<CodeGraph>* tfidf_corpus = nullptr,
                                                ExtractorModel* extractor = nullptr, const Vocab* vocab = nullptr) {
  std::vector<KeywordSet> out;
  out.reserve(graphs.size());
  switch (strategy) {
    case KeywordSource::Extractor:
      if (!extractor || !vocab) throw std::invalid_argument("the extractor strategy needs a trained extractor");
      return extract_keywords(*extractor, graphs, *vocab, k);
    case KeywordSource::Random: {
      nn::Rng rng(seed);
      for (const auto& g : graphs) out.push_back(baseline_random(g, k, rng));
      return out;
    }
    case KeywordSource::TextRank:
      for (const auto& g : graphs) out.push_back(baseline_textrank(g, k));
      return out;
    case KeywordSource::TfIdf: {
      const auto model = TfIdfModel::fit(tfidf_corpus ? *tfidf_corpus : graphs);
      for (const auto& g : graphs) out.push_back(baseline_tfidf(model, g, k));
      return out;
    }
    case KeywordSource::Reference:
      for (const auto& g : graphs) out.push_back(reference_keywords(g));
      return out;
  }
  return out;
}

inline std::uint64_t random_keyword_seed(const RunConfig& c, std::size_t split) {
  return derive_seed(derive_seed(c.seed, kRandomKeywords), split);
}

// ---- pipeline ----

struct PipelinePaths {
  std::filesystem::path dir;
  explicit PipelinePaths(const std::string& work_dir) : dir(work_dir) {}
  std::string graphs() const { return (dir / "graphs.jsonl").string(); }
  std::string vocab() const { return (dir / "vocab.json").string(); }
  std::string extractor() const { return (dir / "extractor.ckpt").string(); }
  std::string keywords(std::string_view split) const {
    return (dir / ("keywords." + std::string(split) + ".jsonl")).string();
  }
  std::string generator() const { return (dir / "generator.ckpt").string(); }
  std::string predictions() const { return (dir / "predictions.jsonl").string(); }
  std::string report() const { return (dir / "report.json").string(); }
};

inline constexpr std::array<std::string_view, 7> kStages = {
    "preprocess", "build-vocab", "train-extractor", "extract-keywords", "train-generator", "predict", "evaluate"};

struct PipelineOptions {
  bool force = false;                // rerun stages whose artifacts exist
  std::optional<std::string> stage;  // run only this stage
  Logger log;
};

class Pipeline {
 public:
  Pipeline(RunConfig cfg, PipelineOptions opt) : cfg_(std::move(cfg)), opt_(std::move(opt)), paths_(cfg_.work_dir) {}

  const PipelinePaths& paths() const noexcept { return paths_; }

  nlohmann::json run() {
    validate_config(cfg_);
    if (opt_.stage && std::find(kStages.begin(), kStages.end(), *opt_.stage) == kStages.end())
      throw std::invalid_argument("unknown stage '" + *opt_.stage + "'");
    std::filesystem::create_directories(paths_.dir);
    step("preprocess", {paths_.graphs()}, [&] { preprocess(); });
    step("build-vocab", {paths_.vocab()}, [&] { build(); });
    step("train-extractor", {paths_.extractor()}, [&] { train_extractor_stage(); });
    step("extract-keywords", {paths_.keywords("train"), paths_.keywords("valid"), paths_.keywords("test")},
         [&] { keywords_stage(); });
    step("train-generator", {paths_.generator()}, [&] { train_generator_stage(); });
    step("predict", {paths_.predictions()}, [&] { predict_stage(); });
    step("evaluate", {paths_.report()}, [&] { evaluate_stage(); });
    return std::filesystem::exists(paths_.report()) ? read_json_file(paths_.report()) : nlohmann::json();
  }

 private:
  void log(const std::string& m) const {
    if (opt_.log) opt_.log(m);
  }

  template <class F>
  void step(std::string_view name, const std::vector<std::string>& outputs, F&& body) {
    if (opt_.stage && *opt_.stage != name) return;
    const bool present =
        std::all_of(outputs.begin(), outputs.end(), [](const std::string& p) { return std::filesystem::exists(p); });
    if (present && !opt_.force && !opt_.stage) {
      log(std::string(name) + ": reusing existing artifacts");
      return;
    }
    log(std::string(name) + ": running");
    current_ = name;
    body();
  }

  // Upstream artifact check with a message naming the producing stage.
  void need(const std::string& path, std::string_view producer) const {
    if (!std::filesystem::exists(path))
      throw DataError("stage '" + current_ + "' needs '" + path + "', which is produced by stage '" +
                      std::string(producer) + "'; run that stage first");
  }

  const std::vector<CodeGraph>& graphs() {
    if (!graphs_) {
      need(paths_.graphs(), "preprocess");
      graphs_ = load_graphs(paths_.graphs());
    }
    return *graphs_;
  }
  std::vector<CodeGraph> split(std::string_view s) { return select_split(graphs(), s); }

  const Vocab& vocab() {
    if (!vocab_) {
      need(paths_.vocab(), "build-vocab");
      vocab_ = load_vocab(paths_.vocab());
    }
    return *vocab_;
  }

  ExtractorModel& extractor() {
    if (!extractor_) {
      need(paths_.extractor(), "train-extractor");
      auto loaded = load_extractor(paths_.extractor());
      require_compatible(cfg_, loaded.header.config, paths_.extractor());
      extractor_.emplace(std::move(loaded.model));
    }
    return *extractor_;
  }

  std::vector<KeywordSet> keywords_for(std::string_view s, const std::vector<CodeGraph>& graphs) {
    need(paths_.keywords(s), "extract-keywords");
    return align_keywords(load_keywords(paths_.keywords(s)), graphs);
  }

  void preprocess() {
    if (cfg_.data.empty()) throw DataError("stage 'preprocess' needs a dataset; set 'data' in the configuration");
    auto all = load_graphs(cfg_.data);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& g : all) {
      auto it = std::find(kSplits.begin(), kSplits.end(), g.split);
      if (it == kSplits.end()) throw DataError("method '" + g.id + "' has unknown split '" + g.split + "'");
      ++counts[it - kSplits.begin()];
    }
    if (!counts[0]) throw DataError("dataset '" + cfg_.data + "' has no training methods");
    write_graphs(paths_.graphs(), all);
    graphs_ = std::move(all);
    log("preprocess: " + std::to_string(counts[0]) + " train, " + std::to_string(counts[1]) + " valid, " +
        std::to_string(counts[2]) + " test methods");
  }

  void build() {
    vocab_ = build_vocab(split("train"), cfg_.min_count);
    save_vocab(paths_.vocab(), *vocab_);
    log("build-vocab: " + std::to_string(vocab_->size()) + " entries");
  }

  void train_extractor_stage() {
    const auto train = split("train");
    const auto valid = split("valid");
    const Vocab& v = vocab();
    auto model = make_extractor(cfg_, v.size());
    auto opt = train_options(cfg_, cfg_.extractor_epochs, kExtractorShuffle);
    opt.log = [&](const std::string& m) { log("train-extractor: " + m); };
    train_extractor(model, train, valid, v, extractor_loss_config(cfg_), opt);
    save_checkpoint(paths_.extractor(), "extractor", cfg_, v, model.params());
    extractor_.emplace(std::move(model));
  }

  void keywords_stage() {
    const auto strategy = *keyword_source_from_name(cfg_.keyword_strategy);
    const auto train = split("train");
    for (std::size_t s = 0; s < kSplits.size(); ++s) {
      const auto graphs = split(kSplits[s]);
      ExtractorModel* ex = strategy == KeywordSource::Extractor ? &extractor() : nullptr;
      const Vocab* v = strategy == KeywordSource::Extractor ? &vocab() : nullptr;
      save_keywords(paths_.keywords(kSplits[s]),
                    compute_keywords(strategy, graphs, cfg_.keywords_k, random_keyword_seed(cfg_, s), &train, ex, v));
    }
  }

  void train_generator_stage() {
    const auto train = split("train");
    const auto valid = split("valid");
    const Vocab& v = vocab();
    const auto train_kw = keywords_for("train", train);
    const auto valid_kw = keywords_for("valid", valid);
    auto model = make_generator(cfg_, v.size());
    auto opt = train_options(cfg_, cfg_.generator_epochs, kGeneratorShuffle);
    opt.log = [&](const std::string& m) { log("train-generator: " + m); };
    train_generator(model, pair_keywords(train, train_kw), pair_keywords(valid, valid_kw), v, opt);
    save_checkpoint(paths_.generator(), "generator", cfg_, v, model.params());
  }

  void predict_stage() {
    need(paths_.generator(), "train-generator");
    auto loaded = load_generator(paths_.generator());
    require_compatible(cfg_, loaded.header.config, paths_.generator());
    loaded.model.config().beam_width = cfg_.beam_width;
    loaded.model.config().max_decode_length = cfg_.max_decode_length;
    const auto test = split("test");
    const auto kw = keywords_for("test", test);
    std::ofstream out(paths_.predictions());
    if (!out) throw DataError("cannot write '" + paths_.predictions() + "'");
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto r = loaded.model.decode(test[i], kw[i].words, loaded.header.vocab);
      out << prediction_to_json(test[i].id, r, kw[i].words).dump() << '\n';
    }
  }

  void evaluate_stage() {
    need(paths_.predictions(), "predict");
    const auto test = split("test");
    nlohmann::json report;
    nlohmann::json cfg = config_to_json(cfg_);
    cfg.erase("data");
    cfg.erase("work_dir");
    report["config"] = cfg;
    report["test"] = to_json(evaluate_corpus(load_predictions(paths_.predictions()), test));
    if (!test.empty()) {
      report["shared_tokens"] = stats_to_json(shared_token_stats(test));
      report["keywords_used"] = to_json(keyword_quality(keywords_for("test", test), test));
      nlohmann::json quality;
      const auto train = split("train");
      for (auto s : {KeywordSource::Random, KeywordSource::TextRank, KeywordSource::TfIdf, KeywordSource::Reference})
        quality[std::string(keyword_source_name(s))] = to_json(
            keyword_quality(compute_keywords(s, test, cfg_.keywords_k, random_keyword_seed(cfg_, 2), &train), test));
      if (std::filesystem::exists(paths_.extractor()))
        quality["extractor"] =
            to_json(keyword_quality(compute_keywords(KeywordSource::Extractor, test, cfg_.keywords_k, 0, nullptr,
                                                     &extractor(), &vocab()),
                                    test));
      report["keyword_quality"] = quality;
    }
    write_json_file(paths_.report(), report);
    log("evaluate: report written to " + paths_.report());
  }

  RunConfig cfg_;
  PipelineOptions opt_;
  PipelinePaths paths_;
  std::string current_;
  std::optional<std::vector<CodeGraph>> graphs_;
  std::optional<Vocab> vocab_;
  std::optional<ExtractorModel> extractor_;
};

inline nlohmann::json run_pipeline(const RunConfig& cfg, PipelineOptions opt = {}) {
  return Pipeline(cfg, std::move(opt)).run();
}

}  // namespace kgmn
