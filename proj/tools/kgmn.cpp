#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgmn/kgmn.hpp"

namespace {

using namespace kgmn;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kAbort = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log_line(const std::string& m) { std::cerr << m << std::endl; }

std::string flag_name(std::string field) {
  for (auto& c : field)
    if (c == '_') c = '-';
  return "--" + field;
}

// --config plus one override flag per RunConfig field. Overrides are kept as
// text and applied after the file so that flags win.
class ConfigOptions {
 public:
  explicit ConfigOptions(CLI::App* app) {
    app->add_option("--config", config_path_, "JSON configuration file");
    RunConfig defaults;
    visit_fields(defaults, [&](const char* name, auto& v) {
      using T = std::decay_t<decltype(v)>;
      auto& slot = raw_[name];
      auto* opt = app->add_option(flag_name(name), slot, std::string("override '") + name + "'");
      if constexpr (std::is_same_v<T, bool>) opt->type_name("BOOL");
      options_[name] = opt;
    });
  }

  RunConfig resolve() {
    RunConfig cfg;
    if (!config_path_.empty()) {
      auto j = read_json_file(config_path_);
      apply_config_json(cfg, j);
      for (const char* f : {"hidden", "timesteps"})
        if (j.is_object() && j.contains(f)) explicit_.insert(f);
    }
    nlohmann::json overrides = nlohmann::json::object();
    visit_fields(cfg, [&](const char* name, auto& v) {
      if (!options_[name]->count()) return;
      explicit_.insert(name);
      const std::string& text = raw_[name];
      using T = std::decay_t<decltype(v)>;
      try {
        if constexpr (std::is_same_v<T, bool>) {
          if (text == "true" || text == "1" || text == "yes")
            overrides[name] = true;
          else if (text == "false" || text == "0" || text == "no")
            overrides[name] = false;
          else
            throw std::invalid_argument(text);
        } else if constexpr (std::is_floating_point_v<T>) {
          std::size_t used = 0;
          overrides[name] = std::stod(text, &used);
          if (used != text.size()) throw std::invalid_argument(text);
        } else if constexpr (std::is_integral_v<T>) {
          std::size_t used = 0;
          if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
          overrides[name] = static_cast<T>(std::stoull(text, &used));
          if (used != text.size()) throw std::invalid_argument(text);
        } else {
          overrides[name] = text;
        }
      } catch (const std::logic_error&) {
        throw UsageError("invalid value '" + text + "' for " + flag_name(name));
      }
    });
    apply_config_json(cfg, overrides);
    validate_config(cfg);
    return cfg;
  }

  bool architecture_explicit() const { return explicit_.count("hidden") || explicit_.count("timesteps"); }

 private:
  std::string config_path_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, CLI::Option*> options_;
  std::set<std::string> explicit_;
};

KeywordSource parse_strategy(const std::string& s) {
  auto k = keyword_source_from_name(s);
  if (!k) throw UsageError("unknown keyword strategy '" + s + "'");
  return *k;
}

std::vector<CodeGraph> train_or_all(const std::vector<CodeGraph>& graphs) {
  auto train = select_split(graphs, "train");
  return train.empty() ? graphs : train;
}

int run(int argc, char** argv) {
  CLI::App app{"Keyword-guided method name generation"};
  app.require_subcommand(1);

  std::string in, out, model_path, pred, ref, report, strategy = "extractor", keywords_path, extractor_path;
  std::size_t k = 4, min_count = 5;
  std::uint64_t seed = 1;
  bool force = false;
  std::string stage;

  auto* preprocess = app.add_subcommand("preprocess", "Parse raw methods into graphs");
  preprocess->add_option("--in", in, "raw or pre-parsed dataset (JSON lines)")->required();
  preprocess->add_option("--out", out, "graph file to write")->required();

  auto* stats = app.add_subcommand("stats", "Shared-token statistics of a dataset");
  stats->add_option("--in", in, "dataset or graph file")->required();

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the vocabulary from the training split");
  vocab_cmd->add_option("--in", in, "dataset or graph file")->required();
  vocab_cmd->add_option("--out", out, "vocabulary file to write")->required();
  vocab_cmd->add_option("--min-count", min_count, "minimum training frequency");

  auto* train_ex = app.add_subcommand("train-extractor", "Train the keyword extractor");
  ConfigOptions train_ex_cfg(train_ex);
  train_ex->add_option("--out", out, "checkpoint to write")->required();

  auto* extract = app.add_subcommand("extract-keywords", "Select keywords for every method");
  extract->add_option("--strategy", strategy, "extractor | random | textrank | tfidf | reference")
      ->check(CLI::IsMember({"extractor", "random", "textrank", "tfidf", "reference"}));
  extract->add_option("--in", in, "dataset or graph file")->required();
  extract->add_option("--out", out, "keyword file to write")->required();
  extract->add_option("--model", model_path, "extractor checkpoint");
  extract->add_option("--k", k, "keywords per method");
  extract->add_option("--seed", seed, "seed of the random strategy");

  auto* train_gen = app.add_subcommand("train-generator", "Train the name generator");
  ConfigOptions train_gen_cfg(train_gen);
  train_gen->add_option("--extractor", extractor_path, "extractor checkpoint (extractor strategy)");
  train_gen->add_option("--out", out, "checkpoint to write")->required();

  auto* predict = app.add_subcommand("predict", "Generate names");
  ConfigOptions predict_cfg(predict);
  predict->add_option("--model", model_path, "generator checkpoint")->required();
  predict->add_option("--in", in, "dataset or graph file")->required();
  predict->add_option("--out", out, "prediction file to write")->required();
  predict->add_option("--keywords", keywords_path, "keyword file from extract-keywords");
  predict->add_option("--extractor", extractor_path, "extractor checkpoint used to select keywords");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against reference names");
  evaluate->add_option("--pred", pred, "prediction file")->required();
  evaluate->add_option("--ref", ref, "dataset or graph file with the reference names")->required();
  evaluate->add_option("--report", report, "report file to write")->required();

  auto* run_all = app.add_subcommand("run-all", "Run every stage, reusing finished artifacts");
  ConfigOptions run_all_cfg(run_all);
  run_all->add_flag("--force", force, "rerun stages whose artifacts exist");
  run_all->add_option("--stage", stage, "run a single stage")
      ->check(CLI::IsMember(std::vector<std::string>(kStages.begin(), kStages.end())));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (*preprocess) {
    auto graphs = load_graphs(in);
    write_graphs(out, graphs);
    log_line("wrote " + std::to_string(graphs.size()) + " graphs to " + out);
  } else if (*stats) {
    const auto graphs = load_graphs(in);
    nlohmann::json j = {{"methods", graphs.size()}, {"all", stats_to_json(shared_token_stats(graphs))}};
    for (auto s : kSplits) {
      auto part = select_split(graphs, s);
      if (!part.empty()) j[std::string(s)] = stats_to_json(shared_token_stats(part));
    }
    std::cout << j.dump(2) << '\n';
  } else if (*vocab_cmd) {
    const auto v = build_vocab(train_or_all(load_graphs(in)), min_count);
    save_vocab(out, v);
    log_line("vocabulary of " + std::to_string(v.size()) + " entries written to " + out);
  } else if (*train_ex) {
    const auto cfg = train_ex_cfg.resolve();
    if (cfg.data.empty()) throw UsageError("train-extractor needs --data");
    const auto graphs = load_graphs(cfg.data);
    const auto train = select_split(graphs, "train"), valid = select_split(graphs, "valid");
    const auto v = build_vocab(train, cfg.min_count);
    auto model = make_extractor(cfg, v.size());
    auto opt = train_options(cfg, cfg.extractor_epochs, kExtractorShuffle);
    opt.log = log_line;
    train_extractor(model, train, valid, v, extractor_loss_config(cfg), opt);
    save_checkpoint(out, "extractor", cfg, v, model.params());
  } else if (*extract) {
    const auto source = parse_strategy(strategy);
    const auto graphs = load_graphs(in);
    std::optional<LoadedExtractor> ex;
    if (source == KeywordSource::Extractor) {
      if (model_path.empty()) throw UsageError("the extractor strategy needs --model");
      ex.emplace(load_extractor(model_path));
    }
    const auto corpus = train_or_all(graphs);
    std::vector<KeywordSet> sets;
    if (source == KeywordSource::Extractor)
      sets = compute_keywords(source, graphs, k, seed, &corpus, &ex->model, &ex->header.vocab);
    else
      sets = compute_keywords(source, graphs, k, seed, &corpus);
    save_keywords(out, sets);
  } else if (*train_gen) {
    const auto cfg = train_gen_cfg.resolve();
    if (cfg.data.empty()) throw UsageError("train-generator needs --data");
    const auto source = parse_strategy(cfg.keyword_strategy);
    const auto graphs = load_graphs(cfg.data);
    const auto train = select_split(graphs, "train"), valid = select_split(graphs, "valid");
    std::optional<LoadedExtractor> ex;
    Vocab v;
    if (!extractor_path.empty()) {
      ex.emplace(load_extractor(extractor_path));
      require_compatible(cfg, ex->header.config, extractor_path);
      v = ex->header.vocab;
    } else if (source == KeywordSource::Extractor) {
      throw UsageError("keyword strategy 'extractor' needs --extractor");
    } else {
      v = build_vocab(train, cfg.min_count);
    }
    auto keywords = [&](const std::vector<CodeGraph>& part, std::size_t split) {
      return compute_keywords(source, part, cfg.keywords_k, random_keyword_seed(cfg, split), &train,
                              ex ? &ex->model : nullptr, &v);
    };
    const auto train_kw = keywords(train, 0), valid_kw = keywords(valid, 1);
    auto model = make_generator(cfg, v.size());
    auto opt = train_options(cfg, cfg.generator_epochs, kGeneratorShuffle);
    opt.log = log_line;
    train_generator(model, pair_keywords(train, train_kw), pair_keywords(valid, valid_kw), v, opt);
    save_checkpoint(out, "generator", cfg, v, model.params());
  } else if (*predict) {
    auto gen = load_generator(model_path);
    const auto cfg = predict_cfg.resolve();
    if (predict_cfg.architecture_explicit()) require_compatible(cfg, gen.header.config, model_path);
    const auto graphs = load_graphs(in);
    std::vector<KeywordSet> sets;
    if (!keywords_path.empty()) {
      sets = align_keywords(load_keywords(keywords_path), graphs);
    } else if (!extractor_path.empty()) {
      auto ex = load_extractor(extractor_path);
      require_compatible(gen.header.config, ex.header.config, extractor_path);
      sets = extract_keywords(ex.model, graphs, ex.header.vocab, gen.header.config.keywords_k);
    } else {
      const auto source = parse_strategy(gen.header.config.keyword_strategy);
      if (source == KeywordSource::Extractor) throw UsageError("predict needs --keywords or --extractor");
      const auto corpus = train_or_all(graphs);
      sets = compute_keywords(source, graphs, gen.header.config.keywords_k,
                              random_keyword_seed(gen.header.config, 2), &corpus);
    }
    auto& m = gen.model;
    std::ofstream file(out);
    if (!file) throw DataError("cannot write '" + out + "'");
    for (std::size_t i = 0; i < graphs.size(); ++i)
      file << prediction_to_json(graphs[i].id, m.decode(graphs[i], sets[i].words, gen.header.vocab), sets[i].words)
                  .dump()
           << '\n';
  } else if (*evaluate) {
    const auto rep = evaluate_corpus(load_predictions(pred), load_graphs(ref));
    write_json_file(report, to_json(rep));
    const auto m = rep.overall.mean();
    std::cout << "rouge-1 " << m.r1.f1 << " rouge-2 " << m.r2.f1 << " rouge-l " << m.rl.f1 << " exact "
              << rep.overall.exact_match() << '\n';
  } else if (*run_all) {
    PipelineOptions opt;
    opt.force = force;
    if (!stage.empty()) opt.stage = stage;
    opt.log = log_line;
    const auto rep = run_pipeline(run_all_cfg.resolve(), opt);
    if (rep.contains("test")) std::cout << rep["test"]["overall"].dump() << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const kgmn::TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kAbort;
  } catch (const kgmn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
