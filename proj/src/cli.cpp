#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "elsa/error.hpp"
#include "elsa/pipeline.hpp"

#ifndef ELSA_DATA_DIR
#define ELSA_DATA_DIR "data"
#endif

namespace elsa::pipeline {

namespace {

namespace fs = std::filesystem;

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

// Where JSONL output goes: a file, or the CLI's stdout when path is empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) file_ = std::make_unique<std::ofstream>(open_out(path));
    stream_ = file_ ? file_.get() : &fallback;
  }
  std::ostream& operator*() { return *stream_; }
  void finish(const std::string& path) {
    stream_->flush();
    if (!*stream_) throw IoError("write failed for '" + (path.empty() ? std::string("stdout") : path) + "'");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

// Generic sentiment records: {"text" or "tokens", "label"}.
std::vector<tagger::SentenceExample> load_sentence_examples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<tagger::SentenceExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      tagger::SentenceExample ex;
      ex.tokens = j.contains("tokens") ? j.at("tokens").get<std::vector<std::string>>()
                                       : tokenize(j.at("text").get<std::string>());
      const auto label = parse_polarity(j.at("label").get<std::string>());
      if (!label) throw Error("unknown label");
      if (ex.tokens.empty()) throw Error("empty text");
      ex.label = *label;
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

tagger::TaggerConfig tagger_config(const std::string& path) {
  tagger::TaggerConfig c = path.empty() ? tagger::TaggerConfig{} : tagger::tagger_config_from_json(read_json_file(path));
  c.validate();
  return c;
}

cnn::CnnConfig cnn_config(const std::string& path) {
  cnn::CnnConfig c = path.empty() ? cnn::CnnConfig{} : cnn::cnn_config_from_json(read_json_file(path));
  c.validate();
  return c;
}

void write_log(const nn::TrainingLog& log, std::ostream& out) {
  for (const auto& e : log.epochs)
    out << "epoch " << e.epoch << " train_loss " << e.train_loss << " validation_loss " << e.validation_loss
        << " metric " << e.validation_metric << '\n';
  out << "best_epoch " << log.best_epoch << (log.early_stopped ? " (early stop)" : "") << '\n';
}

// Paths in a predict config are relative to the config file.
struct PredictConfig {
  std::string gazetteer = std::string(ELSA_DATA_DIR) + "/gazetteer.tsv";
  std::string entity_tagger;
  std::string tagger;
  std::string cnn;
  std::string lexicon = std::string(ELSA_DATA_DIR) + "/lexicon.tsv";
  std::string modifiers = std::string(ELSA_DATA_DIR) + "/modifiers.json";
  int ig_steps = 50;
  std::size_t max_gap = heuristics::kDefaultMaxGap;
};

PredictConfig predict_config(const std::string& path) {
  PredictConfig c;
  if (path.empty()) return c;
  const Json j = read_json_file(path);
  if (!j.is_object()) throw Error("config '" + path + "' must be an object");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const char* key, std::string& dst) {
    if (!j.contains(key)) return;
    fs::path p = j.at(key).get<std::string>();
    dst = (p.is_relative() ? base / p : p).string();
  };
  resolve("gazetteer", c.gazetteer);
  resolve("entity_tagger", c.entity_tagger);
  resolve("tagger", c.tagger);
  resolve("cnn", c.cnn);
  resolve("lexicon", c.lexicon);
  resolve("modifiers", c.modifiers);
  c.ig_steps = j.value("ig_steps", c.ig_steps);
  c.max_gap = j.value("max_gap", c.max_gap);
  return c;
}

std::unique_ptr<ner::EntityDetector> make_detector(const PredictConfig& c) {
  if (!c.entity_tagger.empty())
    return std::make_unique<tagger::TaggerEntityDetector>(tagger::TaggerModel::load(c.entity_tagger));
  return std::make_unique<ner::Gazetteer>(ner::Gazetteer::load(c.gazetteer));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entity-level sentiment analysis toolkit", "elsa"};
  app.require_subcommand(1);

  // sample
  std::string s_in, s_out, s_gaz = std::string(ELSA_DATA_DIR) + "/gazetteer.tsv", s_cnn;
  std::size_t s_polar = 0, s_neutral = 0;
  std::uint64_t s_seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw a balanced polar/neutral annotation sample from a pool");
  sample->add_option("--in", s_in, "Utterance pool (JSONL)")->required();
  sample->add_option("--out", s_out, "Output JSONL")->required();
  sample->add_option("--gazetteer", s_gaz, "Entity gazetteer");
  sample->add_option("--cnn", s_cnn, "Sentence classifier checkpoint")->required();
  sample->add_option("--polar", s_polar, "Polar utterances to draw")->required();
  sample->add_option("--neutral", s_neutral, "Neutral utterances to draw")->required();
  sample->add_option("--seed", s_seed, "Sampling seed");

  // synth
  std::string y_out, y_split = "train", y_prefix = "syn";
  std::size_t y_n = 2000;
  std::uint64_t y_seed = 7;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  synth->add_option("--out", y_out, "Output JSONL")->required();
  synth->add_option("-n,--count", y_n, "Number of template draws");
  synth->add_option("--seed", y_seed, "Generation seed");
  synth->add_option("--split", y_split, "Split name")->check(CLI::IsMember({"train", "dev", "test"}));
  synth->add_option("--id-prefix", y_prefix, "Utterance id prefix");

  // train-generic
  std::string g_train, g_val, g_out, g_config;
  std::vector<std::string> g_vocab;
  auto* train_generic = app.add_subcommand("train-generic", "Train encoder and sentence head on generic sentiment");
  train_generic->add_option("--train", g_train, "JSONL of {text|tokens, label}")->required();
  train_generic->add_option("--validation", g_val, "Validation JSONL");
  train_generic->add_option("--vocab-corpus", g_vocab, "Extra corpora (annotated JSONL) for the vocabulary");
  train_generic->add_option("--config", g_config, "Tagger config JSON");
  train_generic->add_option("--out", g_out, "Checkpoint directory")->required();

  // train-elsa
  std::string e_train, e_dev, e_init, e_out, e_config;
  auto* train_elsa = app.add_subcommand("train-elsa", "Fine-tune the opinion tagger");
  train_elsa->add_option("--train", e_train, "Annotated training JSONL")->required();
  train_elsa->add_option("--dev", e_dev, "Annotated validation JSONL");
  train_elsa->add_option("--init", e_init, "Checkpoint from train-generic");
  train_elsa->add_option("--config", e_config, "Tagger config JSON");
  train_elsa->add_option("--out", e_out, "Checkpoint directory")->required();

  // train-ner
  std::string n_train, n_dev, n_out, n_config;
  auto* train_ner = app.add_subcommand("train-ner", "Train the BIO entity tagger");
  train_ner->add_option("--train", n_train, "Annotated training JSONL")->required();
  train_ner->add_option("--dev", n_dev, "Annotated validation JSONL");
  train_ner->add_option("--config", n_config, "Tagger config JSON");
  train_ner->add_option("--out", n_out, "Checkpoint directory")->required();

  // train-cnn
  std::string c_train, c_dev, c_out, c_config, c_emb;
  auto* train_cnn = app.add_subcommand("train-cnn", "Train the utterance sentiment CNN");
  train_cnn->add_option("--train", c_train, "Annotated training JSONL")->required();
  train_cnn->add_option("--dev", c_dev, "Annotated validation JSONL");
  train_cnn->add_option("--config", c_config, "CNN config JSON");
  train_cnn->add_option("--embeddings", c_emb, "Pretrained word vectors");
  train_cnn->add_option("--out", c_out, "Checkpoint directory")->required();

  // predict
  std::string p_path, p_in, p_out, p_config, p_tagger, p_cnn;
  std::optional<int> p_ig_steps;
  std::optional<std::size_t> p_max_gap;
  auto* predict = app.add_subcommand("predict", "Entity sentiment records for every detected entity");
  predict->add_option("--path", p_path, "Prediction path")->required()->check(CLI::IsMember({"tagger", "cnn"}));
  predict->add_option("--in", p_in, "Utterance or annotated JSONL")->required();
  predict->add_option("--out", p_out, "Output JSONL (stdout when omitted)");
  predict->add_option("--config", p_config, "Pipeline config JSON");
  predict->add_option("--tagger", p_tagger, "Tagger checkpoint (overrides config)");
  predict->add_option("--cnn", p_cnn, "CNN checkpoint (overrides config)");
  predict->add_option("--ig-steps", p_ig_steps, "Integrated Gradients steps")->check(CLI::PositiveNumber);
  predict->add_option("--max-gap", p_max_gap, "Modifier tokens allowed between pattern slots");

  // evaluate
  std::string v_gold, v_pred, v_match = "exact";
  auto* evaluate = app.add_subcommand("evaluate", "Polarity and opinion-span metrics");
  evaluate->add_option("--gold", v_gold, "Annotated JSONL")->required();
  evaluate->add_option("--pred", v_pred, "Prediction records JSONL")->required();
  evaluate->add_option("--match", v_match, "Span matching")->check(CLI::IsMember({"exact", "overlap"}));

  // robustness
  std::string r_gold, r_pred, r_match = "exact";
  bool r_table = false;
  auto* robustness = app.add_subcommand("robustness", "Metrics per token-count and entity-count slice");
  robustness->add_option("--gold", r_gold, "Annotated JSONL")->required();
  robustness->add_option("--pred", r_pred, "Prediction records JSONL")->required();
  robustness->add_option("--match", r_match, "Span matching")->check(CLI::IsMember({"exact", "overlap"}));
  robustness->add_flag("--table", r_table, "Plain-text table instead of JSON");

  // aggregate
  std::string a_in, a_out, a_gran = "day";
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Roll records up per entity and period");
  aggregate_cmd->add_option("--in", a_in, "Prediction records JSONL")->required();
  aggregate_cmd->add_option("--out", a_out, "Output JSONL (stdout when omitted)");
  aggregate_cmd->add_option("--granularity", a_gran, "Period")->check(CLI::IsMember({"day", "week", "month"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*sample) {
      const auto pool = load_utterances(s_in);
      const auto gaz = ner::Gazetteer::load(s_gaz);
      const auto model = cnn::TextCnn::load(s_cnn);
      const auto picked = sample_balanced(
          pool, [&](const Utterance& u) { return ner::detect_entities(u, gaz).size(); },
          [&](const Utterance& u) { return cnn::predict_class(model, u.tokens); }, s_polar, s_neutral, s_seed);
      save_utterances(picked, s_out);
      out << picked.size() << " utterances written to " << s_out << '\n';
    } else if (*synth) {
      auto opts = default_synthetic_options();
      opts.id_prefix = y_prefix;
      opts.split = y_split == "train" ? SplitName::train : y_split == "dev" ? SplitName::dev : SplitName::test;
      const auto split = generate_synthetic_corpus(default_templates(), default_entities(),
                                                   default_opinion_lexicon(), y_n, y_seed, opts);
      save_dataset(split, y_out);
      out << split.examples.size() << " examples written to " << y_out << '\n';
    } else if (*train_generic) {
      const auto cfg = tagger_config(g_config);
      const auto train = load_sentence_examples(g_train);
      const auto val = g_val.empty() ? std::vector<tagger::SentenceExample>{} : load_sentence_examples(g_val);
      std::vector<std::vector<std::string>> corpus;
      for (const auto& ex : train) corpus.push_back(ex.tokens);
      for (const auto& path : g_vocab)
        for (const auto& ex : load_dataset(path).examples) corpus.push_back(ex.utterance.tokens);
      tagger::TaggerModel model(corpus, cfg);
      write_log(tagger::train_generic_sentiment(model, train, val, cfg), out);
      model.save(g_out);
    } else if (*train_elsa) {
      const auto cfg = tagger_config(e_config);
      const auto train = load_dataset(e_train, SplitName::train).examples;
      const auto dev = e_dev.empty() ? std::vector<ElsaExample>{} : load_dataset(e_dev, SplitName::dev).examples;
      tagger::TaggerModel model;
      if (!e_init.empty()) {
        model = tagger::TaggerModel::load(e_init);
      } else {
        std::vector<std::vector<std::string>> corpus;
        for (const auto& ex : train) corpus.push_back(ex.utterance.tokens);
        model = tagger::TaggerModel(corpus, cfg);
      }
      write_log(tagger::train_elsa(model, tagger::make_elsa_items(train), tagger::make_elsa_items(dev), cfg), out);
      model.save(e_out);
    } else if (*train_ner) {
      const auto cfg = tagger_config(n_config);
      const auto train = load_dataset(n_train, SplitName::train).examples;
      const auto dev = n_dev.empty() ? std::vector<ElsaExample>{} : load_dataset(n_dev, SplitName::dev).examples;
      tagger::train_entity_tagger(train, dev, cfg).model().save(n_out);
      out << "entity tagger written to " << n_out << '\n';
    } else if (*train_cnn) {
      const auto cfg = cnn_config(c_config);
      const auto train = load_dataset(c_train, SplitName::train).examples;
      const auto dev = c_dev.empty() ? std::vector<ElsaExample>{} : load_dataset(c_dev, SplitName::dev).examples;
      std::optional<cnn::EmbeddingTable> emb;
      if (!c_emb.empty()) emb = cnn::load_embeddings(c_emb);
      auto result = cnn::train_cnn(cnn::utterance_sentiment_items(train), cnn::utterance_sentiment_items(dev), cfg,
                                   emb ? &*emb : nullptr);
      write_log(result.log, out);
      result.model.save(c_out);
    } else if (*predict) {
      auto cfg = predict_config(p_config);
      if (!p_tagger.empty()) cfg.tagger = p_tagger;
      if (!p_cnn.empty()) cfg.cnn = p_cnn;
      if (p_ig_steps) cfg.ig_steps = *p_ig_steps;
      if (p_max_gap) cfg.max_gap = *p_max_gap;
      const auto utterances = load_utterances(p_in);
      const auto detector = make_detector(cfg);
      Sink sink(p_out, out);
      if (p_path == "tagger") {
        if (cfg.tagger.empty()) throw ModelNotLoaded("no tagger checkpoint configured");
        const auto model = tagger::TaggerModel::load(cfg.tagger);
        for (const auto& u : utterances)
          for (const auto& r : predict_tagger_path(u, *detector, model)) *sink << to_json(r).dump() << '\n';
      } else {
        if (cfg.cnn.empty()) throw ModelNotLoaded("no cnn checkpoint configured");
        const auto model = cnn::TextCnn::load(cfg.cnn);
        const auto lexicon = heuristics::load_lexicon(cfg.lexicon);
        const heuristics::ReferencePosTagger pos(lexicon);
        CnnPathOptions opts;
        opts.modifiers = heuristics::load_modifier_config(cfg.modifiers);
        opts.ig_steps = cfg.ig_steps;
        opts.max_gap = cfg.max_gap;
        const CnnPathModels models{model, pos, lexicon};
        for (const auto& u : utterances)
          for (const auto& r : predict_cnn_path(u, *detector, models, opts)) *sink << to_json(r).dump() << '\n';
      }
      sink.finish(p_out);
    } else if (*evaluate) {
      const auto gold = load_dataset(v_gold).examples;
      const auto preds = join_predictions(gold, load_records(v_pred));
      const auto match = v_match == "exact" ? eval::SpanMatch::exact : eval::SpanMatch::overlap;
      out << eval::to_json(eval::metrics_report(gold, preds, match)).dump(2) << '\n';
    } else if (*robustness) {
      const auto gold = load_dataset(r_gold).examples;
      const auto preds = join_predictions(gold, load_records(r_pred));
      const auto match = r_match == "exact" ? eval::SpanMatch::exact : eval::SpanMatch::overlap;
      const auto report = eval::robustness_report(gold, preds, eval::default_slices(), match);
      if (r_table)
        out << eval::format_table(report);
      else
        out << eval::to_json(report).dump(2) << '\n';
    } else if (*aggregate_cmd) {
      const auto insights = aggregate(load_records(a_in), *parse_granularity(a_gran));
      Sink sink(a_out, out);
      for (const auto& a : insights) *sink << to_json(a).dump() << '\n';
      sink.finish(a_out);
    }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const InsufficientCandidates& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace elsa::pipeline
