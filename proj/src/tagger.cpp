#include "elsa/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "elsa/error.hpp"
#include "elsa/eval.hpp"
#include "elsa/nn/loss.hpp"
#include "elsa/nn/optim.hpp"
#include "elsa/nn/train.hpp"

namespace elsa::tagger {

namespace fs = std::filesystem;
using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;

std::optional<Tag> TagVocab::parse(std::string_view s) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == s) return static_cast<Tag>(i);
  }
  return std::nullopt;
}

// --- config -----------------------------------------------------------------

void TaggerConfig::validate() const {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (early_stopping_patience < 1) throw Error("early_stopping_patience must be >= 1");
  if (max_epochs < 1) throw Error("max_epochs must be >= 1");
  if (weight_decay < 0.0) throw Error("weight_decay must be >= 0");
  const auto& e = encoder_spec;
  if (e.layers < 0 || e.d_model < 1 || e.heads < 1 || e.ff_dim < 1 || e.max_positions < 2)
    throw Error("invalid encoder_spec");
  if (e.d_model % e.heads != 0) throw Error("encoder_spec.d_model must be divisible by heads");
}

Json to_json(const TaggerConfig& c) {
  Json j;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["early_stopping_patience"] = c.early_stopping_patience;
  j["encoder_spec"] = {{"layers", c.encoder_spec.layers},
                       {"d_model", c.encoder_spec.d_model},
                       {"heads", c.encoder_spec.heads},
                       {"ff_dim", c.encoder_spec.ff_dim},
                       {"max_positions", c.encoder_spec.max_positions}};
  j["seed"] = c.seed;
  j["max_epochs"] = c.max_epochs;
  j["weight_decay"] = c.weight_decay;
  j["min_subword_count"] = c.min_subword_count;
  return j;
}

TaggerConfig tagger_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error("tagger config must be an object");
  TaggerConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.early_stopping_patience = j.value("early_stopping_patience", c.early_stopping_patience);
    c.seed = j.value("seed", c.seed);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.min_subword_count = j.value("min_subword_count", c.min_subword_count);
    if (j.contains("encoder_spec")) {
      const Json& e = j.at("encoder_spec");
      auto& s = c.encoder_spec;
      s.layers = e.value("layers", s.layers);
      s.d_model = e.value("d_model", s.d_model);
      s.heads = e.value("heads", s.heads);
      s.ff_dim = e.value("ff_dim", s.ff_dim);
      s.max_positions = e.value("max_positions", s.max_positions);
    }
  } catch (const Json::exception& e) {
    throw Error(std::string("bad tagger config: ") + e.what());
  }
  c.validate();
  return c;
}

// --- subword vocabulary -----------------------------------------------------------

SubwordVocab::SubwordVocab() {
  for (const char* s : {"[PAD]", "[UNK]", "[CLS]"}) add(s);
  add(std::string(kMarkerToken));
}

void SubwordVocab::add(const std::string& piece) {
  if (index_.count(piece)) return;
  index_.emplace(piece, static_cast<int>(pieces_.size()));
  pieces_.push_back(piece);
}

SubwordVocab SubwordVocab::build(const std::vector<std::vector<std::string>>& sentences,
                                 int min_count) {
  std::map<std::string, int> counts;
  std::set<std::string> chars;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      if (w == kMarkerToken) continue;
      std::string lw = to_lower(w);
      ++counts[lw];
      for (char c : lw) chars.insert(std::string(1, c));
    }
  }
  SubwordVocab v;
  for (const auto& c : chars) {
    v.add(c);
    v.add("##" + c);
  }
  for (const auto& [w, n] : counts) {
    if (n >= min_count) v.add(w);
  }
  return v;
}

std::vector<int> SubwordVocab::encode_word(const std::string& word) const {
  if (word == kMarkerToken) return {kMarker};
  const std::string w = to_lower(word);
  std::vector<int> out;
  std::size_t start = 0;
  while (start < w.size()) {
    int found = -1;
    std::size_t end = w.size();
    for (; end > start; --end) {
      std::string piece = w.substr(start, end - start);
      if (start > 0) piece = "##" + piece;
      auto it = index_.find(piece);
      if (it != index_.end()) {
        found = it->second;
        break;
      }
    }
    if (found < 0) return {kUnk};
    out.push_back(found);
    start = end;
  }
  if (out.empty()) out.push_back(kUnk);
  return out;
}

// --- layers -----------------------------------------------------------------------

namespace {

Linear make_linear(const std::string& name, int in, int out, std::mt19937_64& rng) {
  return Linear{Parameter(name + ".weight", nn::xavier_uniform(in, out, rng)),
                Parameter(name + ".bias", Matrix::Zero(1, out))};
}

Parameter ones(const std::string& name, int n) { return Parameter(name, Matrix::Ones(1, n)); }
Parameter zeros(const std::string& name, int n) { return Parameter(name, Matrix::Zero(1, n)); }

}  // namespace

Var Linear::apply(Tape& t, Var x) const {
  return nn::add_row(t, nn::matmul(t, x, t.parameter(weight)), t.parameter(bias));
}

TransformerEncoder::TransformerEncoder(int vocab_size, const EncoderSpec& spec, std::mt19937_64& rng)
    : spec_(spec) {
  const int d = spec.d_model;
  token_embedding_ = Parameter("encoder.token_embedding", nn::normal_init(vocab_size, d, 0.02, rng));
  position_embedding_ =
      Parameter("encoder.position_embedding", nn::normal_init(spec.max_positions, d, 0.02, rng));
  ln_gamma_ = ones("encoder.ln.gamma", d);
  ln_beta_ = zeros("encoder.ln.beta", d);
  for (int l = 0; l < spec.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    Layer layer{make_linear(p + ".q", d, d, rng),
                make_linear(p + ".k", d, d, rng),
                make_linear(p + ".v", d, d, rng),
                make_linear(p + ".o", d, d, rng),
                make_linear(p + ".ff1", d, spec.ff_dim, rng),
                make_linear(p + ".ff2", spec.ff_dim, d, rng),
                ones(p + ".ln1.gamma", d),
                zeros(p + ".ln1.beta", d),
                ones(p + ".ln2.gamma", d),
                zeros(p + ".ln2.beta", d)};
    layers_.push_back(std::move(layer));
  }
}

Var TransformerEncoder::forward(Tape& t, std::span<const int> ids) const {
  const int n = static_cast<int>(ids.size());
  if (n < 1) throw Error("empty encoder input");
  if (n > spec_.max_positions)
    throw Error("sequence of " + std::to_string(n) + " pieces exceeds max_positions " +
                std::to_string(spec_.max_positions));
  std::vector<int> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  Var h = nn::add(t, nn::gather_rows(t, t.parameter(token_embedding_), ids),
                  nn::gather_rows(t, t.parameter(position_embedding_), positions));
  h = nn::layer_norm(t, h, t.parameter(ln_gamma_), t.parameter(ln_beta_));

  const int dh = spec_.d_model / spec_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const Layer& layer : layers_) {
    Var q = layer.q.apply(t, h);
    Var k = layer.k.apply(t, h);
    Var v = layer.v.apply(t, h);
    std::vector<Var> heads;
    heads.reserve(spec_.heads);
    for (int i = 0; i < spec_.heads; ++i) {
      Var qh = nn::slice_cols(t, q, i * dh, dh);
      Var kh = nn::slice_cols(t, k, i * dh, dh);
      Var vh = nn::slice_cols(t, v, i * dh, dh);
      Var a = nn::softmax_rows(t, nn::scale(t, nn::matmul_nt(t, qh, kh), inv_sqrt));
      heads.push_back(nn::matmul(t, a, vh));
    }
    Var att = layer.o.apply(t, heads.size() == 1 ? heads[0] : nn::concat_cols(t, heads));
    h = nn::layer_norm(t, nn::add(t, h, att), t.parameter(layer.ln1_gamma),
                       t.parameter(layer.ln1_beta));
    Var ff = layer.ff2.apply(t, nn::gelu(t, layer.ff1.apply(t, h)));
    h = nn::layer_norm(t, nn::add(t, h, ff), t.parameter(layer.ln2_gamma),
                       t.parameter(layer.ln2_beta));
  }
  return h;
}

std::vector<Parameter*> TransformerEncoder::parameters() {
  std::vector<Parameter*> out = {&token_embedding_, &position_embedding_, &ln_gamma_, &ln_beta_};
  for (Layer& l : layers_) {
    for (Linear* lin : {&l.q, &l.k, &l.v, &l.o, &l.ff1, &l.ff2}) {
      out.push_back(&lin->weight);
      out.push_back(&lin->bias);
    }
    for (Parameter* p : {&l.ln1_gamma, &l.ln1_beta, &l.ln2_gamma, &l.ln2_beta}) out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> TransformerEncoder::parameters() const {
  auto mut = const_cast<TransformerEncoder*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

// --- model ------------------------------------------------------------------------

TaggerModel::TaggerModel(const std::vector<std::vector<std::string>>& vocab_corpus,
                         const TaggerConfig& config)
    : config_(config) {
  config_.validate();
  vocab_ = SubwordVocab::build(vocab_corpus, config_.min_subword_count);
  std::mt19937_64 rng(config_.seed);
  encoder_ = TransformerEncoder(vocab_.size(), config_.encoder_spec, rng);
  sentence_head_ = make_linear("sentence_head", config_.encoder_spec.d_model, 3, rng);
}

void TaggerModel::attach_token_head(std::vector<std::string> labels) {
  if (labels.size() < 2) throw Error("token head needs at least two labels");
  std::mt19937_64 rng(config_.seed ^ (0x9e3779b97f4a7c15ULL + init_counter_++));
  token_head_ = make_linear("token_head", config_.encoder_spec.d_model,
                            static_cast<int>(labels.size()), rng);
  token_labels_ = std::move(labels);
}

TaggerModel::Encoded TaggerModel::encode(const std::vector<std::string>& words) const {
  Encoded enc;
  enc.ids.push_back(SubwordVocab::kCls);
  for (const auto& w : words) {
    enc.first_piece.push_back(static_cast<int>(enc.ids.size()));
    for (int id : vocab_.encode_word(w)) enc.ids.push_back(id);
  }
  return enc;
}

Var TaggerModel::token_logits(Tape& t, const Encoded& enc) const {
  if (!token_head_) throw ModelNotLoaded("tagger has no token head");
  if (enc.first_piece.empty()) throw Error("empty input");
  Var h = encoder_.forward(t, enc.ids);
  return token_head_->apply(t, nn::gather_rows(t, h, enc.first_piece));
}

Var TaggerModel::sentence_logits(Tape& t, const Encoded& enc) const {
  if (!sentence_head_) throw ModelNotLoaded("tagger has no sentence head");
  Var h = encoder_.forward(t, enc.ids);
  const int cls = 0;
  return sentence_head_->apply(t, nn::gather_rows(t, h, std::span<const int>(&cls, 1)));
}

namespace {

Matrix softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto e = (z.row(r).array() - z.row(r).maxCoeff()).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace

Matrix TaggerModel::token_probabilities(const std::vector<std::string>& words) const {
  Tape t(false);
  return softmax(t.value(token_logits(t, encode(words))));
}

std::array<double, 3> TaggerModel::sentence_probabilities(const std::vector<std::string>& words) const {
  Tape t(false);
  Matrix p = softmax(t.value(sentence_logits(t, encode(words))));
  return {p(0, 0), p(0, 1), p(0, 2)};
}

std::vector<Parameter*> TaggerModel::parameters() {
  auto out = encoder_.parameters();
  for (auto* head : {&sentence_head_, &token_head_}) {
    if (*head) {
      out.push_back(&(*head)->weight);
      out.push_back(&(*head)->bias);
    }
  }
  return out;
}

std::vector<Parameter*> TaggerModel::sentence_task_parameters() {
  if (!sentence_head_) throw ModelNotLoaded("tagger has no sentence head");
  auto out = encoder_.parameters();
  out.push_back(&sentence_head_->weight);
  out.push_back(&sentence_head_->bias);
  return out;
}

std::vector<Parameter*> TaggerModel::token_task_parameters() {
  if (!token_head_) throw ModelNotLoaded("tagger has no token head");
  auto out = encoder_.parameters();
  out.push_back(&token_head_->weight);
  out.push_back(&token_head_->bias);
  return out;
}

std::vector<const Parameter*> TaggerModel::encoder_parameters() const { return encoder_.parameters(); }

std::vector<const Parameter*> TaggerModel::head_parameters() const {
  std::vector<const Parameter*> out;
  for (const auto* head : {&sentence_head_, &token_head_}) {
    if (*head) {
      out.push_back(&(*head)->weight);
      out.push_back(&(*head)->bias);
    }
  }
  return out;
}

// Checkpoint layout: config.json, vocab.txt, tags.json, encoder.bin, heads.bin.
void TaggerModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  Json cfg;
  cfg["tagger_config"] = to_json(config_);
  cfg["vocab_size"] = vocab_.size();
  cfg["sentence_head"] = has_sentence_head();
  cfg["token_head"] = has_token_head();
  {
    std::ofstream out(dir / "config.json", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
    out << cfg.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "vocab.txt", std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write '" + (dir / "vocab.txt").string() + "'");
    for (const auto& p : vocab_.pieces()) out << p << '\n';
  }
  {
    std::ofstream out(dir / "tags.json", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / "tags.json").string() + "'");
    out << Json(token_labels_).dump() << '\n';
  }
  nn::save_parameters(dir / "encoder.bin", encoder_.parameters());
  nn::save_parameters(dir / "heads.bin", head_parameters());
}

TaggerModel TaggerModel::load(const fs::path& dir) {
  auto read_json = [&](const std::string& name) {
    std::ifstream in(dir / name);
    if (!in) throw IoError("cannot open '" + (dir / name).string() + "'");
    try {
      return Json::parse(in);
    } catch (const Json::exception& e) {
      throw ParseError((dir / name).string(), 0, e.what());
    }
  };
  Json cfg = read_json("config.json");
  Json tags = read_json("tags.json");

  TaggerModel m;
  m.config_ = tagger_config_from_json(cfg.at("tagger_config"));
  std::ifstream vin(dir / "vocab.txt", std::ios::binary);
  if (!vin) throw IoError("cannot open '" + (dir / "vocab.txt").string() + "'");
  SubwordVocab vocab;
  std::string line;
  std::size_t n = 0;
  while (std::getline(vin, line)) {
    if (n++ < 4) continue;  // reserved pieces are built in
    vocab.add(line);
  }
  if (vocab.size() != cfg.at("vocab_size").get<int>())
    throw IoError("vocabulary size mismatch in '" + dir.string() + "'");
  m.vocab_ = std::move(vocab);

  std::mt19937_64 rng(m.config_.seed);
  m.encoder_ = TransformerEncoder(m.vocab_.size(), m.config_.encoder_spec, rng);
  const int d = m.config_.encoder_spec.d_model;
  if (cfg.value("sentence_head", false)) m.sentence_head_ = make_linear("sentence_head", d, 3, rng);
  if (cfg.value("token_head", false)) {
    auto labels = tags.get<std::vector<std::string>>();
    m.token_head_ = make_linear("token_head", d, static_cast<int>(labels.size()), rng);
    m.token_labels_ = std::move(labels);
  }
  nn::load_parameters(dir / "encoder.bin", m.encoder_.parameters());
  std::vector<Parameter*> heads;
  for (auto* head : {&m.sentence_head_, &m.token_head_}) {
    if (*head) {
      heads.push_back(&(*head)->weight);
      heads.push_back(&(*head)->bias);
    }
  }
  nn::load_parameters(dir / "heads.bin", heads);
  return m;
}

// --- training loop ------------------------------------------------------------------

namespace {

nn::FitOptions fit_options(const TaggerConfig& c) {
  c.validate();
  return {c.batch_size, c.learning_rate, c.weight_decay, c.early_stopping_patience, c.max_epochs, c.seed};
}

}  // namespace

TrainingLog train_generic_sentiment(TaggerModel& model, const std::vector<SentenceExample>& train,
                                    const std::vector<SentenceExample>& validation,
                                    const TaggerConfig& config) {
  if (train.empty()) throw Error("empty training dataset");
  std::vector<TaggerModel::Encoded> tr, va;
  std::vector<int> tr_gold, va_gold;
  for (const auto& s : train) {
    if (s.tokens.empty()) throw Error("training sentence without tokens");
    tr.push_back(model.encode(s.tokens));
    tr_gold.push_back(polarity_index(s.label));
  }
  const auto& val_src = validation.empty() ? train : validation;
  for (const auto& s : val_src) {
    va.push_back(model.encode(s.tokens));
    va_gold.push_back(polarity_index(s.label));
  }

  auto loss_of = [&](std::size_t i, Tape& t) {
    return nn::cross_entropy(t, model.sentence_logits(t, tr[i]), std::span<const int>(&tr_gold[i], 1));
  };
  auto weight_of = [](const std::vector<std::size_t>& idx) {
    return std::vector<double>(idx.size(), 1.0 / static_cast<double>(idx.size()));
  };
  auto evaluate = [&] {
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      Tape t(false);
      sum += t.value(nn::cross_entropy(t, model.sentence_logits(t, va[i]),
                                       std::span<const int>(&va_gold[i], 1)))(0, 0);
    }
    const double loss = sum / static_cast<double>(va.size());
    return nn::Evaluation{loss, -loss};
  };
  return nn::fit(model.sentence_task_parameters(), tr.size(), fit_options(config), loss_of, weight_of, evaluate);
}

namespace {

struct PreparedItem {
  TaggerModel::Encoded enc;
  std::vector<int> rows;  // labeled word indices
  std::vector<int> gold;  // labels for rows
};

PreparedItem prepare(const TaggerModel& model, const TokenTrainingItem& item) {
  if (item.words.size() != item.gold.size())
    throw Error("label/length mismatch: " + std::to_string(item.words.size()) + " words, " +
                std::to_string(item.gold.size()) + " labels");
  PreparedItem p;
  p.enc = model.encode(item.words);
  const int n_labels = static_cast<int>(model.token_labels().size());
  for (std::size_t i = 0; i < item.gold.size(); ++i) {
    if (item.gold[i] < 0) continue;
    if (item.gold[i] >= n_labels) throw Error("gold label out of range");
    p.rows.push_back(static_cast<int>(i));
    p.gold.push_back(item.gold[i]);
  }
  return p;
}

Var item_loss(Tape& t, const TaggerModel& model, const PreparedItem& p) {
  Var logits = model.token_logits(t, p.enc);
  return nn::cross_entropy(t, nn::gather_rows(t, logits, p.rows), p.gold);
}

double mean_token_loss(const TaggerModel& model, const std::vector<PreparedItem>& items) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : items) {
    if (p.rows.empty()) continue;
    Tape t(false);
    sum += t.value(item_loss(t, model, p))(0, 0) * static_cast<double>(p.rows.size());
    n += p.rows.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

TokenTrainingItem to_training_item(const ElsaItem& item) {
  const auto& m = item.marked;
  if (m.marker_positions.size() != 1) throw Error("unmarked input '" + m.id + "'");
  if (item.gold.size() != m.word_count())
    throw Error("label/length mismatch for '" + m.id + "'");
  TokenTrainingItem out;
  out.words = m.tokens;
  out.gold.assign(m.tokens.size(), -1);
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    if (m.offset_map[i] >= 0) out.gold[i] = item.gold[static_cast<std::size_t>(m.offset_map[i])];
  }
  return out;
}

}  // namespace

TrainingLog train_token_classifier(TaggerModel& model, const std::vector<TokenTrainingItem>& train,
                                   const std::vector<TokenTrainingItem>& validation,
                                   const TaggerConfig& config,
                                   const std::function<double(const TaggerModel&)>& validation_metric) {
  if (train.empty()) throw Error("empty training dataset");
  if (!model.has_token_head()) throw ModelNotLoaded("tagger has no token head");
  std::vector<PreparedItem> tr, va;
  for (const auto& it : train) tr.push_back(prepare(model, it));
  for (const auto& it : validation.empty() ? train : validation) va.push_back(prepare(model, it));

  auto loss_of = [&](std::size_t i, Tape& t) { return item_loss(t, model, tr[i]); };
  auto weight_of = [&](const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (auto i : idx) total += static_cast<double>(tr[i].rows.size());
    std::vector<double> w;
    for (auto i : idx) w.push_back(total > 0 ? static_cast<double>(tr[i].rows.size()) / total : 0.0);
    return w;
  };
  auto evaluate = [&] {
    const double loss = mean_token_loss(model, va);
    return nn::Evaluation{loss, validation_metric ? validation_metric(model) : -loss};
  };
  return nn::fit(model.token_task_parameters(), tr.size(), fit_options(config), loss_of, weight_of, evaluate);
}

ElsaItem make_elsa_item(const ElsaExample& example) {
  ElsaItem item;
  item.marked = ner::insert_ne_markers(example.utterance, example.target_entity());
  item.gold.assign(example.utterance.tokens.size(), static_cast<int>(Tag::O));
  for (const auto& o : example.opinions) {
    const int tag = static_cast<int>(o.polarity == OpinionPolarity::pos ? Tag::POS : Tag::NEG);
    for (int i = o.span.start; i < o.span.end; ++i) item.gold.at(static_cast<std::size_t>(i)) = tag;
  }
  item.polarity = example.polarity;
  return item;
}

std::vector<ElsaItem> make_elsa_items(const std::vector<ElsaExample>& examples) {
  std::vector<ElsaItem> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(make_elsa_item(e));
  return out;
}

namespace {

std::vector<std::string> tag_labels() { return {TagVocab::labels.begin(), TagVocab::labels.end()}; }

double derived_weighted_f1(const TaggerModel& model, const std::vector<ElsaItem>& items) {
  std::vector<Polarity> gold, pred;
  for (const auto& it : items) {
    gold.push_back(it.polarity);
    pred.push_back(derive_entity_sentiment(predict_tags(model, it.marked), it.marked.target).polarity);
  }
  return eval::polarity_report(gold, pred).weighted.f1;
}

}  // namespace

TrainingLog train_elsa(TaggerModel& model, const std::vector<ElsaItem>& train,
                       const std::vector<ElsaItem>& validation, const TaggerConfig& config) {
  if (train.empty()) throw Error("empty training dataset");
  if (!model.has_token_head() || model.token_labels() != tag_labels()) model.attach_token_head(tag_labels());
  std::vector<TokenTrainingItem> tr, va;
  for (const auto& it : train) tr.push_back(to_training_item(it));
  for (const auto& it : validation) va.push_back(to_training_item(it));
  const auto& monitored = validation.empty() ? train : validation;
  return train_token_classifier(model, tr, va, config, [&](const TaggerModel& m) {
    return derived_weighted_f1(m, monitored);
  });
}

double token_loss(const TaggerModel& model, const std::vector<ElsaItem>& items) {
  std::vector<PreparedItem> prepared;
  for (const auto& it : items) prepared.push_back(prepare(model, to_training_item(it)));
  return mean_token_loss(model, prepared);
}

// --- inference ----------------------------------------------------------------------

TagSequence predict_tags(const TaggerModel& model, const ner::MarkedUtterance& marked) {
  if (!model.has_token_head() || model.token_labels() != tag_labels())
    throw ModelNotLoaded("tagger has no trained O/POS/NEG head");
  if (marked.marker_positions.size() != 1)
    throw Error("input must be marked for exactly one target, found " +
                std::to_string(marked.marker_positions.size()) + " markers");
  if (marked.offset_map.size() != marked.tokens.size()) throw Error("malformed marker bookkeeping");
  for (std::size_t i = 0; i < marked.tokens.size(); ++i) {
    const bool is_marker = marked.offset_map[i] < 0;
    if ((marked.tokens[i] == kMarkerToken) != is_marker)
      throw Error("reserved token '" + std::string(kMarkerToken) + "' at index " + std::to_string(i));
  }
  Matrix p = model.token_probabilities(marked.tokens);
  TagSequence out;
  out.labels.resize(marked.word_count());
  out.scores.resize(marked.word_count());
  for (std::size_t i = 0; i < marked.tokens.size(); ++i) {
    const int orig = marked.offset_map[i];
    if (orig < 0) continue;
    auto& s = out.scores[static_cast<std::size_t>(orig)];
    Eigen::Index best = 0;
    for (Eigen::Index c = 0; c < 3; ++c) {
      s[static_cast<std::size_t>(c)] = p(static_cast<Eigen::Index>(i), c);
      if (p(static_cast<Eigen::Index>(i), c) > p(static_cast<Eigen::Index>(i), best)) best = c;
    }
    out.labels[static_cast<std::size_t>(orig)] = static_cast<Tag>(best);
  }
  return out;
}

DerivedSentiment derive_entity_sentiment(const TagSequence& tags, const EntityMention& target) {
  DerivedSentiment out;
  std::size_t pos = 0, neg = 0;
  const auto& l = tags.labels;
  for (std::size_t i = 0; i < l.size();) {
    if (l[i] == Tag::O) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < l.size() && l[j] == l[i]) ++j;
    const bool is_pos = l[i] == Tag::POS;
    (is_pos ? pos : neg) += j - i;
    out.opinions.push_back({{static_cast<int>(i), static_cast<int>(j)},
                            is_pos ? OpinionPolarity::pos : OpinionPolarity::neg});
    i = j;
  }
  if (pos + neg == 0) return out;
  if (pos != neg) {
    out.polarity = pos > neg ? Polarity::positive : Polarity::negative;
    return out;
  }
  int near_pos = std::numeric_limits<int>::max(), near_neg = near_pos;
  for (const auto& o : out.opinions) {
    int& d = o.polarity == OpinionPolarity::pos ? near_pos : near_neg;
    d = std::min(d, token_distance(o.span, target.span));
  }
  out.polarity = near_pos < near_neg ? Polarity::positive : Polarity::negative;
  return out;
}

// --- BIO entity tagger ----------------------------------------------------------------

const std::vector<std::string>& TaggerEntityDetector::bio_labels() {
  static const std::vector<std::string> labels = {"O", "B-ORG", "I-ORG", "B-PRODUCT", "I-PRODUCT"};
  return labels;
}

namespace {

std::vector<EntityMention> decode_bio(const Utterance& u, const std::vector<int>& labels) {
  std::vector<EntityMention> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] <= 0) {
      ++i;
      continue;
    }
    // B and I both open a mention; an I continues only its own type.
    const int type_base = labels[i] <= 2 ? 1 : 3;
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == type_base + 1) ++j;
    EntityMention m;
    m.span = {static_cast<int>(i), static_cast<int>(j)};
    m.type = type_base == 1 ? EntityType::org : EntityType::product;
    m.surface = span_surface(u, m.span);
    out.push_back(std::move(m));
    i = j;
  }
  return out;
}

std::vector<int> bio_gold(const ElsaExample& e) {
  std::vector<int> gold(e.utterance.tokens.size(), 0);
  for (const auto& m : e.entities) {
    const int base = m.type == EntityType::org ? 1 : 3;
    for (int i = m.span.start; i < m.span.end; ++i)
      gold.at(static_cast<std::size_t>(i)) = i == m.span.start ? base : base + 1;
  }
  return gold;
}

}  // namespace

std::vector<EntityMention> TaggerEntityDetector::detect(const Utterance& utterance) const {
  if (!model_.has_token_head() || model_.token_labels() != bio_labels())
    throw ModelNotLoaded("entity tagger is not trained");
  if (utterance.tokens.empty()) return {};
  Matrix p = model_.token_probabilities(utterance.tokens);
  std::vector<int> labels(utterance.tokens.size());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index c;
    p.row(r).maxCoeff(&c);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }
  return decode_bio(utterance, labels);
}

std::vector<TokenTrainingItem> make_bio_items(const std::vector<ElsaExample>& examples) {
  std::vector<TokenTrainingItem> out;
  std::set<std::vector<std::string>> seen;
  for (const auto& e : examples) {
    if (!seen.insert(e.utterance.tokens).second) continue;
    out.push_back({e.utterance.tokens, bio_gold(e)});
  }
  return out;
}

TaggerEntityDetector train_entity_tagger(const std::vector<ElsaExample>& train,
                                         const std::vector<ElsaExample>& validation,
                                         const TaggerConfig& config) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& e : train) corpus.push_back(e.utterance.tokens);
  TaggerModel model(corpus, config);
  model.attach_token_head(TaggerEntityDetector::bio_labels());
  auto tr = make_bio_items(train);
  auto va = make_bio_items(validation);

  // Distinct validation utterances, for exact typed-span F1.
  std::vector<ElsaExample> dev;
  {
    std::set<std::vector<std::string>> seen;
    for (const auto& e : validation.empty() ? train : validation)
      if (seen.insert(e.utterance.tokens).second) dev.push_back(e);
  }
  auto metric = [&](const TaggerModel& m) {
    TaggerEntityDetector det(m);
    std::size_t tp = 0, np = 0, ng = 0;
    for (const auto& e : dev) {
      auto pred = det.detect(e.utterance);
      np += pred.size();
      ng += e.entities.size();
      for (const auto& p : pred) {
        for (const auto& g : e.entities)
          if (g.span == p.span && g.type == p.type) ++tp;
      }
    }
    const double pr = np ? static_cast<double>(tp) / static_cast<double>(np) : 0.0;
    const double rc = ng ? static_cast<double>(tp) / static_cast<double>(ng) : 0.0;
    return eval::f1_score(pr, rc);
  };
  train_token_classifier(model, tr, va, config, metric);
  return TaggerEntityDetector(std::move(model));
}

}  // namespace elsa::tagger
