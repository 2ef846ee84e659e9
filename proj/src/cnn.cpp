#include "elsa/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "elsa/error.hpp"
#include "elsa/nn/loss.hpp"
#include "elsa/nn/optim.hpp"

namespace elsa::cnn {

namespace fs = std::filesystem;
using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;

void CnnConfig::validate() const {
  if (embedding_dim < 1) throw Error("embedding_dim must be >= 1");
  if (filter_sizes.empty()) throw Error("filter_sizes must not be empty");
  std::set<int> seen;
  for (int k : filter_sizes) {
    if (k < 1) throw Error("filter sizes must be positive");
    if (!seen.insert(k).second) throw Error("filter sizes must be distinct");
  }
  if (filters_per_size < 1) throw Error("filters_per_size must be >= 1");
  if (hidden_dim < 1) throw Error("hidden_dim must be >= 1");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (early_stopping_patience < 1) throw Error("early_stopping_patience must be >= 1");
  if (max_epochs < 1) throw Error("max_epochs must be >= 1");
  if (ig_steps < 1) throw Error("ig_steps must be >= 1");
}

int CnnConfig::max_filter() const { return *std::max_element(filter_sizes.begin(), filter_sizes.end()); }

Json to_json(const CnnConfig& c) {
  return {{"embedding_dim", c.embedding_dim},
          {"filter_sizes", c.filter_sizes},
          {"filters_per_size", c.filters_per_size},
          {"hidden_dim", c.hidden_dim},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"early_stopping_patience", c.early_stopping_patience},
          {"max_epochs", c.max_epochs},
          {"freeze_embeddings", c.freeze_embeddings},
          {"ig_steps", c.ig_steps}};
}

CnnConfig cnn_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error("cnn config must be an object");
  CnnConfig c;
  try {
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.filter_sizes = j.value("filter_sizes", c.filter_sizes);
    c.filters_per_size = j.value("filters_per_size", c.filters_per_size);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.seed = j.value("seed", c.seed);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.early_stopping_patience = j.value("early_stopping_patience", c.early_stopping_patience);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.freeze_embeddings = j.value("freeze_embeddings", c.freeze_embeddings);
    c.ig_steps = j.value("ig_steps", c.ig_steps);
  } catch (const Json::exception& e) {
    throw Error(std::string("bad cnn config: ") + e.what());
  }
  c.validate();
  return c;
}

EmbeddingTable load_embeddings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) throw ParseError(path.string(), lineno, "non-numeric vector component");
    if (v.empty()) throw ParseError(path.string(), lineno, "missing vector");
    if (table.dim == 0) table.dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != table.dim)
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(table.dim) + " components, got " + std::to_string(v.size()));
    table.vectors[to_lower(word)] = std::move(v);
  }
  return table;
}

// --- vocabulary -----------------------------------------------------------------------

WordVocab::WordVocab() {
  add("[PAD]");
  add("[UNK]");
}

void WordVocab::add(const std::string& word) {
  if (index_.count(word)) return;
  index_.emplace(word, static_cast<int>(words_.size()));
  words_.push_back(word);
}

WordVocab WordVocab::build(const std::vector<std::vector<std::string>>& sentences) {
  std::set<std::string> words;
  for (const auto& s : sentences)
    for (const auto& w : s) words.insert(to_lower(w));
  WordVocab v;
  for (const auto& w : words) v.add(w);
  return v;
}

int WordVocab::id(const std::string& word) const {
  auto it = index_.find(to_lower(word));
  return it == index_.end() ? kUnk : it->second;
}

// --- model ------------------------------------------------------------------------------

namespace {

Matrix unfold_matrix(const Matrix& x, Eigen::Index k, Eigen::Index windows) {
  const Eigen::Index d = x.cols();
  Matrix out = Matrix::Zero(windows, k * d);
  for (Eigen::Index p = 0; p < windows; ++p)
    for (Eigen::Index j = 0; j < k && p + j < x.rows(); ++j) out.block(p, j * d, 1, d) = x.row(p + j);
  return out;
}

Eigen::Index window_count(int length, int k) { return std::max<Eigen::Index>(1, length - k + 1); }

}  // namespace

TextCnn::TextCnn(WordVocab vocab, const CnnConfig& config, const EmbeddingTable* pretrained)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  const int d = config_.embedding_dim;
  if (pretrained && pretrained->dim != d)
    throw Error("embedding file has dimension " + std::to_string(pretrained->dim) + ", config expects " +
                std::to_string(d));
  std::mt19937_64 rng(config_.seed);
  Matrix emb = nn::normal_init(vocab_.size(), d, 0.1, rng);
  emb.row(WordVocab::kPad).setZero();
  if (pretrained) {
    for (int i = 2; i < vocab_.size(); ++i) {
      auto it = pretrained->vectors.find(vocab_.words()[static_cast<std::size_t>(i)]);
      if (it != pretrained->vectors.end())
        for (int c = 0; c < d; ++c) emb(i, c) = it->second[static_cast<std::size_t>(c)];
    }
  }
  embedding_ = Parameter("embedding", std::move(emb));
  embedding_.trainable = !config_.freeze_embeddings;
  for (int k : config_.filter_sizes) {
    conv_weight_.emplace_back("conv" + std::to_string(k) + ".weight",
                              nn::xavier_uniform(k * d, config_.filters_per_size, rng));
    conv_bias_.emplace_back("conv" + std::to_string(k) + ".bias", Matrix::Zero(1, config_.filters_per_size));
  }
  const int pooled = config_.filters_per_size * static_cast<int>(config_.filter_sizes.size());
  fc_weight_ = Parameter("fc.weight", nn::xavier_uniform(pooled, config_.hidden_dim, rng));
  fc_bias_ = Parameter("fc.bias", Matrix::Zero(1, config_.hidden_dim));
  out_weight_ = Parameter("out.weight", nn::xavier_uniform(config_.hidden_dim, 3, rng));
  out_bias_ = Parameter("out.bias", Matrix::Zero(1, 3));
}

std::vector<int> TextCnn::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab_.id(t));
  return out;
}

Matrix TextCnn::embed(const std::vector<std::string>& tokens) const {
  Matrix out(static_cast<Eigen::Index>(tokens.size()), config_.embedding_dim);
  auto id = ids(tokens);
  for (std::size_t i = 0; i < id.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = embedding_.value.row(id[i]);
  return out;
}

namespace {

Var head_from(Tape& t, const std::vector<Var>& preacts, const Parameter& fc_w, const Parameter& fc_b,
              const Parameter& out_w, const Parameter& out_b) {
  std::vector<Var> pooled;
  for (Var p : preacts) pooled.push_back(nn::max_rows(t, nn::relu(t, p)));
  Var z = pooled.size() == 1 ? pooled[0] : nn::concat_cols(t, pooled);
  Var h = nn::relu(t, nn::add_row(t, nn::matmul(t, z, t.parameter(fc_w)), t.parameter(fc_b)));
  return nn::add_row(t, nn::matmul(t, h, t.parameter(out_w)), t.parameter(out_b));
}

}  // namespace

Var TextCnn::logits_from_embeddings(Tape& t, Var embedded, int length) const {
  if (length < 1) throw Error("empty input");
  std::vector<Var> preacts;
  for (std::size_t s = 0; s < conv_weight_.size(); ++s) {
    const int k = config_.filter_sizes[s];
    Var u = nn::unfold(t, embedded, k, window_count(length, k));
    preacts.push_back(nn::add_row(t, nn::matmul(t, u, t.parameter(conv_weight_[s])), t.parameter(conv_bias_[s])));
  }
  return head_from(t, preacts, fc_weight_, fc_bias_, out_weight_, out_bias_);
}

Var TextCnn::logits(Tape& t, const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw Error("empty input");
  auto id = ids(tokens);
  Var e = nn::gather_rows(t, t.parameter(embedding_), id);
  return logits_from_embeddings(t, e, static_cast<int>(tokens.size()));
}

std::array<double, 3> TextCnn::logits(const std::vector<std::string>& tokens) const {
  Tape t(false);
  const Matrix& z = t.value(logits(t, tokens));
  return {z(0, 0), z(0, 1), z(0, 2)};
}

std::vector<Matrix> TextCnn::conv_preactivations(const Matrix& embedded, int length) const {
  std::vector<Matrix> out;
  for (std::size_t s = 0; s < conv_weight_.size(); ++s) {
    const int k = config_.filter_sizes[s];
    Matrix p = unfold_matrix(embedded, k, window_count(length, k)) * conv_weight_[s].value;
    p.rowwise() += conv_bias_[s].value.row(0);
    out.push_back(std::move(p));
  }
  return out;
}

TextCnn::HeadPass TextCnn::head(Tape& t, const std::vector<Matrix>& preacts) const {
  HeadPass pass;
  for (const auto& p : preacts) pass.preacts.push_back(t.input(p));
  pass.logits = head_from(t, pass.preacts, fc_weight_, fc_bias_, out_weight_, out_bias_);
  return pass;
}

Matrix TextCnn::conv_input_gradient(const std::vector<Matrix>& preact_grads, Eigen::Index rows) const {
  const Eigen::Index d = config_.embedding_dim;
  Matrix g = Matrix::Zero(rows, d);
  for (std::size_t s = 0; s < preact_grads.size(); ++s) {
    const Eigen::Index k = config_.filter_sizes[s];
    Matrix du = preact_grads[s] * conv_weight_[s].value.transpose();
    for (Eigen::Index p = 0; p < du.rows(); ++p)
      for (Eigen::Index j = 0; j < k && p + j < rows; ++j) g.row(p + j) += du.block(p, j * d, 1, d);
  }
  return g;
}

std::vector<Parameter*> TextCnn::parameters() {
  std::vector<Parameter*> out = {&embedding_};
  for (std::size_t s = 0; s < conv_weight_.size(); ++s) {
    out.push_back(&conv_weight_[s]);
    out.push_back(&conv_bias_[s]);
  }
  for (Parameter* p : {&fc_weight_, &fc_bias_, &out_weight_, &out_bias_}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> TextCnn::parameters() const {
  auto mut = const_cast<TextCnn*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

// Checkpoint layout: config.json, vocab.txt, weights.bin.
void TextCnn::save(const fs::path& dir) const {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.json", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
    Json j = {{"cnn_config", to_json(config_)}, {"vocab_size", vocab_.size()}, {"trained", trained_}};
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "vocab.txt", std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write '" + (dir / "vocab.txt").string() + "'");
    for (const auto& w : vocab_.words()) out << w << '\n';
  }
  nn::save_parameters(dir / "weights.bin", parameters());
}

TextCnn TextCnn::load(const fs::path& dir) {
  std::ifstream cin(dir / "config.json");
  if (!cin) throw IoError("cannot open '" + (dir / "config.json").string() + "'");
  Json j;
  try {
    j = Json::parse(cin);
  } catch (const Json::exception& e) {
    throw ParseError((dir / "config.json").string(), 0, e.what());
  }
  std::ifstream vin(dir / "vocab.txt", std::ios::binary);
  if (!vin) throw IoError("cannot open '" + (dir / "vocab.txt").string() + "'");
  WordVocab vocab;
  std::string line;
  std::size_t n = 0;
  while (std::getline(vin, line)) {
    if (n++ < 2) continue;
    vocab.add(line);
  }
  if (vocab.size() != j.at("vocab_size").get<int>())
    throw IoError("vocabulary size mismatch in '" + dir.string() + "'");
  TextCnn m(std::move(vocab), cnn_config_from_json(j.at("cnn_config")));
  nn::load_parameters(dir / "weights.bin", m.parameters());
  m.trained_ = j.value("trained", false);
  return m;
}

// --- classification ---------------------------------------------------------------------

namespace {

std::array<double, 3> softmax3(const std::array<double, 3>& z) {
  const double m = std::max({z[0], z[1], z[2]});
  std::array<double, 3> p{};
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += p[static_cast<std::size_t>(c)] = std::exp(z[static_cast<std::size_t>(c)] - m);
  for (auto& v : p) v /= s;
  return p;
}

void require_trained(const TextCnn& m) {
  if (!m.trained()) throw ModelNotLoaded("cnn model is not trained");
}

}  // namespace

std::array<double, 3> classify(const TextCnn& model, const std::vector<std::string>& tokens, std::size_t pad_to) {
  require_trained(model);
  if (tokens.empty()) throw Error("empty input");
  Matrix e = model.embed(tokens);
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const auto rows = std::max<Eigen::Index>({n, static_cast<Eigen::Index>(pad_to),
                                            static_cast<Eigen::Index>(model.config().max_filter())});
  Matrix padded = Matrix::Zero(rows, e.cols());
  padded.topRows(n) = e;
  Tape t(false);
  Var z = model.logits_from_embeddings(t, t.constant(std::move(padded)), static_cast<int>(n));
  const Matrix& zv = t.value(z);
  return softmax3({zv(0, 0), zv(0, 1), zv(0, 2)});
}

Polarity predict_class(const TextCnn& model, const std::vector<std::string>& tokens) {
  auto p = classify(model, tokens);
  return kPolarities[std::max_element(p.begin(), p.end()) - p.begin()];
}

std::vector<CnnExample> utterance_sentiment_items(const std::vector<ElsaExample>& examples) {
  std::vector<CnnExample> out;
  std::map<std::vector<std::string>, std::size_t> index;
  std::vector<std::array<int, 2>> votes;
  for (const auto& e : examples) {
    auto [it, fresh] = index.emplace(e.utterance.tokens, out.size());
    if (fresh) {
      out.push_back({e.utterance.tokens, Polarity::neutral});
      votes.push_back({0, 0});
    }
    if (e.polarity == Polarity::positive) ++votes[it->second][0];
    if (e.polarity == Polarity::negative) ++votes[it->second][1];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto [pos, neg] = votes[i];
    if (pos + neg > 0) out[i].label = pos > neg ? Polarity::positive : Polarity::negative;
  }
  return out;
}

double accuracy(const TextCnn& model, const std::vector<CnnExample>& data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& ex : data) ok += predict_class(model, ex.tokens) == ex.label;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

CnnTrainingResult train_cnn(const std::vector<CnnExample>& train, const std::vector<CnnExample>& validation,
                            const CnnConfig& config, const EmbeddingTable* pretrained) {
  config.validate();
  if (train.empty()) throw Error("empty training dataset");
  std::vector<std::vector<std::string>> corpus;
  for (const auto& ex : train) {
    if (ex.tokens.empty()) throw Error("training utterance without tokens");
    corpus.push_back(ex.tokens);
  }
  CnnTrainingResult result{TextCnn(WordVocab::build(corpus), config, pretrained), {}};
  TextCnn& model = result.model;
  model.mark_trained();
  const auto& val = validation.empty() ? train : validation;
  std::vector<int> gold;
  for (const auto& ex : train) gold.push_back(polarity_index(ex.label));

  std::vector<Parameter*> params;
  for (auto* p : model.parameters())
    if (p->trainable) params.push_back(p);

  auto loss_of = [&](std::size_t i, Tape& t) {
    return nn::cross_entropy(t, model.logits(t, train[i].tokens), std::span<const int>(&gold[i], 1));
  };
  auto weight_of = [](const std::vector<std::size_t>& idx) {
    return std::vector<double>(idx.size(), 1.0 / static_cast<double>(idx.size()));
  };
  auto evaluate = [&] {
    double loss = 0.0;
    std::size_t ok = 0;
    for (const auto& ex : val) {
      auto z = model.logits(ex.tokens);
      const int g = polarity_index(ex.label);
      const double m = std::max({z[0], z[1], z[2]});
      loss += m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m)) - z[static_cast<std::size_t>(g)];
      ok += static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()) == g;
    }
    const double n = static_cast<double>(val.size());
    return nn::Evaluation{loss / n, static_cast<double>(ok) / n};
  };
  nn::FitOptions opt{config.batch_size, config.learning_rate, config.weight_decay,
                     config.early_stopping_patience, config.max_epochs, config.seed};
  result.log = nn::fit(params, train.size(), opt, loss_of, weight_of, evaluate);
  return result;
}

// --- attribution ---------------------------------------------------------------------------

namespace {

double grid_alpha(int k, int steps, RiemannRule rule) {
  const double kk = rule == RiemannRule::right ? static_cast<double>(k) : static_cast<double>(k) - 0.5;
  return kk / static_cast<double>(steps);
}

}  // namespace

AttributionVector integrated_gradients(const GradientFn& f, const Matrix& input, const Matrix& baseline, int steps,
                                       RiemannRule rule) {
  if (steps < 1) throw Error("steps must be >= 1");
  if (input.rows() != baseline.rows() || input.cols() != baseline.cols())
    throw Error("input and baseline shapes differ");
  const Matrix delta = input - baseline;
  Matrix sum = Matrix::Zero(input.rows(), input.cols());
  for (int k = 1; k <= steps; ++k) sum += f(baseline + grid_alpha(k, steps, rule) * delta).second;
  if (!sum.allFinite()) throw NumericError("non-finite gradients in integrated gradients");
  const Matrix contrib = delta.cwiseProduct(sum / static_cast<double>(steps));
  AttributionVector out;
  out.steps = steps;
  out.rule = rule;
  out.baseline = "custom";
  out.f_input = f(input).first;
  out.f_baseline = f(baseline).first;
  double total = 0.0;
  for (Eigen::Index i = 0; i < contrib.rows(); ++i) {
    out.scores.push_back(contrib.row(i).sum());
    total += out.scores.back();
  }
  out.convergence_gap = std::abs(total - (out.f_input - out.f_baseline));
  return out;
}

// The conv layer is affine in the embedded input, so along the straight path
// its pre-activations are Z' + alpha (Z - Z'). Only the head is re-run per
// step; the head gradients are summed and pushed through the conv once.
AttributionVector integrated_gradients(const TextCnn& model, const std::vector<std::string>& tokens,
                                       int target_class, int steps, RiemannRule rule) {
  require_trained(model);
  if (steps < 1) throw Error("steps must be >= 1");
  if (target_class < 0 || target_class > 2) throw Error("target class out of range");
  if (tokens.empty()) throw Error("empty input");
  const int n = static_cast<int>(tokens.size());
  const Matrix x = model.embed(tokens);
  const Matrix base = Matrix::Zero(x.rows(), x.cols());
  const auto z_in = model.conv_preactivations(x, n);
  const auto z_base = model.conv_preactivations(base, n);

  auto f_at = [&](const std::vector<Matrix>& z) {
    Tape t(false);
    auto pass = model.head(t, z);
    return t.value(pass.logits)(0, target_class);
  };

  std::vector<Matrix> grad_sum;
  for (const auto& z : z_in) grad_sum.push_back(Matrix::Zero(z.rows(), z.cols()));
  std::vector<Matrix> z(z_in.size());
  for (int k = 1; k <= steps; ++k) {
    const double alpha = grid_alpha(k, steps, rule);
    for (std::size_t s = 0; s < z.size(); ++s) z[s] = z_base[s] + alpha * (z_in[s] - z_base[s]);
    Tape t(false);
    auto pass = model.head(t, z);
    t.backward(nn::slice_cols(t, pass.logits, target_class, 1));
    for (std::size_t s = 0; s < z.size(); ++s) grad_sum[s] += t.gradient(pass.preacts[s]);
  }
  for (auto& g : grad_sum) g /= static_cast<double>(steps);
  const Matrix mean_grad = model.conv_input_gradient(grad_sum, x.rows());
  if (!mean_grad.allFinite()) throw NumericError("non-finite gradients in integrated gradients");

  AttributionVector out;
  out.steps = steps;
  out.rule = rule;
  out.target_class = target_class;
  out.f_input = f_at(z_in);
  out.f_baseline = f_at(z_base);
  const Matrix contrib = (x - base).cwiseProduct(mean_grad);
  double total = 0.0;
  for (Eigen::Index i = 0; i < contrib.rows(); ++i) {
    out.scores.push_back(contrib.row(i).sum());
    total += out.scores.back();
  }
  out.convergence_gap = std::abs(total - (out.f_input - out.f_baseline));
  return out;
}

// --- candidate selection ---------------------------------------------------------------------

CandidateConfig default_candidate_config() {
  CandidateConfig c;
  c.stopwords = {"a",     "an",    "the",   "i",     "me",    "my",    "we",    "our",   "you",
                 "your",  "he",    "she",   "it",    "its",   "they",  "them",  "their", "this",
                 "that",  "these", "those", "is",    "are",   "was",   "were",  "be",    "been",
                 "am",    "do",    "does",  "did",   "have",  "has",   "had",   "and",   "or",
                 "but",   "so",    "to",    "of",    "for",   "with",  "at",    "on",    "in",
                 "from",  "by",    "about", "as",    "into",  "up",    "out",   "if",    "then",
                 "just",  "very",  "really", "um",   "uh",    "yeah",  "oh",
                 "i'm",   "it's",  "she's", "he's",  "that's", "don't", "can",  "will",  "would",
                 "also",  "all",   "too",   "there", "here",  "what",  "which", "who",   "how",
                 "when",  "not",   "no",    "yes",   "ok",    "okay",  "know",  "mean",  "guess"};
  return c;
}

std::vector<CandidateOpinion> select_candidates(const AttributionVector& attr, const std::vector<std::string>& tokens,
                                                const std::vector<EntityMention>& entities, Polarity predicted,
                                                const CandidateConfig& config) {
  if (attr.scores.size() != tokens.size()) throw Error("attribution length does not match tokens");
  const std::size_t n = tokens.size();
  if (n == 0) return {};
  const double mean = std::accumulate(attr.scores.begin(), attr.scores.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double s : attr.scores) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));

  std::vector<CandidateOpinion> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = attr.scores[i];
    const double z = sd > 0.0 ? (s - mean) / sd : 0.0;
    if (!(z >= config.z_threshold) || !(s > 0.0) || !std::isfinite(s)) continue;
    const std::string lw = to_lower(tokens[i]);
    if (is_punctuation(tokens[i]) || config.stopwords.count(lw) || lw == kMarkerToken) continue;
    const int idx = static_cast<int>(i);
    if (std::any_of(entities.begin(), entities.end(), [&](const EntityMention& e) { return e.span.contains(idx); }))
      continue;
    out.push_back({idx, tokens[i], s, predicted});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const CandidateOpinion& a, const CandidateOpinion& b) { return a.score > b.score; });
  if (out.size() > config.top_k) out.resize(config.top_k);
  return out;
}

}  // namespace elsa::cnn
