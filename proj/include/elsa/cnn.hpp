#pragma once

// Utterance-level 3-class text CNN, Integrated Gradients over its word
// embeddings, and selection of candidate opinion words from the attributions.

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "elsa/corpus.hpp"
#include "elsa/nn/tape.hpp"
#include "elsa/nn/train.hpp"

namespace elsa::cnn {

struct CnnConfig {
  int embedding_dim = 300;
  std::vector<int> filter_sizes = {2, 3, 4, 5, 6};
  int filters_per_size = 64;
  int hidden_dim = 128;
  std::uint64_t seed = 17;

  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int early_stopping_patience = 3;
  int max_epochs = 15;
  bool freeze_embeddings = false;
  int ig_steps = 50;

  void validate() const;
  int max_filter() const;
};

Json to_json(const CnnConfig& c);
CnnConfig cnn_config_from_json(const Json& j);

// Pretrained vectors keyed by lowercased word.
struct EmbeddingTable {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

// File format: one `word v1 ... vD` entry per line; D is fixed by the first line.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Lowercased word vocabulary; index 0 is padding, 1 is unknown.
class WordVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  WordVocab();
  static WordVocab build(const std::vector<std::vector<std::string>>& sentences);

  int id(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  void add(const std::string& word);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

class TextCnn {
 public:
  TextCnn() = default;
  TextCnn(WordVocab vocab, const CnnConfig& config, const EmbeddingTable* pretrained = nullptr);

  const CnnConfig& config() const { return config_; }
  const WordVocab& vocab() const { return vocab_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  std::vector<int> ids(const std::vector<std::string>& tokens) const;
  // n x embedding_dim lookup; padding rows are zero.
  nn::Matrix embed(const std::vector<std::string>& tokens) const;

  // Logits (1 x 3) from an embedded input whose first `length` rows are real
  // tokens; further rows are padding and never change the result.
  nn::Var logits_from_embeddings(nn::Tape& t, nn::Var embedded, int length) const;
  nn::Var logits(nn::Tape& t, const std::vector<std::string>& tokens) const;

  std::array<double, 3> logits(const std::vector<std::string>& tokens) const;

  // Shared by classify and attribution: conv pre-activations per filter size
  // (windows x filters) for an embedded input.
  std::vector<nn::Matrix> conv_preactivations(const nn::Matrix& embedded, int length) const;
  // Logits from conv pre-activations; gradients land in the returned inputs.
  struct HeadPass {
    std::vector<nn::Var> preacts;
    nn::Var logits;
  };
  HeadPass head(nn::Tape& t, const std::vector<nn::Matrix>& preacts) const;
  // Sum over windows of d(pre-activation grads)/d(embedded input).
  nn::Matrix conv_input_gradient(const std::vector<nn::Matrix>& preact_grads, Eigen::Index rows) const;

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;

  void save(const std::filesystem::path& dir) const;
  static TextCnn load(const std::filesystem::path& dir);

 private:
  CnnConfig config_;
  WordVocab vocab_;
  nn::Parameter embedding_;
  std::vector<nn::Parameter> conv_weight_;  // (k*dim) x filters per size
  std::vector<nn::Parameter> conv_bias_;
  nn::Parameter fc_weight_, fc_bias_, out_weight_, out_bias_;
  bool trained_ = false;
};

// Class probabilities, positive/negative/neutral order. Throws ModelNotLoaded
// on an untrained model and Error on empty tokens. pad_to appends padding.
std::array<double, 3> classify(const TextCnn& model, const std::vector<std::string>& tokens,
                               std::size_t pad_to = 0);
Polarity predict_class(const TextCnn& model, const std::vector<std::string>& tokens);

struct CnnExample {
  std::vector<std::string> tokens;
  Polarity label = Polarity::neutral;
};

// One item per distinct utterance. Label: the majority of its targets' polar
// labels (ties to negative), neutral when every target is neutral.
std::vector<CnnExample> utterance_sentiment_items(const std::vector<ElsaExample>& examples);

struct CnnTrainingResult {
  TextCnn model;
  nn::TrainingLog log;
};

// Early stopping on validation accuracy; the training set stands in when
// validation is empty.
CnnTrainingResult train_cnn(const std::vector<CnnExample>& train, const std::vector<CnnExample>& validation,
                            const CnnConfig& config, const EmbeddingTable* pretrained = nullptr);

double accuracy(const TextCnn& model, const std::vector<CnnExample>& data);

// --- attribution ---------------------------------------------------------------------

// Grid points along the straight path: alpha = k/steps (right) or
// (k - 1/2)/steps (midpoint), k = 1..steps.
enum class RiemannRule { right, midpoint };

struct AttributionVector {
  std::vector<double> scores;  // per token
  std::string baseline = "zero";
  int steps = 0;
  RiemannRule rule = RiemannRule::midpoint;
  int target_class = 0;
  double f_input = 0.0;     // F(x)
  double f_baseline = 0.0;  // F(x')
  double convergence_gap = 0.0;
};

// Value and gradient of a scalar function of an n x d input.
using GradientFn = std::function<std::pair<double, nn::Matrix>(const nn::Matrix&)>;

AttributionVector integrated_gradients(const GradientFn& f, const nn::Matrix& input,
                                       const nn::Matrix& baseline, int steps,
                                       RiemannRule rule = RiemannRule::midpoint);

// F is the target-class logit; the baseline is the all-padding (zero) input.
AttributionVector integrated_gradients(const TextCnn& model, const std::vector<std::string>& tokens,
                                       int target_class, int steps,
                                       RiemannRule rule = RiemannRule::midpoint);

struct CandidateConfig {
  double z_threshold = 1.0;
  std::size_t top_k = 5;
  std::unordered_set<std::string> stopwords;  // lowercased
};

CandidateConfig default_candidate_config();

struct CandidateOpinion {
  int index = 0;
  std::string word;
  double score = 0.0;
  Polarity polarity_hint = Polarity::neutral;
};

// z-normalised attribution >= threshold (z = 0 when all are equal), positive
// attribution, not a stopword, punctuation or entity token; the top_k by score.
std::vector<CandidateOpinion> select_candidates(const AttributionVector& attr,
                                                const std::vector<std::string>& tokens,
                                                const std::vector<EntityMention>& entities,
                                                Polarity predicted,
                                                const CandidateConfig& config = default_candidate_config());

}  // namespace elsa::cnn
