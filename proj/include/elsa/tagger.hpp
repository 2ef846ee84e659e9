#pragma once

// Marker-conditioned opinion tagger: a small bidirectional transformer
// encoder with a sentence-classification head (generic sentiment stage) and a
// token-classification head (O/POS/NEG opinion tags). The same token head
// machinery backs a BIO entity tagger.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "elsa/corpus.hpp"
#include "elsa/ner.hpp"
#include "elsa/nn/tape.hpp"
#include "elsa/nn/train.hpp"

namespace elsa::tagger {

enum class Tag { O = 0, POS = 1, NEG = 2 };

struct TagVocab {
  static constexpr std::array<std::string_view, 3> labels = {"O", "POS", "NEG"};
  static constexpr std::size_t size() { return labels.size(); }
  static std::string_view name(Tag t) { return labels[static_cast<std::size_t>(t)]; }
  static std::optional<Tag> parse(std::string_view s);
};

struct EncoderSpec {
  int layers = 2;
  int d_model = 64;
  int heads = 4;
  int ff_dim = 128;
  int max_positions = 256;
};

struct TaggerConfig {
  int batch_size = 32;
  double learning_rate = 5e-5;
  int early_stopping_patience = 5;
  EncoderSpec encoder_spec;
  std::uint64_t seed = 13;
  int max_epochs = 20;
  double weight_decay = 0.01;
  int min_subword_count = 1;
  void validate() const;
};

Json to_json(const TaggerConfig& c);
TaggerConfig tagger_config_from_json(const Json& j);

// Greedy longest-match word pieces over lowercased words. Continuation
// pieces carry a "##" prefix.
class SubwordVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kMarker = 3;

  SubwordVocab();
  static SubwordVocab build(const std::vector<std::vector<std::string>>& sentences, int min_count);

  std::vector<int> encode_word(const std::string& word) const;
  int size() const { return static_cast<int>(pieces_.size()); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  void add(const std::string& piece);

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

struct Linear {
  nn::Parameter weight;
  nn::Parameter bias;
  nn::Var apply(nn::Tape& t, nn::Var x) const;
};

class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(int vocab_size, const EncoderSpec& spec, std::mt19937_64& rng);

  // ids: [CLS] + word pieces. Returns one hidden row per id.
  nn::Var forward(nn::Tape& t, std::span<const int> ids) const;
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  const EncoderSpec& spec() const { return spec_; }

 private:
  struct Layer {
    Linear q, k, v, o, ff1, ff2;
    nn::Parameter ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  };
  EncoderSpec spec_;
  nn::Parameter token_embedding_;
  nn::Parameter position_embedding_;
  nn::Parameter ln_gamma_, ln_beta_;
  std::vector<Layer> layers_;
};

class TaggerModel {
 public:
  TaggerModel() = default;
  // Vocabulary is built from the given sentences (lowercased words).
  TaggerModel(const std::vector<std::vector<std::string>>& vocab_corpus, const TaggerConfig& config);

  const TaggerConfig& config() const { return config_; }
  const SubwordVocab& vocab() const { return vocab_; }
  bool has_sentence_head() const { return sentence_head_.has_value(); }
  bool has_token_head() const { return token_head_.has_value(); }
  const std::vector<std::string>& token_labels() const { return token_labels_; }

  // Adds (or replaces) the token head with the given label set.
  void attach_token_head(std::vector<std::string> labels);

  // Word-level encoding: ids plus the first-piece index of every word.
  struct Encoded {
    std::vector<int> ids;
    std::vector<int> first_piece;  // per input word
  };
  Encoded encode(const std::vector<std::string>& words) const;

  // Logits rows per word, markers included; t must outlive the result.
  nn::Var token_logits(nn::Tape& t, const Encoded& enc) const;
  nn::Var sentence_logits(nn::Tape& t, const Encoded& enc) const;

  // Inference without touching parameter gradients.
  nn::Matrix token_probabilities(const std::vector<std::string>& words) const;
  std::array<double, 3> sentence_probabilities(const std::vector<std::string>& words) const;

  std::vector<nn::Parameter*> parameters();
  // Encoder plus the head used by each stage.
  std::vector<nn::Parameter*> sentence_task_parameters();
  std::vector<nn::Parameter*> token_task_parameters();
  std::vector<const nn::Parameter*> encoder_parameters() const;
  std::vector<const nn::Parameter*> head_parameters() const;

  void save(const std::filesystem::path& dir) const;
  static TaggerModel load(const std::filesystem::path& dir);

 private:
  TaggerConfig config_;
  SubwordVocab vocab_;
  TransformerEncoder encoder_;
  std::optional<Linear> sentence_head_;
  std::optional<Linear> token_head_;
  std::vector<std::string> token_labels_;
  std::uint64_t init_counter_ = 0;
};

// --- training ------------------------------------------------------------------

using nn::EpochRecord;
using nn::TrainingLog;

struct SentenceExample {
  std::vector<std::string> tokens;
  Polarity label = Polarity::neutral;
};

// Generic sentiment stage: trains encoder + sentence head, early stopping on
// validation loss. Leaves the model at the best epoch.
TrainingLog train_generic_sentiment(TaggerModel& model, const std::vector<SentenceExample>& train,
                                    const std::vector<SentenceExample>& validation,
                                    const TaggerConfig& config);

struct ElsaItem {
  ner::MarkedUtterance marked;
  std::vector<int> gold;  // per non-marker word, TagVocab index
  Polarity polarity = Polarity::neutral;
};

// Every token of a gold opinion span carries that span's tag; others are O.
ElsaItem make_elsa_item(const ElsaExample& example);
std::vector<ElsaItem> make_elsa_items(const std::vector<ElsaExample>& examples);

// ELSA stage: attaches the O/POS/NEG head if missing and fine-tunes, early
// stopping on validation support-weighted F1 of the derived entity polarity.
TrainingLog train_elsa(TaggerModel& model, const std::vector<ElsaItem>& train,
                       const std::vector<ElsaItem>& validation, const TaggerConfig& config);

// Mean validation cross-entropy of the token head over the items.
double token_loss(const TaggerModel& model, const std::vector<ElsaItem>& items);

// Shared loop behind both token-head trainers.
struct TokenTrainingItem {
  std::vector<std::string> words;  // may include marker tokens
  std::vector<int> gold;           // per word; -1 excludes it from the loss
};
TrainingLog train_token_classifier(
    TaggerModel& model, const std::vector<TokenTrainingItem>& train,
    const std::vector<TokenTrainingItem>& validation, const TaggerConfig& config,
    const std::function<double(const TaggerModel&)>& validation_metric);

// --- inference -----------------------------------------------------------------

struct TagSequence {
  std::vector<Tag> labels;                   // per non-marker word
  std::vector<std::array<double, 3>> scores;  // softmax per word
};

TagSequence predict_tags(const TaggerModel& model, const ner::MarkedUtterance& marked);

struct DerivedSentiment {
  Polarity polarity = Polarity::neutral;
  std::vector<OpinionSpan> opinions;
  bool operator==(const DerivedSentiment&) const = default;
};

// Maximal runs of one non-O tag become spans. Polarity is the majority over
// tagged tokens; a tie goes to the span nearest the target, then to negative.
DerivedSentiment derive_entity_sentiment(const TagSequence& tags, const EntityMention& target);

// --- BIO entity tagger ------------------------------------------------------------

class TaggerEntityDetector : public ner::EntityDetector {
 public:
  static const std::vector<std::string>& bio_labels();

  TaggerEntityDetector() = default;
  explicit TaggerEntityDetector(TaggerModel model) : model_(std::move(model)) {}

  std::vector<EntityMention> detect(const Utterance& utterance) const override;
  const TaggerModel& model() const { return model_; }

 private:
  TaggerModel model_;
};

// BIO gold per word for every distinct utterance in examples.
std::vector<TokenTrainingItem> make_bio_items(const std::vector<ElsaExample>& examples);

TaggerEntityDetector train_entity_tagger(const std::vector<ElsaExample>& train,
                                         const std::vector<ElsaExample>& validation,
                                         const TaggerConfig& config);

}  // namespace elsa::tagger
