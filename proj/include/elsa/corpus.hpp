#pragma once

// Data model for entity-level sentiment examples, the line-delimited record
// format, balanced sampling of a raw utterance pool, and a template-driven
// synthetic corpus generator.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace elsa {

using Json = nlohmann::ordered_json;

// Reserved token placed in front of the target entity. It must never occur in
// ingested text.
inline constexpr std::string_view kMarkerToken = "_NE_";

enum class EntityType { org, product };
enum class Polarity { positive, negative, neutral };
enum class OpinionPolarity { pos, neg };

std::string_view to_string(EntityType t);
std::string_view to_string(Polarity p);
std::string_view to_string(OpinionPolarity p);
std::optional<EntityType> parse_entity_type(std::string_view s);
std::optional<Polarity> parse_polarity(std::string_view s);
std::optional<OpinionPolarity> parse_opinion_polarity(std::string_view s);

inline constexpr Polarity kPolarities[3] = {Polarity::positive, Polarity::negative,
                                            Polarity::neutral};
inline int polarity_index(Polarity p) { return static_cast<int>(p); }

inline Polarity to_polarity(OpinionPolarity p) {
  return p == OpinionPolarity::pos ? Polarity::positive : Polarity::negative;
}

// Half-open token interval [start, end).
struct TokenSpan {
  int start = 0;
  int end = 0;

  int size() const { return end - start; }
  bool contains(int i) const { return start <= i && i < end; }
  bool overlaps(const TokenSpan& o) const { return start < o.end && o.start < end; }
  auto operator<=>(const TokenSpan&) const = default;
};

// Smallest index distance between any token of a and any token of b; 0 when
// they overlap.
int token_distance(const TokenSpan& a, const TokenSpan& b);

struct Utterance {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::optional<std::string> call_id;
  std::optional<std::string> timestamp;

  bool operator==(const Utterance&) const = default;
};

struct EntityMention {
  TokenSpan span;
  EntityType type = EntityType::org;
  std::string surface;

  bool operator==(const EntityMention&) const = default;
};

struct OpinionSpan {
  TokenSpan span;
  OpinionPolarity polarity = OpinionPolarity::pos;

  bool operator==(const OpinionSpan&) const = default;
  auto operator<=>(const OpinionSpan&) const = default;
};

struct ElsaExample {
  Utterance utterance;
  std::vector<EntityMention> entities;
  std::size_t target = 0;
  Polarity polarity = Polarity::neutral;
  std::vector<OpinionSpan> opinions;
  // Fields present in the source record that this schema does not know about.
  Json extra = Json::object();

  const std::string& id() const { return utterance.id; }
  const EntityMention& target_entity() const { return entities.at(target); }
  bool operator==(const ElsaExample&) const = default;
};

enum class SplitName { train, dev, test };
std::string_view to_string(SplitName s);

struct DatasetSplit {
  SplitName name = SplitName::test;
  std::vector<ElsaExample> examples;

  bool operator==(const DatasetSplit&) const = default;
};

// --- tokenization -----------------------------------------------------------

// Whitespace split, then leading/trailing punctuation peeled into separate
// tokens. Word-internal apostrophes stay attached ("don't", "She's").
std::vector<std::string> tokenize(std::string_view text);

// Byte offset of every token in text, or nullopt when the tokens separated by
// whitespace do not reproduce text.
std::optional<std::vector<std::size_t>> align_tokens(std::string_view text,
                                                     const std::vector<std::string>& tokens);

std::string to_lower(std::string_view s);
bool is_punctuation(std::string_view token);

// Surface covered by tokens[span] as it appears in text.
std::string span_surface(const Utterance& u, const TokenSpan& span);

Utterance make_utterance(std::string id, std::string text);

// --- validation and serialization -------------------------------------------

// Every invariant violation, human readable; empty when the example is valid.
std::vector<std::string> validate_example(const ElsaExample& example);

// Violations of the utterance-level invariants only.
std::vector<std::string> validate_utterance(const Utterance& u);

Json to_json(const ElsaExample& example);
// Throws elsa::Error on schema problems; does not run semantic validation.
ElsaExample example_from_json(const Json& j);

Json to_json(const Utterance& u);
// Accepts either a full example record or a bare {id, text, tokens?} record.
Utterance utterance_from_json(const Json& j);

DatasetSplit load_dataset(const std::filesystem::path& path,
                          SplitName name = SplitName::test);
void save_dataset(const DatasetSplit& split, const std::filesystem::path& path);

std::vector<Utterance> load_utterances(const std::filesystem::path& path);
void save_utterances(const std::vector<Utterance>& utterances,
                     const std::filesystem::path& path);

// --- balanced sampling ------------------------------------------------------

using EntityDetectFn = std::function<std::size_t(const Utterance&)>;
using SentimentFn = std::function<Polarity(const Utterance&)>;

// Draws n_polar utterances that have at least one detected entity and a
// positive or negative predicted sentiment, plus n_neutral utterances that
// have at least one entity and a neutral prediction. The detector returns the
// number of entities found. Output keeps pool order. Throws
// InsufficientCandidates when a bucket is too small.
std::vector<Utterance> sample_balanced(const std::vector<Utterance>& pool,
                                       const EntityDetectFn& entity_detector,
                                       const SentimentFn& sentiment_classifier,
                                       std::size_t n_polar, std::size_t n_neutral,
                                       std::uint64_t seed);

class InsufficientCandidates : public std::runtime_error {
 public:
  InsufficientCandidates(std::size_t polar_found, std::size_t neutral_found,
                         std::size_t polar_wanted, std::size_t neutral_wanted);
  std::size_t polar_found;
  std::size_t neutral_found;
};

// --- synthetic corpus -------------------------------------------------------

// Template slots:
//   {ENT}        target entity
//   {ENT2}       a second, non-target entity (yields an extra neutral example)
//   {OPN}        opinion word about the target; {OPN:cls} restricts the
//                lexicon class (verb, verbs, adj, noun, ...)
//   {DOPN:cls}   distractor opinion word not about any entity (gold O)
//   {NOISE}      zero or more filler phrases
// A template with an {OPN} slot is polar; without one it is neutral.
struct EntityEntry {
  std::string surface;
  EntityType type = EntityType::org;
};

struct OpinionWord {
  std::string word;  // may be several words
  OpinionPolarity polarity = OpinionPolarity::pos;
  std::string slot_class;  // empty matches any {OPN}
};

struct SyntheticOptions {
  double positive_weight = 0.4;
  double negative_weight = 0.3;
  double neutral_weight = 0.3;
  std::vector<std::string> fillers;
  std::size_t min_fillers = 0;  // per {NOISE} slot
  std::size_t max_fillers = 2;
  bool emit_secondary_targets = true;
  std::string id_prefix = "syn";
  SplitName split = SplitName::train;
};

DatasetSplit generate_synthetic_corpus(const std::vector<std::string>& templates,
                                       const std::vector<EntityEntry>& entity_list,
                                       const std::vector<OpinionWord>& opinion_lexicon,
                                       std::size_t n, std::uint64_t seed,
                                       const SyntheticOptions& options = {});

// Reference assets for desk-scale experiments.
std::vector<std::string> default_templates();
std::vector<EntityEntry> default_entities();
std::vector<OpinionWord> default_opinion_lexicon();
std::vector<std::string> default_fillers();
SyntheticOptions default_synthetic_options();

}  // namespace elsa
