#pragma once

// End-to-end prediction along the tagger and CNN+heuristics paths, rollups of
// entity sentiment over time, and the command-line front end.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "elsa/cnn.hpp"
#include "elsa/corpus.hpp"
#include "elsa/eval.hpp"
#include "elsa/heuristics.hpp"
#include "elsa/ner.hpp"
#include "elsa/tagger.hpp"

namespace elsa::pipeline {

enum class PredictionPath { tagger, cnn_heuristics };

std::string_view to_string(PredictionPath p);
std::optional<PredictionPath> parse_prediction_path(std::string_view s);

struct EntitySentimentRecord {
  std::string utterance_id;
  EntityMention entity;
  Polarity polarity = Polarity::neutral;
  std::vector<OpinionSpan> opinions;  // empty when neutral
  PredictionPath path = PredictionPath::tagger;
  std::optional<std::string> call_id;
  std::optional<std::string> timestamp;

  bool operator==(const EntitySentimentRecord&) const = default;
};

Json to_json(const EntitySentimentRecord& r);
EntitySentimentRecord record_from_json(const Json& j);
std::vector<EntitySentimentRecord> load_records(const std::filesystem::path& path);

// --- tagger path ---------------------------------------------------------------

// One marking pass and one record per entity, in entity order.
std::vector<EntitySentimentRecord> predict_tagger_entities(const Utterance& u,
                                                           const std::vector<EntityMention>& entities,
                                                           const tagger::TaggerModel& model);

std::vector<EntitySentimentRecord> predict_tagger_path(const Utterance& u, const ner::EntityDetector& detector,
                                                       const tagger::TaggerModel& model);

// --- CNN + heuristics path -----------------------------------------------------------

struct CnnPathOptions {
  heuristics::ModifierConfig modifiers;
  int ig_steps = 50;
  std::size_t max_gap = heuristics::kDefaultMaxGap;
  cnn::CandidateConfig candidates = cnn::default_candidate_config();
};

// What the path did for one utterance; handy for inspection and tests.
struct CnnPathTrace {
  Polarity utterance_class = Polarity::neutral;
  bool attributed = false;
  std::vector<cnn::CandidateOpinion> candidates;
  std::vector<heuristics::PatternMatch> matches;
};

struct CnnPathModels {
  const cnn::TextCnn& cnn;
  const heuristics::PosTagger& pos_tagger;
  const heuristics::SentimentLexicon& lexicon;
};

// Entities with no matched pattern, and every entity of a neutral-classified
// utterance, get a neutral record. A matched entity takes the majority
// polarity of its matches; a tie goes to the opinion nearest the entity, then
// to negative.
std::vector<EntitySentimentRecord> predict_cnn_entities(const Utterance& u,
                                                        const std::vector<EntityMention>& entities,
                                                        const CnnPathModels& models,
                                                        const CnnPathOptions& options = {},
                                                        CnnPathTrace* trace = nullptr);

std::vector<EntitySentimentRecord> predict_cnn_path(const Utterance& u, const ner::EntityDetector& detector,
                                                    const CnnPathModels& models,
                                                    const CnnPathOptions& options = {},
                                                    CnnPathTrace* trace = nullptr);

// --- aggregation ------------------------------------------------------------------

enum class Granularity { day, week, month };

std::string_view to_string(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view s);

inline constexpr const char* kUndated = "undated";

// Bucket label for an ISO-8601 timestamp: YYYY-MM-DD, YYYY-Www (ISO week) or
// YYYY-MM. Missing or unreadable dates map to kUndated.
std::string period_of(const std::optional<std::string>& timestamp, Granularity g);

struct AggregatedInsight {
  std::string entity;  // case-folded surface
  std::string period;
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t neutral = 0;

  std::size_t total() const { return positive + negative + neutral; }
  double net() const;
  bool operator==(const AggregatedInsight&) const = default;
};

Json to_json(const AggregatedInsight& a);

// Sorted by (entity, period).
std::vector<AggregatedInsight> aggregate(const std::vector<EntitySentimentRecord>& records, Granularity g);

// --- evaluation join -------------------------------------------------------------------

// Pairs each gold example with the record for its target (same utterance id and
// entity span). Examples without a record count as neutral with no opinions.
// Throws ValidationError naming the id of a record whose utterance is not in gold.
std::vector<eval::Prediction> join_predictions(const std::vector<ElsaExample>& gold,
                                               const std::vector<EntitySentimentRecord>& records);

// --- CLI --------------------------------------------------------------------------------

// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elsa::pipeline
