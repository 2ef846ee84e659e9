#pragma once

// Rule engine that links sentiment words to entities through verb-, adjective-
// and noun-based linear patterns over coarse POS tags.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "elsa/cnn.hpp"
#include "elsa/corpus.hpp"

namespace elsa::heuristics {

enum class Pos { VERB, AUX, ADJ, NOUN, ADV, ADP, COMP, DET, PRON, PUNCT, OTHER };

std::string_view to_string(Pos p);
std::optional<Pos> parse_pos(std::string_view s);

struct PosTaggedToken {
  std::string word;
  Pos tag = Pos::OTHER;
  bool operator==(const PosTaggedToken&) const = default;
};

enum class LexClass { verb, adjective, noun };

std::string_view to_string(LexClass c);
std::optional<LexClass> parse_lex_class(std::string_view s);  // also accepts adj

struct LexiconEntry {
  std::string word;  // lowercased
  LexClass pos_class = LexClass::verb;
  OpinionPolarity polarity = OpinionPolarity::pos;
};

class SentimentLexicon {
 public:
  // Throws elsa::Error naming the key when (word, class) is already present.
  void add(const LexiconEntry& entry);
  std::optional<OpinionPolarity> find(const std::string& word, LexClass c) const;
  std::set<LexClass> classes(const std::string& word) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<LexiconEntry> entries() const;

 private:
  std::map<std::pair<std::string, LexClass>, OpinionPolarity> entries_;
};

// One `word<TAB>pos_class<TAB>polarity` entry per line (any whitespace
// accepted); blank lines and '#' comments are skipped.
SentimentLexicon load_lexicon(const std::filesystem::path& path);

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<PosTaggedToken> tag(const std::vector<std::string>& tokens) const = 0;
};

// Closed-class word lists, lexicon word classes with a little context, a small
// open-class dictionary and suffix rules.
class ReferencePosTagger : public PosTagger {
 public:
  ReferencePosTagger() = default;
  explicit ReferencePosTagger(const SentimentLexicon& lexicon) : lexicon_(lexicon) {}
  std::vector<PosTaggedToken> tag(const std::vector<std::string>& tokens) const override;

 private:
  SentimentLexicon lexicon_;
};

std::vector<PosTaggedToken> pos_tag(const std::vector<std::string>& tokens, const PosTagger& tagger);

struct ModifierConfig {
  std::set<std::string> intensifiers = {"really", "very", "so"};
  std::set<std::string> complementizers = {"that", "which"};
};

// {"intensifiers": [...], "complementizers": [...]}; a missing key keeps the default.
ModifierConfig modifier_config_from_json(const Json& j);
ModifierConfig load_modifier_config(const std::filesystem::path& path);

enum class RuleId { V1, V2, V3, A1, A2, N1, N2, N3 };

std::string_view to_string(RuleId r);

struct PatternMatch {
  RuleId rule = RuleId::V1;
  EntityMention entity;
  OpinionSpan opinion;          // the sentiment word
  std::vector<int> modifiers;   // consumed modifier token indices, ascending
  bool operator==(const PatternMatch&) const = default;
};

inline constexpr std::size_t kDefaultMaxGap = 3;

// Each match instantiates one rule with every slot adjacent up to gaps of at
// most max_gap modifier tokens. A contiguous run of intensifiers or adjectives
// directly before the first slot is consumed as well; material after the last
// slot is ignored. Sorted by (entity start, rule, opinion start).
std::vector<PatternMatch> match_patterns(const std::vector<std::string>& tokens,
                                         const std::vector<PosTaggedToken>& pos,
                                         const std::vector<EntityMention>& entities,
                                         const std::vector<cnn::CandidateOpinion>& candidates,
                                         const SentimentLexicon& lexicon,
                                         std::size_t max_gap = kDefaultMaxGap,
                                         const ModifierConfig& modifiers = {});

}  // namespace elsa::heuristics
