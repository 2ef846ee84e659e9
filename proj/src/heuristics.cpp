#include "elsa/heuristics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "elsa/error.hpp"

namespace elsa::heuristics {

namespace {

constexpr std::array<std::string_view, 11> kPosNames = {"VERB", "AUX", "ADJ", "NOUN", "ADV", "ADP",
                                                        "COMP", "DET", "PRON", "PUNCT", "OTHER"};
constexpr std::array<std::string_view, 8> kRuleNames = {"V1", "V2", "V3", "A1", "A2", "N1", "N2", "N3"};

}  // namespace

std::string_view to_string(Pos p) { return kPosNames[static_cast<std::size_t>(p)]; }

std::optional<Pos> parse_pos(std::string_view s) {
  for (std::size_t i = 0; i < kPosNames.size(); ++i)
    if (kPosNames[i] == s) return static_cast<Pos>(i);
  return std::nullopt;
}

std::string_view to_string(RuleId r) { return kRuleNames[static_cast<std::size_t>(r)]; }

std::string_view to_string(LexClass c) {
  switch (c) {
    case LexClass::verb: return "verb";
    case LexClass::adjective: return "adjective";
    case LexClass::noun: return "noun";
  }
  return "?";
}

std::optional<LexClass> parse_lex_class(std::string_view s) {
  if (s == "verb") return LexClass::verb;
  if (s == "adjective" || s == "adj") return LexClass::adjective;
  if (s == "noun") return LexClass::noun;
  return std::nullopt;
}

// --- lexicon ---------------------------------------------------------------------

void SentimentLexicon::add(const LexiconEntry& entry) {
  const std::string w = to_lower(entry.word);
  if (w.empty()) throw Error("empty lexicon word");
  if (!entries_.emplace(std::make_pair(w, entry.pos_class), entry.polarity).second)
    throw Error("duplicate lexicon key (" + w + ", " + std::string(to_string(entry.pos_class)) + ")");
}

std::optional<OpinionPolarity> SentimentLexicon::find(const std::string& word, LexClass c) const {
  auto it = entries_.find({to_lower(word), c});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::set<LexClass> SentimentLexicon::classes(const std::string& word) const {
  std::set<LexClass> out;
  const std::string w = to_lower(word);
  for (auto c : {LexClass::verb, LexClass::adjective, LexClass::noun})
    if (entries_.count({w, c})) out.insert(c);
  return out;
}

std::vector<LexiconEntry> SentimentLexicon::entries() const {
  std::vector<LexiconEntry> out;
  for (const auto& [key, pol] : entries_) out.push_back({key.first, key.second, pol});
  return out;
}

SentimentLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  SentimentLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() != 3)
      throw ParseError(path.string(), lineno, "expected word, pos_class, polarity");
    auto cls = parse_lex_class(fields[1]);
    if (!cls) throw ParseError(path.string(), lineno, "unknown pos class '" + fields[1] + "'");
    auto pol = parse_opinion_polarity(fields[2]);
    if (!pol) throw ParseError(path.string(), lineno, "unknown polarity '" + fields[2] + "'");
    try {
      lex.add({fields[0], *cls, *pol});
    } catch (const Error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return lex;
}

// --- POS tagging -------------------------------------------------------------------

namespace {

const std::unordered_map<std::string, Pos>& closed_class() {
  static const std::unordered_map<std::string, Pos> table = [] {
    std::unordered_map<std::string, Pos> t;
    auto put = [&](Pos p, std::initializer_list<const char*> words) {
      for (const char* w : words) t[w] = p;
    };
    put(Pos::AUX, {"is", "am", "are", "was", "were", "be", "been", "being", "has", "have", "had", "do",
                   "does", "did", "will", "would", "can", "could", "should", "shall", "may", "might",
                   "must", "'s", "'re", "'m", "don't", "doesn't", "didn't", "isn't", "wasn't", "aren't",
                   "weren't", "can't", "won't", "wouldn't", "couldn't", "shouldn't", "haven't",
                   "hasn't"});
    put(Pos::DET, {"a", "an", "the", "my", "your", "his", "her", "our", "their", "its", "some", "any",
                   "every", "each", "no", "another", "all", "both", "either", "neither"});
    put(Pos::PRON, {"i", "me", "you", "he", "she", "it", "we", "they", "him", "us", "them", "myself",
                    "yourself", "himself", "herself", "itself", "ourselves", "themselves", "i'm",
                    "you're", "he's", "she's", "it's", "we're", "they're", "i've", "you've", "we've",
                    "they've", "i'd", "i'll", "you'll", "it'll", "that's", "there's", "what's",
                    "everyone", "everybody", "someone", "somebody", "something", "anything",
                    "nothing", "everything", "mine", "yours", "who", "what", "guys"});
    put(Pos::ADP, {"of", "for", "with", "at", "on", "in", "from", "by", "about", "to", "into", "onto",
                   "over", "under", "after", "before", "through", "during", "without", "within",
                   "against", "towards", "toward", "via", "than", "across", "since", "until"});
    put(Pos::COMP, {"which", "whether", "because", "if", "although", "though", "while", "whereas"});
    put(Pos::ADV, {"really", "very", "so", "too", "quite", "always", "never", "just", "also", "lately",
                   "yesterday", "today", "tomorrow", "honestly", "totally", "pretty", "still", "even",
                   "not", "n't", "again", "already", "almost", "often", "sometimes", "usually", "here",
                   "there", "now", "then", "well", "maybe", "ever", "soon", "later", "how", "why",
                   "when", "where", "as", "lot", "extremely", "absolutely", "super"});
    put(Pos::OTHER, {"and", "but", "or", "nor", "um", "uh", "yeah", "oh", "okay", "ok", "yes", "hey",
                     "hmm"});
    return t;
  }();
  return table;
}

const std::unordered_map<std::string, Pos>& open_class() {
  static const std::unordered_map<std::string, Pos> table = [] {
    std::unordered_map<std::string, Pos> t;
    auto put = [&](Pos p, std::initializer_list<const char*> words) {
      for (const char* w : words) t[w] = p;
    };
    put(Pos::VERB, {"work", "works", "worked", "use", "uses", "used", "make", "makes", "made", "call",
                    "called", "calls", "try", "tried", "tries", "buy", "bought", "get", "gets", "got",
                    "go", "goes", "went", "come", "came", "say", "said", "tell", "told", "send", "sent",
                    "arrive", "arrived", "keep", "keeps", "pay", "paid", "think", "thought", "know",
                    "want", "wanted", "need", "needed", "find", "found", "order", "install",
                    "navigate", "mean", "guess", "see", "saw", "look", "looks", "feel", "felt",
                    "dropped", "switched", "cancel", "help", "take", "took", "give", "gave"});
    put(Pos::NOUN, {"time", "account", "orders", "email", "phone", "app", "music", "experience",
                    "friend", "sister", "brother", "support", "call", "hold", "week", "month",
                    "monday", "yogurt", "thing", "stuff", "service", "store", "price", "bill",
                    "plan", "card", "package", "delivery", "minute", "minutes", "day", "days"});
    put(Pos::ADJ, {"good", "bad", "hard", "difficult", "easy", "new", "old", "mobile", "open", "last",
                   "other", "same", "total", "big", "small", "long", "short", "nice", "fine",
                   "little", "whole", "first", "next", "few", "many", "much", "more", "most",
                   "installed", "still"});
    return t;
  }();
  return table;
}

bool ends_with(const std::string& s, std::string_view suf) {
  return s.size() > suf.size() + 1 && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

Pos by_suffix(const std::string& w) {
  if (ends_with(w, "ly")) return Pos::ADV;
  for (auto suf : {"ness", "tion", "sion", "ment", "ity", "ship", "ism", "red", "ance", "ence"})
    if (ends_with(w, suf)) return Pos::NOUN;
  for (auto suf : {"ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ish"})
    if (ends_with(w, suf)) return Pos::ADJ;
  for (auto suf : {"ing", "ed"})
    if (ends_with(w, suf)) return Pos::VERB;
  return Pos::NOUN;
}

Pos from_class(LexClass c) {
  switch (c) {
    case LexClass::verb: return Pos::VERB;
    case LexClass::adjective: return Pos::ADJ;
    case LexClass::noun: return Pos::NOUN;
  }
  return Pos::OTHER;
}

bool is_number(const std::string& w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
    return std::isdigit(c) || c == '.' || c == ',' || c == ':' || c == '-';
  });
}

}  // namespace

std::vector<PosTaggedToken> ReferencePosTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<PosTaggedToken> out;
  out.reserve(tokens.size());
  const auto& closed = closed_class();
  const auto& open = open_class();

  // A token's tag ignoring left context; used for lookahead.
  auto context_free = [&](std::size_t i) -> Pos {
    if (i >= tokens.size()) return Pos::PUNCT;
    if (is_punctuation(tokens[i])) return Pos::PUNCT;
    const std::string w = to_lower(tokens[i]);
    if (auto it = closed.find(w); it != closed.end()) return it->second;
    auto cls = lexicon_.classes(w);
    if (!cls.empty()) return cls.count(LexClass::verb) ? Pos::VERB : from_class(*cls.begin());
    if (auto it = open.find(w); it != open.end()) return it->second;
    if (std::isupper(static_cast<unsigned char>(tokens[i][0]))) return Pos::NOUN;
    return by_suffix(w);
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    const std::string w = to_lower(tok);
    const Pos prev = out.empty() ? Pos::PUNCT : out.back().tag;
    Pos tag;
    if (is_punctuation(tok)) {
      tag = Pos::PUNCT;
    } else if (w == "that" || w == "this" || w == "these" || w == "those") {
      const Pos next = context_free(i + 1);
      const bool pronoun = next == Pos::AUX || next == Pos::VERB || next == Pos::PUNCT;
      tag = pronoun ? Pos::PRON : (w == "that" ? Pos::COMP : Pos::DET);
    } else if (auto it = closed.find(w); it != closed.end()) {
      tag = it->second;
    } else if (auto cls = lexicon_.classes(w); !cls.empty()) {
      if (cls.size() == 1) {
        tag = from_class(*cls.begin());
      } else if ((prev == Pos::DET || prev == Pos::ADJ) && cls.count(LexClass::noun)) {
        tag = Pos::NOUN;
      } else if (prev == Pos::AUX && cls.count(LexClass::adjective)) {
        tag = Pos::ADJ;
      } else if (cls.count(LexClass::verb)) {
        tag = Pos::VERB;
      } else {
        tag = from_class(*cls.begin());
      }
    } else if (auto it = open.find(w); it != open.end()) {
      tag = it->second;
      if (tag == Pos::VERB && (prev == Pos::DET || prev == Pos::ADJ)) tag = Pos::NOUN;
    } else if (is_number(w)) {
      tag = Pos::OTHER;
    } else if (std::isupper(static_cast<unsigned char>(tok[0])) || std::isdigit(static_cast<unsigned char>(tok[0]))) {
      tag = Pos::NOUN;
    } else {
      tag = by_suffix(w);
    }
    out.push_back({tok, tag});
  }
  return out;
}

std::vector<PosTaggedToken> pos_tag(const std::vector<std::string>& tokens, const PosTagger& tagger) {
  auto out = tagger.tag(tokens);
  if (out.size() != tokens.size())
    throw Error("pos tagger returned " + std::to_string(out.size()) + " tags for " +
                std::to_string(tokens.size()) + " tokens");
  return out;
}

// --- modifiers ------------------------------------------------------------------------

ModifierConfig modifier_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error("modifier config must be an object");
  ModifierConfig c;
  auto read = [&](const char* key, std::set<std::string>& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_array()) throw Error(std::string("modifier config '") + key + "' must be a list");
    dst.clear();
    for (const auto& w : j.at(key)) {
      if (!w.is_string()) throw Error(std::string("modifier config '") + key + "' must hold strings");
      dst.insert(to_lower(w.get<std::string>()));
    }
  };
  read("intensifiers", c.intensifiers);
  read("complementizers", c.complementizers);
  return c;
}

ModifierConfig load_modifier_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return modifier_config_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

// --- matching ---------------------------------------------------------------------------

namespace {

enum class Slot { ENT, SV, SA, SN, ADP, OF_FOR, AUX };

struct Rule {
  RuleId id;
  std::vector<Slot> slots;
};

const std::vector<Rule>& rules() {
  static const std::vector<Rule> r = {
      {RuleId::V1, {Slot::SV, Slot::ENT}},
      {RuleId::V2, {Slot::SV, Slot::ADP, Slot::ENT}},
      {RuleId::V3, {Slot::ENT, Slot::SV}},
      {RuleId::A1, {Slot::SA, Slot::ENT}},
      {RuleId::A2, {Slot::SA, Slot::OF_FOR, Slot::ENT}},
      {RuleId::N1, {Slot::ENT, Slot::SN}},
      {RuleId::N2, {Slot::SN, Slot::ADP, Slot::ENT}},
      {RuleId::N3, {Slot::ENT, Slot::AUX, Slot::SN}},
  };
  return r;
}

struct Matcher {
  const std::vector<std::string>& tokens;
  const std::vector<PosTaggedToken>& pos;
  const std::vector<EntityMention>& entities;
  const std::vector<cnn::CandidateOpinion>& candidates;
  const SentimentLexicon& lexicon;
  std::size_t max_gap;
  const ModifierConfig& mods;

  int n() const { return static_cast<int>(tokens.size()); }

  bool in_entity(int i) const {
    return std::any_of(entities.begin(), entities.end(), [&](const EntityMention& e) { return e.span.contains(i); });
  }

  bool is_modifier(int i) const {
    if (in_entity(i)) return false;
    const std::string w = to_lower(tokens[static_cast<std::size_t>(i)]);
    if (mods.intensifiers.count(w) || mods.complementizers.count(w)) return true;
    const Pos p = pos[static_cast<std::size_t>(i)].tag;
    return p == Pos::ADJ || p == Pos::DET || p == Pos::PRON;
  }

  bool is_leading_modifier(int i) const {
    if (in_entity(i)) return false;
    return mods.intensifiers.count(to_lower(tokens[static_cast<std::size_t>(i)])) ||
           pos[static_cast<std::size_t>(i)].tag == Pos::ADJ;
  }

  // Polarity of token i as a sentiment word of class c, if it qualifies.
  std::optional<OpinionPolarity> sentiment(int i, LexClass c) const {
    if (in_entity(i)) return std::nullopt;
    const auto& tok = tokens[static_cast<std::size_t>(i)];
    const Pos tag = pos[static_cast<std::size_t>(i)].tag;
    if (auto pol = lexicon.find(tok, c)) {
      // An ambiguous lexicon word takes the class its tag selects.
      if (lexicon.classes(tok).size() == 1 || tag == from_class(c)) return pol;
    }
    if (tag != from_class(c)) return std::nullopt;
    for (const auto& cand : candidates) {
      if (cand.index != i) continue;
      if (cand.polarity_hint == Polarity::positive) return OpinionPolarity::pos;
      if (cand.polarity_hint == Polarity::negative) return OpinionPolarity::neg;
    }
    return std::nullopt;
  }

  // Whether token i fills a non-entity slot; sets pol for sentiment slots.
  bool fills(Slot s, int i, std::optional<OpinionPolarity>& pol) const {
    if (i < 0 || i >= n()) return false;
    switch (s) {
      case Slot::SV: return (pol = sentiment(i, LexClass::verb)).has_value();
      case Slot::SA: return (pol = sentiment(i, LexClass::adjective)).has_value();
      case Slot::SN: return (pol = sentiment(i, LexClass::noun)).has_value();
      case Slot::ADP: return !in_entity(i) && pos[static_cast<std::size_t>(i)].tag == Pos::ADP;
      case Slot::OF_FOR: {
        const std::string w = to_lower(tokens[static_cast<std::size_t>(i)]);
        return !in_entity(i) && (w == "of" || w == "for");
      }
      case Slot::AUX: return !in_entity(i) && pos[static_cast<std::size_t>(i)].tag == Pos::AUX;
      case Slot::ENT: return false;
    }
    return false;
  }

  struct Partial {
    int opinion = -1;  // token index of the sentiment slot
    std::optional<OpinionPolarity> polarity;
    std::vector<int> modifiers;
    int edge = 0;  // first index of the leftmost slot (left side) or one past the rightmost (right side)
  };

  // Every way to place slots[from..] walking right from position `at`.
  void extend_right(const std::vector<Slot>& slots, std::size_t k, Partial cur, std::vector<Partial>& out) const {
    if (k == slots.size()) {
      out.push_back(std::move(cur));
      return;
    }
    for (std::size_t g = 0; g <= max_gap; ++g) {
      const int i = cur.edge + static_cast<int>(g);
      if (i >= n()) break;
      if (g > 0 && !is_modifier(i - 1)) break;
      std::optional<OpinionPolarity> pol;
      if (!fills(slots[k], i, pol)) continue;
      Partial next = cur;
      for (int m = cur.edge; m < i; ++m) next.modifiers.push_back(m);
      if (pol) {
        next.opinion = i;
        next.polarity = pol;
      }
      next.edge = i + 1;
      extend_right(slots, k + 1, std::move(next), out);
    }
  }

  // Same, walking left: slots[k], slots[k-1], ... end just before `edge`.
  void extend_left(const std::vector<Slot>& slots, std::size_t k, Partial cur, std::vector<Partial>& out) const {
    if (k == 0) {
      out.push_back(std::move(cur));
      return;
    }
    for (std::size_t g = 0; g <= max_gap; ++g) {
      const int i = cur.edge - 1 - static_cast<int>(g);
      if (i < 0) break;
      if (g > 0 && !is_modifier(i + 1)) break;
      std::optional<OpinionPolarity> pol;
      if (!fills(slots[k - 1], i, pol)) continue;
      Partial next = cur;
      for (int m = i + 1; m < cur.edge; ++m) next.modifiers.push_back(m);
      if (pol) {
        next.opinion = i;
        next.polarity = pol;
      }
      next.edge = i;
      extend_left(slots, k - 1, std::move(next), out);
    }
  }
};

}  // namespace

std::vector<PatternMatch> match_patterns(const std::vector<std::string>& tokens,
                                         const std::vector<PosTaggedToken>& pos,
                                         const std::vector<EntityMention>& entities,
                                         const std::vector<cnn::CandidateOpinion>& candidates,
                                         const SentimentLexicon& lexicon, std::size_t max_gap,
                                         const ModifierConfig& modifiers) {
  if (pos.size() != tokens.size()) throw Error("pos tags do not align with tokens");
  const int n = static_cast<int>(tokens.size());
  for (const auto& e : entities)
    if (e.span.start < 0 || e.span.end > n || e.span.start >= e.span.end) throw Error("entity span out of bounds");

  Matcher m{tokens, pos, entities, candidates, lexicon, max_gap, modifiers};
  std::vector<PatternMatch> out;
  for (const auto& ent : entities) {
    for (const auto& rule : rules()) {
      const auto ent_at = static_cast<std::size_t>(
          std::find(rule.slots.begin(), rule.slots.end(), Slot::ENT) - rule.slots.begin());
      std::vector<Slot> left(rule.slots.begin(), rule.slots.begin() + static_cast<long>(ent_at));
      std::vector<Slot> right(rule.slots.begin() + static_cast<long>(ent_at) + 1, rule.slots.end());

      std::vector<Matcher::Partial> lefts, rights;
      Matcher::Partial seed;
      seed.edge = ent.span.start;
      m.extend_left(left, left.size(), seed, lefts);
      seed.edge = ent.span.end;
      m.extend_right(right, 0, seed, rights);

      std::set<int> seen;  // one match per opinion token; smallest gaps win
      for (const auto& l : lefts) {
        for (const auto& r : rights) {
          const int op = l.opinion >= 0 ? l.opinion : r.opinion;
          const auto pol = l.opinion >= 0 ? l.polarity : r.polarity;
          if (op < 0 || !pol || !seen.insert(op).second) continue;
          PatternMatch pm;
          pm.rule = rule.id;
          pm.entity = ent;
          pm.opinion = {{op, op + 1}, *pol};
          pm.modifiers = l.modifiers;
          pm.modifiers.insert(pm.modifiers.end(), r.modifiers.begin(), r.modifiers.end());
          for (int i = l.edge - 1; i >= 0 && m.is_leading_modifier(i); --i) pm.modifiers.push_back(i);
          std::sort(pm.modifiers.begin(), pm.modifiers.end());
          out.push_back(std::move(pm));
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const PatternMatch& a, const PatternMatch& b) {
    if (a.entity.span.start != b.entity.span.start) return a.entity.span.start < b.entity.span.start;
    if (a.rule != b.rule) return a.rule < b.rule;
    return a.opinion.span.start < b.opinion.span.start;
  });
  return out;
}

}  // namespace elsa::heuristics
