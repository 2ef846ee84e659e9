#include "elsa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "elsa/error.hpp"

namespace elsa {

namespace {

constexpr std::string_view kPeelChars = ".,!?;:\"()[]{}";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool peelable(char c) { return kPeelChars.find(c) != std::string_view::npos; }

}  // namespace

std::string_view to_string(EntityType t) { return t == EntityType::org ? "ORG" : "PRODUCT"; }

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::positive:
      return "positive";
    case Polarity::negative:
      return "negative";
    case Polarity::neutral:
      return "neutral";
  }
  return "neutral";
}

std::string_view to_string(OpinionPolarity p) { return p == OpinionPolarity::pos ? "POS" : "NEG"; }

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::train:
      return "train";
    case SplitName::dev:
      return "dev";
    case SplitName::test:
      return "test";
  }
  return "test";
}

std::optional<EntityType> parse_entity_type(std::string_view s) {
  if (s == "ORG") return EntityType::org;
  if (s == "PRODUCT") return EntityType::product;
  return std::nullopt;
}

std::optional<Polarity> parse_polarity(std::string_view s) {
  if (s == "positive") return Polarity::positive;
  if (s == "negative") return Polarity::negative;
  if (s == "neutral") return Polarity::neutral;
  return std::nullopt;
}

std::optional<OpinionPolarity> parse_opinion_polarity(std::string_view s) {
  if (s == "POS") return OpinionPolarity::pos;
  if (s == "NEG") return OpinionPolarity::neg;
  return std::nullopt;
}

int token_distance(const TokenSpan& a, const TokenSpan& b) {
  if (a.overlaps(b)) return 0;
  if (a.end <= b.start) return b.start - (a.end - 1);
  return a.start - (b.end - 1);
}

// --- tokenization -----------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j == i) break;
    std::string_view chunk = text.substr(i, j - i);
    std::size_t lo = 0;
    std::size_t hi = chunk.size();
    while (lo < hi && peelable(chunk[lo])) {
      tokens.emplace_back(1, chunk[lo]);
      ++lo;
    }
    std::vector<std::string> trailing;
    while (hi > lo && peelable(chunk[hi - 1])) {
      trailing.emplace_back(1, chunk[hi - 1]);
      --hi;
    }
    if (hi > lo) tokens.emplace_back(chunk.substr(lo, hi - lo));
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
    i = j;
  }
  return tokens;
}

std::optional<std::vector<std::size_t>> align_tokens(std::string_view text,
                                                     const std::vector<std::string>& tokens) {
  std::vector<std::size_t> offsets;
  offsets.reserve(tokens.size());
  std::size_t pos = 0;
  for (const auto& tok : tokens) {
    if (tok.empty()) return std::nullopt;
    if (std::any_of(tok.begin(), tok.end(), is_space)) return std::nullopt;
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (text.compare(pos, tok.size(), tok) != 0) return std::nullopt;
    offsets.push_back(pos);
    pos += tok.size();
  }
  while (pos < text.size() && is_space(text[pos])) ++pos;
  if (pos != text.size()) return std::nullopt;
  return offsets;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(),
                     [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; });
}

std::string span_surface(const Utterance& u, const TokenSpan& span) {
  if (span.start < 0 || span.end > static_cast<int>(u.tokens.size()) || span.start >= span.end)
    return {};
  if (auto offsets = align_tokens(u.text, u.tokens)) {
    std::size_t begin = (*offsets)[span.start];
    std::size_t last = static_cast<std::size_t>(span.end - 1);
    std::size_t end = (*offsets)[last] + u.tokens[last].size();
    return u.text.substr(begin, end - begin);
  }
  std::string out;
  for (int i = span.start; i < span.end; ++i) {
    if (!out.empty()) out += ' ';
    out += u.tokens[i];
  }
  return out;
}

Utterance make_utterance(std::string id, std::string text) {
  Utterance u;
  u.id = std::move(id);
  u.tokens = tokenize(text);
  u.text = std::move(text);
  return u;
}

// --- validation -------------------------------------------------------------

namespace {

std::string describe(const TokenSpan& s) {
  return "[" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
}

std::string joined(const Utterance& u, const TokenSpan& s) {
  std::string out;
  for (int i = s.start; i < s.end; ++i) {
    if (!out.empty()) out += ' ';
    out += u.tokens[i];
  }
  return out;
}

bool in_bounds(const TokenSpan& s, std::size_t n) {
  return s.start >= 0 && s.start < s.end && s.end <= static_cast<int>(n);
}

}  // namespace

std::vector<std::string> validate_utterance(const Utterance& u) {
  std::vector<std::string> out;
  if (u.id.empty()) out.push_back("utterance id is empty");
  if (u.tokens.empty()) {
    out.push_back("tokens are empty");
    return out;
  }
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    if (u.tokens[i] == kMarkerToken)
      out.push_back("reserved token '_NE_' at index " + std::to_string(i));
  }
  if (!align_tokens(u.text, u.tokens)) out.push_back("tokens do not reproduce text");
  return out;
}

std::vector<std::string> validate_example(const ElsaExample& ex) {
  std::vector<std::string> out = validate_utterance(ex.utterance);
  const std::size_t n = ex.utterance.tokens.size();

  for (std::size_t i = 0; i < ex.entities.size(); ++i) {
    const auto& e = ex.entities[i];
    if (!in_bounds(e.span, n)) {
      out.push_back("entity " + std::to_string(i) + " span " + describe(e.span) +
                    " out of bounds for " + std::to_string(n) + " tokens");
      continue;
    }
    if (e.surface != span_surface(ex.utterance, e.span) && e.surface != joined(ex.utterance, e.span))
      out.push_back("entity " + std::to_string(i) + " surface '" + e.surface +
                    "' does not match tokens '" + joined(ex.utterance, e.span) + "'");
    for (std::size_t j = 0; j < i; ++j) {
      if (in_bounds(ex.entities[j].span, n) && ex.entities[j].span.overlaps(e.span))
        out.push_back("entities " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
    }
  }
  if (ex.target >= ex.entities.size())
    out.push_back("target index " + std::to_string(ex.target) + " out of range for " +
                  std::to_string(ex.entities.size()) + " entities");

  for (std::size_t i = 0; i < ex.opinions.size(); ++i) {
    const auto& o = ex.opinions[i];
    if (!in_bounds(o.span, n)) {
      out.push_back("opinion " + std::to_string(i) + " span " + describe(o.span) +
                    " out of bounds for " + std::to_string(n) + " tokens");
      continue;
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (in_bounds(ex.opinions[j].span, n) && ex.opinions[j].span.overlaps(o.span))
        out.push_back("opinion spans " + std::to_string(j) + " " + describe(ex.opinions[j].span) +
                      " and " + std::to_string(i) + " " + describe(o.span) + " overlap");
    }
  }
  if (ex.polarity == Polarity::neutral && !ex.opinions.empty())
    out.push_back("neutral example has opinion spans");
  if (ex.polarity != Polarity::neutral && ex.opinions.empty())
    out.push_back("polar example has no opinion spans");
  return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

const std::set<std::string, std::less<>> kKnownFields = {
    "id",       "text",     "tokens",  "entities", "target",
    "polarity", "opinions", "call_id", "timestamp"};

const Json& require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(std::string("missing field '") + key + "'");
  return *it;
}

TokenSpan span_from_json(const Json& j) {
  return TokenSpan{require(j, "start").get<int>(), require(j, "end").get<int>()};
}

void read_utterance_fields(const Json& j, Utterance& u) {
  u.id = require(j, "id").get<std::string>();
  u.text = require(j, "text").get<std::string>();
  if (auto it = j.find("tokens"); it != j.end())
    u.tokens = it->get<std::vector<std::string>>();
  else
    u.tokens = tokenize(u.text);
  if (auto it = j.find("call_id"); it != j.end() && !it->is_null())
    u.call_id = it->get<std::string>();
  if (auto it = j.find("timestamp"); it != j.end() && !it->is_null())
    u.timestamp = it->get<std::string>();
}

}  // namespace

Json to_json(const ElsaExample& ex) {
  Json j;
  j["id"] = ex.utterance.id;
  j["text"] = ex.utterance.text;
  j["tokens"] = ex.utterance.tokens;
  Json ents = Json::array();
  for (const auto& e : ex.entities) {
    ents.push_back({{"start", e.span.start},
                    {"end", e.span.end},
                    {"type", std::string(to_string(e.type))},
                    {"surface", e.surface}});
  }
  j["entities"] = std::move(ents);
  j["target"] = ex.target;
  j["polarity"] = std::string(to_string(ex.polarity));
  Json ops = Json::array();
  for (const auto& o : ex.opinions) {
    ops.push_back({{"start", o.span.start},
                   {"end", o.span.end},
                   {"polarity", std::string(to_string(o.polarity))}});
  }
  j["opinions"] = std::move(ops);
  if (ex.utterance.call_id) j["call_id"] = *ex.utterance.call_id;
  if (ex.utterance.timestamp) j["timestamp"] = *ex.utterance.timestamp;
  for (const auto& [key, value] : ex.extra.items()) j[key] = value;
  return j;
}

ElsaExample example_from_json(const Json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  ElsaExample ex;
  read_utterance_fields(j, ex.utterance);
  for (const auto& e : require(j, "entities")) {
    EntityMention m;
    m.span = span_from_json(e);
    auto type = parse_entity_type(require(e, "type").get<std::string>());
    if (!type) throw Error("unknown entity type '" + e["type"].get<std::string>() + "'");
    m.type = *type;
    if (auto it = e.find("surface"); it != e.end())
      m.surface = it->get<std::string>();
    else
      m.surface = span_surface(ex.utterance, m.span);
    ex.entities.push_back(std::move(m));
  }
  ex.target = require(j, "target").get<std::size_t>();
  auto pol = parse_polarity(require(j, "polarity").get<std::string>());
  if (!pol) throw Error("unknown polarity '" + j["polarity"].get<std::string>() + "'");
  ex.polarity = *pol;
  for (const auto& o : require(j, "opinions")) {
    auto op = parse_opinion_polarity(require(o, "polarity").get<std::string>());
    if (!op) throw Error("unknown opinion polarity '" + o["polarity"].get<std::string>() + "'");
    ex.opinions.push_back(OpinionSpan{span_from_json(o), *op});
  }
  for (const auto& [key, value] : j.items()) {
    if (!kKnownFields.contains(key)) ex.extra[key] = value;
  }
  return ex;
}

Json to_json(const Utterance& u) {
  Json j;
  j["id"] = u.id;
  j["text"] = u.text;
  j["tokens"] = u.tokens;
  if (u.call_id) j["call_id"] = *u.call_id;
  if (u.timestamp) j["timestamp"] = *u.timestamp;
  return j;
}

Utterance utterance_from_json(const Json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  Utterance u;
  read_utterance_fields(j, u);
  return u;
}

namespace {

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    try {
      fn(j, lineno);
    } catch (const ValidationError&) {
      throw;
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

DatasetSplit load_dataset(const std::filesystem::path& path, SplitName name) {
  DatasetSplit split;
  split.name = name;
  std::set<std::string> seen;
  for_each_record(path, [&](const Json& j, std::size_t) {
    ElsaExample ex = example_from_json(j);
    auto violations = validate_example(ex);
    if (!violations.empty()) {
      std::string msg = violations.front();
      for (std::size_t i = 1; i < violations.size(); ++i) msg += "; " + violations[i];
      throw ValidationError(ex.id(), msg);
    }
    if (!seen.insert(ex.id()).second) throw ValidationError(ex.id(), "duplicate id in split");
    split.examples.push_back(std::move(ex));
  });
  return split;
}

void save_dataset(const DatasetSplit& split, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& ex : split.examples) out << to_json(ex).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<Utterance> load_utterances(const std::filesystem::path& path) {
  std::vector<Utterance> out;
  for_each_record(path, [&](const Json& j, std::size_t) {
    Utterance u = utterance_from_json(j);
    auto violations = validate_utterance(u);
    if (!violations.empty()) throw ValidationError(u.id, violations.front());
    out.push_back(std::move(u));
  });
  return out;
}

void save_utterances(const std::vector<Utterance>& utterances, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& u : utterances) out << to_json(u).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// --- balanced sampling ------------------------------------------------------

InsufficientCandidates::InsufficientCandidates(std::size_t pf, std::size_t nf, std::size_t pw,
                                               std::size_t nw)
    : std::runtime_error("insufficient candidates: polar bucket has " + std::to_string(pf) +
                         " (need " + std::to_string(pw) + "), neutral bucket has " +
                         std::to_string(nf) + " (need " + std::to_string(nw) + ")"),
      polar_found(pf),
      neutral_found(nf) {}

std::vector<Utterance> sample_balanced(const std::vector<Utterance>& pool,
                                       const EntityDetectFn& entity_detector,
                                       const SentimentFn& sentiment_classifier,
                                       std::size_t n_polar, std::size_t n_neutral,
                                       std::uint64_t seed) {
  if (n_polar == 0 && n_neutral == 0) return {};
  std::vector<std::size_t> polar;
  std::vector<std::size_t> neutral;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (entity_detector(pool[i]) == 0) continue;
    if (sentiment_classifier(pool[i]) == Polarity::neutral)
      neutral.push_back(i);
    else
      polar.push_back(i);
  }
  if (polar.size() < n_polar || neutral.size() < n_neutral)
    throw InsufficientCandidates(polar.size(), neutral.size(), n_polar, n_neutral);

  std::mt19937_64 rng(seed);
  std::shuffle(polar.begin(), polar.end(), rng);
  std::shuffle(neutral.begin(), neutral.end(), rng);
  std::vector<std::size_t> chosen(polar.begin(), polar.begin() + n_polar);
  chosen.insert(chosen.end(), neutral.begin(), neutral.begin() + n_neutral);
  std::sort(chosen.begin(), chosen.end());

  std::vector<Utterance> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(pool[i]);
  return out;
}

// --- synthetic corpus -------------------------------------------------------

namespace {

enum class SlotKind { literal, ent, ent2, opn, dopn, noise };

struct Piece {
  SlotKind kind = SlotKind::literal;
  std::string text;  // literal text or slot class
};

std::vector<Piece> parse_template(const std::string& tpl) {
  std::vector<Piece> pieces;
  std::size_t i = 0;
  while (i < tpl.size()) {
    auto open = tpl.find('{', i);
    if (open == std::string::npos) {
      pieces.push_back({SlotKind::literal, tpl.substr(i)});
      break;
    }
    if (open > i) pieces.push_back({SlotKind::literal, tpl.substr(i, open - i)});
    auto close = tpl.find('}', open);
    if (close == std::string::npos) throw Error("unterminated slot in template '" + tpl + "'");
    std::string body = tpl.substr(open + 1, close - open - 1);
    std::string name = body;
    std::string cls;
    if (auto colon = body.find(':'); colon != std::string::npos) {
      name = body.substr(0, colon);
      cls = body.substr(colon + 1);
    }
    Piece p;
    p.text = cls;
    if (name == "ENT")
      p.kind = SlotKind::ent;
    else if (name == "ENT2")
      p.kind = SlotKind::ent2;
    else if (name == "OPN")
      p.kind = SlotKind::opn;
    else if (name == "DOPN")
      p.kind = SlotKind::dopn;
    else if (name == "NOISE")
      p.kind = SlotKind::noise;
    else
      throw Error("unknown slot '{" + body + "}' in template '" + tpl + "'");
    pieces.push_back(std::move(p));
    i = close + 1;
  }
  return pieces;
}

struct ParsedTemplate {
  std::string source;
  std::vector<Piece> pieces;
  bool polar = false;
  bool has_ent2 = false;
};

ParsedTemplate prepare_template(const std::string& tpl) {
  ParsedTemplate t{tpl, parse_template(tpl)};
  int ent = 0;
  int ent2 = 0;
  for (const auto& p : t.pieces) {
    ent += p.kind == SlotKind::ent;
    ent2 += p.kind == SlotKind::ent2;
    t.polar = t.polar || p.kind == SlotKind::opn;
  }
  if (ent == 0) throw Error("template without an entity slot: '" + tpl + "'");
  if (ent > 1 || ent2 > 1) throw Error("template repeats an entity slot: '" + tpl + "'");
  t.has_ent2 = ent2 == 1;
  return t;
}

bool attaches_left(const std::string& tok) {
  static const std::set<std::string, std::less<>> kLeft = {".", ",", "!", "?", ";", ":", ")"};
  return kLeft.contains(tok);
}

// Builds the utterance token by token so every slot maps to an exact span.
class Builder {
 public:
  TokenSpan append(std::string_view text) {
    int start = static_cast<int>(tokens_.size());
    for (auto& tok : tokenize(text)) {
      if (!text_.empty() && !attaches_left(tok)) text_ += ' ';
      text_ += tok;
      tokens_.push_back(std::move(tok));
    }
    return TokenSpan{start, static_cast<int>(tokens_.size())};
  }
  std::string text() const { return text_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::string text_;
  std::vector<std::string> tokens_;
};

std::string format_id(const std::string& prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", n);
  return prefix + "-" + buf;
}

// Days since 1970-01-01 to a civil date.
void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long yy = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

DatasetSplit generate_synthetic_corpus(const std::vector<std::string>& templates,
                                       const std::vector<EntityEntry>& entity_list,
                                       const std::vector<OpinionWord>& opinion_lexicon,
                                       std::size_t n, std::uint64_t seed,
                                       const SyntheticOptions& options) {
  DatasetSplit split;
  split.name = options.split;

  std::vector<ParsedTemplate> polar;
  std::vector<ParsedTemplate> neutral;
  for (const auto& tpl : templates) {
    auto t = prepare_template(tpl);
    (t.polar ? polar : neutral).push_back(std::move(t));
  }
  std::vector<std::vector<Piece>> fillers;
  for (const auto& f : options.fillers) fillers.push_back(parse_template(f));
  if (n == 0) return split;
  if (entity_list.empty()) throw Error("entity list is empty");
  if (options.max_fillers < options.min_fillers) throw Error("max_fillers < min_fillers");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> class_dist(
      {options.positive_weight, options.negative_weight, options.neutral_weight});

  auto pick = [&](std::size_t size) {
    return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
  };
  auto pick_word = [&](std::optional<OpinionPolarity> pol, const std::string& cls) {
    std::vector<const OpinionWord*> options_for_slot;
    for (const auto& w : opinion_lexicon) {
      if (pol && w.polarity != *pol) continue;
      if (!cls.empty() && w.slot_class != cls) continue;
      options_for_slot.push_back(&w);
    }
    if (options_for_slot.empty())
      throw Error("opinion lexicon has no word for slot class '" + cls + "'");
    return options_for_slot[pick(options_for_slot.size())];
  };

  std::size_t utterance_index = 0;
  while (split.examples.size() < n) {
    const int cls = class_dist(rng);
    auto& bucket = cls == 2 ? neutral : polar;
    if (bucket.empty())
      throw Error(cls == 2 ? "no neutral templates for requested class mix"
                           : "no polar templates for requested class mix");
    const ParsedTemplate& tpl = bucket[pick(bucket.size())];
    const OpinionPolarity pol = cls == 0 ? OpinionPolarity::pos : OpinionPolarity::neg;

    const EntityEntry& e1 = entity_list[pick(entity_list.size())];
    const EntityEntry* e2 = nullptr;
    if (tpl.has_ent2) {
      if (entity_list.size() < 2) throw Error("template needs two distinct entities");
      do {
        e2 = &entity_list[pick(entity_list.size())];
      } while (e2->surface == e1.surface);
    }

    Builder b;
    TokenSpan span1;
    TokenSpan span2;
    std::vector<OpinionSpan> opinions;
    for (const auto& piece : tpl.pieces) {
      switch (piece.kind) {
        case SlotKind::literal:
          b.append(piece.text);
          break;
        case SlotKind::ent:
          span1 = b.append(e1.surface);
          break;
        case SlotKind::ent2:
          span2 = b.append(e2->surface);
          break;
        case SlotKind::opn:
          opinions.push_back({b.append(pick_word(pol, piece.text)->word), pol});
          break;
        case SlotKind::dopn:
          b.append(pick_word(std::nullopt, piece.text)->word);
          break;
        case SlotKind::noise: {
          if (fillers.empty()) break;
          auto count = std::uniform_int_distribution<std::size_t>(options.min_fillers,
                                                                  options.max_fillers)(rng);
          for (std::size_t k = 0; k < count; ++k) {
            for (const auto& fp : fillers[pick(fillers.size())]) {
              if (fp.kind == SlotKind::literal)
                b.append(fp.text);
              else if (fp.kind == SlotKind::dopn)
                b.append(pick_word(std::nullopt, fp.text)->word);
              else
                throw Error("fillers may only contain {DOPN} slots");
            }
          }
          break;
        }
      }
    }

    Utterance u;
    u.text = b.text();
    u.tokens = b.tokens();
    u.call_id = options.id_prefix + "-call-" + std::to_string(utterance_index / 4);
    {
      int y;
      unsigned m, d;
      civil_from_days(19723 + static_cast<long>(pick(90)), y, m, d);  // from 2024-01-01
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02zu:%02zu:%02zuZ", y, m, d, pick(24),
                    pick(60), pick(60));
      u.timestamp = buf;
    }

    std::vector<EntityMention> entities;
    entities.push_back({span1, e1.type, e1.surface});
    if (e2) entities.push_back({span2, e2->type, e2->surface});
    std::sort(entities.begin(), entities.end(),
              [](const auto& a, const auto& b) { return a.span < b.span; });
    auto index_of = [&](const TokenSpan& s) {
      for (std::size_t i = 0; i < entities.size(); ++i)
        if (entities[i].span == s) return i;
      return std::size_t{0};
    };

    ElsaExample ex;
    ex.utterance = u;
    ex.utterance.id = format_id(options.id_prefix, utterance_index);
    ex.entities = entities;
    ex.target = index_of(span1);
    ex.polarity = cls == 0 ? Polarity::positive : cls == 1 ? Polarity::negative : Polarity::neutral;
    ex.opinions = opinions;
    split.examples.push_back(std::move(ex));

    if (e2 && options.emit_secondary_targets && split.examples.size() < n) {
      ElsaExample other;
      other.utterance = u;
      other.utterance.id = format_id(options.id_prefix, utterance_index) + ".2";
      other.entities = entities;
      other.target = index_of(span2);
      other.polarity = Polarity::neutral;
      split.examples.push_back(std::move(other));
    }
    ++utterance_index;
  }
  return split;
}

std::vector<std::string> default_templates() {
  return {
      // polar
      "I {OPN:verb} {ENT}.",
      "I really {OPN:verb} {ENT}.",
      "{ENT} {OPN:verbs}.",
      "{ENT} really {OPN:verbs}.",
      "honestly {ENT} {OPN:verbs}.",
      "{ENT} is {OPN:adj}.",
      "{ENT} is so {OPN:adj}.",
      "I think {ENT} is {OPN:adj}.",
      "I am so {OPN:adjp} with {ENT}.",
      "she is very {OPN:adjp} how {ENT} works.",
      "it was {OPN:adj} of {ENT} to do that.",
      "{OPN:adj} {ENT} support as always.",
      "my {OPN:natt} for {ENT} keeps growing.",
      "{ENT} is {OPN:npred}.",
      "{ENT} is a total {OPN:ncount}.",
      "we had a {OPN:adj} experience with {ENT} yesterday.",
      "the {ENT} app has been {OPN:adj} lately.",
      "um so {NOISE} I {OPN:verb} {ENT} {NOISE}.",
      "{NOISE} {ENT} {OPN:verbs} {NOISE}.",
      "I {OPN:verb} using {ENT} for my orders.",
      "my friend uses {ENT2} but I {OPN:verb} {ENT}.",
      "I tried {ENT2} before but {ENT} {OPN:verbs}.",
      "I work at {ENT} and I {OPN:verb} it a lot.",
      // neutral
      "I called {ENT} yesterday about my account.",
      "my order from {ENT} arrived on monday.",
      "do you guys work with {ENT}?",
      "I have a {ENT} account.",
      "um so I was using {ENT} and then the call dropped.",
      "{ENT} sent me an email about it.",
      "can I pay with {ENT}?",
      "I bought it at {ENT} last week.",
      "both {ENT} and {ENT2} are installed on my phone.",
      "{NOISE} I use {ENT} for work {NOISE}.",
      "the hold music was {DOPN:adj} but I do use {ENT}.",
      "my sister told me about {ENT}.",
      "is {ENT} still open today?",
      "I work at {ENT} and I drive there every day.",
  };
}

std::vector<EntityEntry> default_entities() {
  using T = EntityType;
  return {
      {"Google", T::org},       {"Netflix", T::org},      {"Walmart", T::org},
      {"Instacart", T::org},    {"Amazon", T::org},       {"Hulu", T::org},
      {"Verizon", T::org},      {"Comcast", T::org},      {"Spotify", T::org},
      {"Uber", T::org},         {"PayPal", T::org},       {"FedEx", T::org},
      {"Android", T::product},  {"iPhone", T::product},   {"Snapchat", T::product},
      {"Alexa", T::product},    {"Kindle", T::product},   {"Xbox", T::product},
      {"Galaxy S21", T::product}, {"Apple Watch", T::product}, {"Gmail", T::product},
      {"Zoom", T::product},     {"LaTeX", T::product},    {"MAC", T::product},
      {"Chromebook", T::product}, {"Pixel 6", T::product},
  };
}

std::vector<OpinionWord> default_opinion_lexicon() {
  using P = OpinionPolarity;
  std::vector<OpinionWord> out;
  auto add = [&](std::initializer_list<const char*> words, P pol, const char* cls) {
    for (const char* w : words) out.push_back({w, pol, cls});
  };
  add({"love", "like", "adore", "enjoy", "appreciate"}, P::pos, "verb");
  add({"hate", "dislike", "despise", "loathe", "detest"}, P::neg, "verb");
  add({"rocks", "rules", "shines", "impresses", "delivers"}, P::pos, "verbs");
  add({"sucks", "stinks", "fails", "disappoints", "lags"}, P::neg, "verbs");
  add({"great", "awesome", "amazing", "excellent", "fantastic", "wonderful", "reliable",
       "helpful"},
      P::pos, "adj");
  add({"terrible", "awful", "horrible", "useless", "annoying", "frustrating", "disappointing",
       "unreliable"},
      P::neg, "adj");
  add({"happy", "impressed", "pleased", "satisfied", "delighted"}, P::pos, "adjp");
  add({"unhappy", "disappointed", "frustrated", "annoyed", "upset"}, P::neg, "adjp");
  add({"love", "admiration", "appreciation", "fondness"}, P::pos, "natt");
  add({"hatred", "contempt", "disgust", "frustration"}, P::neg, "natt");
  add({"gold", "magic", "perfection"}, P::pos, "npred");
  add({"garbage", "trash", "junk", "rubbish"}, P::neg, "npred");
  add({"lifesaver", "gem", "blessing", "winner"}, P::pos, "ncount");
  add({"nightmare", "joke", "disaster", "mess"}, P::neg, "ncount");
  return out;
}

std::vector<std::string> default_fillers() {
  return {
      "um",
      "uh",
      "you know",
      "like I said",
      "so basically",
      "I mean",
      "let me check",
      "hold on a second",
      "my account number is five five two",
      "the weather was {DOPN:adj} this morning",
      "the hold music is {DOPN:adj}",
      "anyway",
      "okay so",
      "right",
      "yeah yeah",
      "I was on the phone for an hour",
      "sorry my kids are yelling",
  };
}

SyntheticOptions default_synthetic_options() {
  SyntheticOptions o;
  o.fillers = default_fillers();
  return o;
}

}  // namespace elsa
