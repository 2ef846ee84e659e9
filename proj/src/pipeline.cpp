#include "elsa/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "elsa/error.hpp"

namespace elsa::pipeline {

std::string_view to_string(PredictionPath p) {
  return p == PredictionPath::tagger ? "tagger" : "cnn_heuristics";
}

std::optional<PredictionPath> parse_prediction_path(std::string_view s) {
  if (s == "tagger") return PredictionPath::tagger;
  if (s == "cnn_heuristics" || s == "cnn") return PredictionPath::cnn_heuristics;
  return std::nullopt;
}

// --- records ---------------------------------------------------------------------------

Json to_json(const EntitySentimentRecord& r) {
  Json j;
  j["utterance_id"] = r.utterance_id;
  j["entity"] = {{"surface", r.entity.surface},
                 {"type", to_string(r.entity.type)},
                 {"start", r.entity.span.start},
                 {"end", r.entity.span.end}};
  j["polarity"] = to_string(r.polarity);
  Json ops = Json::array();
  for (const auto& o : r.opinions)
    ops.push_back({{"start", o.span.start}, {"end", o.span.end}, {"polarity", to_string(o.polarity)}});
  j["opinions"] = std::move(ops);
  j["path"] = to_string(r.path);
  if (r.call_id) j["call_id"] = *r.call_id;
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  return j;
}

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

EntitySentimentRecord record_from_json(const Json& j) {
  EntitySentimentRecord r;
  r.utterance_id = field(j, "utterance_id").get<std::string>();
  const Json& e = field(j, "entity");
  r.entity.surface = field(e, "surface").get<std::string>();
  const auto type = parse_entity_type(field(e, "type").get<std::string>());
  if (!type) throw ValidationError(r.utterance_id, "unknown entity type");
  r.entity.type = *type;
  r.entity.span = {field(e, "start").get<int>(), field(e, "end").get<int>()};
  const auto pol = parse_polarity(field(j, "polarity").get<std::string>());
  if (!pol) throw ValidationError(r.utterance_id, "unknown polarity");
  r.polarity = *pol;
  for (const auto& o : field(j, "opinions")) {
    const auto op = parse_opinion_polarity(field(o, "polarity").get<std::string>());
    if (!op) throw ValidationError(r.utterance_id, "unknown opinion polarity");
    r.opinions.push_back({{field(o, "start").get<int>(), field(o, "end").get<int>()}, *op});
  }
  if (j.contains("path")) {
    const auto path = parse_prediction_path(j.at("path").get<std::string>());
    if (!path) throw ValidationError(r.utterance_id, "unknown path");
    r.path = *path;
  }
  r.call_id = optional_string(j, "call_id");
  r.timestamp = optional_string(j, "timestamp");
  if (r.polarity == Polarity::neutral && !r.opinions.empty())
    throw ValidationError(r.utterance_id, "neutral record carries opinion spans");
  return r;
}

std::vector<EntitySentimentRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<EntitySentimentRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(Json::parse(line)));
    } catch (const ValidationError&) {
      throw;
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

namespace {

EntitySentimentRecord base_record(const Utterance& u, const EntityMention& e, PredictionPath path) {
  EntitySentimentRecord r;
  r.utterance_id = u.id;
  r.entity = e;
  r.path = path;
  r.call_id = u.call_id;
  r.timestamp = u.timestamp;
  return r;
}

}  // namespace

// --- tagger path ---------------------------------------------------------------------------

std::vector<EntitySentimentRecord> predict_tagger_entities(const Utterance& u,
                                                           const std::vector<EntityMention>& entities,
                                                           const tagger::TaggerModel& model) {
  std::vector<EntitySentimentRecord> out;
  out.reserve(entities.size());
  for (const auto& e : entities) {
    const auto marked = ner::insert_ne_markers(u, e);
    const auto derived = tagger::derive_entity_sentiment(tagger::predict_tags(model, marked), e);
    auto r = base_record(u, e, PredictionPath::tagger);
    r.polarity = derived.polarity;
    if (r.polarity != Polarity::neutral) r.opinions = derived.opinions;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EntitySentimentRecord> predict_tagger_path(const Utterance& u, const ner::EntityDetector& detector,
                                                       const tagger::TaggerModel& model) {
  return predict_tagger_entities(u, ner::detect_entities(u, detector), model);
}

// --- CNN path ---------------------------------------------------------------------------------

std::vector<EntitySentimentRecord> predict_cnn_entities(const Utterance& u,
                                                        const std::vector<EntityMention>& entities,
                                                        const CnnPathModels& models,
                                                        const CnnPathOptions& options, CnnPathTrace* trace) {
  CnnPathTrace local;
  CnnPathTrace& tr = trace ? *trace : local;
  tr = {};

  std::vector<EntitySentimentRecord> out;
  for (const auto& e : entities) out.push_back(base_record(u, e, PredictionPath::cnn_heuristics));
  if (entities.empty()) return out;

  tr.utterance_class = cnn::predict_class(models.cnn, u.tokens);
  if (tr.utterance_class == Polarity::neutral) return out;

  const auto attr =
      cnn::integrated_gradients(models.cnn, u.tokens, polarity_index(tr.utterance_class), options.ig_steps);
  tr.attributed = true;
  tr.candidates = cnn::select_candidates(attr, u.tokens, entities, tr.utterance_class, options.candidates);
  const auto pos = heuristics::pos_tag(u.tokens, models.pos_tagger);
  tr.matches = heuristics::match_patterns(u.tokens, pos, entities, tr.candidates, models.lexicon,
                                          options.max_gap, options.modifiers);

  for (auto& r : out) {
    std::set<OpinionSpan> opinions;
    for (const auto& m : tr.matches)
      if (m.entity.span == r.entity.span) opinions.insert(m.opinion);
    if (opinions.empty()) continue;

    int balance = 0;
    for (const auto& o : opinions) balance += o.polarity == OpinionPolarity::pos ? 1 : -1;
    OpinionPolarity winner;
    if (balance != 0) {
      winner = balance > 0 ? OpinionPolarity::pos : OpinionPolarity::neg;
    } else {
      int nearest = -1;
      bool pos_near = false, neg_near = false;
      for (const auto& o : opinions) {
        const int d = token_distance(o.span, r.entity.span);
        if (nearest < 0 || d < nearest) {
          nearest = d;
          pos_near = neg_near = false;
        }
        if (d == nearest) (o.polarity == OpinionPolarity::pos ? pos_near : neg_near) = true;
      }
      winner = pos_near && !neg_near ? OpinionPolarity::pos : OpinionPolarity::neg;
    }
    r.polarity = to_polarity(winner);
    r.opinions.assign(opinions.begin(), opinions.end());
  }
  return out;
}

std::vector<EntitySentimentRecord> predict_cnn_path(const Utterance& u, const ner::EntityDetector& detector,
                                                    const CnnPathModels& models,
                                                    const CnnPathOptions& options, CnnPathTrace* trace) {
  return predict_cnn_entities(u, ner::detect_entities(u, detector), models, options, trace);
}

// --- aggregation ------------------------------------------------------------------------------

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::day: return "day";
    case Granularity::week: return "week";
    case Granularity::month: return "month";
  }
  return "?";
}

std::optional<Granularity> parse_granularity(std::string_view s) {
  if (s == "day") return Granularity::day;
  if (s == "week") return Granularity::week;
  if (s == "month") return Granularity::month;
  return std::nullopt;
}

std::string period_of(const std::optional<std::string>& timestamp, Granularity g) {
  using namespace std::chrono;
  if (!timestamp || timestamp->size() < 10) return kUndated;
  const std::string& s = *timestamp;
  for (std::size_t i = 0; i < 10; ++i) {
    const bool dash = i == 4 || i == 7;
    if (dash ? s[i] != '-' : !std::isdigit(static_cast<unsigned char>(s[i]))) return kUndated;
  }
  const year_month_day ymd{year{std::stoi(s.substr(0, 4))}, month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
                           day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}};
  if (!ymd.ok()) return kUndated;

  char buf[16];
  switch (g) {
    case Granularity::day: return s.substr(0, 10);
    case Granularity::month: return s.substr(0, 7);
    case Granularity::week: {
      // The ISO week belongs to the year holding its Thursday.
      const sys_days d{ymd};
      const unsigned iso_wd = weekday{d}.iso_encoding();
      const sys_days thursday = d - days{iso_wd - 1} + days{3};
      const year_month_day t{thursday};
      const sys_days jan1{t.year() / January / 1};
      const int week = static_cast<int>((thursday - jan1).count() / 7 + 1);
      std::snprintf(buf, sizeof buf, "%04d-W%02d", static_cast<int>(t.year()), week);
      return buf;
    }
  }
  return kUndated;
}

double AggregatedInsight::net() const {
  const std::size_t n = total();
  if (n == 0) return 0.0;
  return (static_cast<double>(positive) - static_cast<double>(negative)) / static_cast<double>(n);
}

Json to_json(const AggregatedInsight& a) {
  return {{"entity", a.entity},     {"period", a.period},   {"positive", a.positive},
          {"negative", a.negative}, {"neutral", a.neutral}, {"net", a.net()}};
}

std::vector<AggregatedInsight> aggregate(const std::vector<EntitySentimentRecord>& records, Granularity g) {
  std::map<std::pair<std::string, std::string>, AggregatedInsight> groups;
  for (const auto& r : records) {
    std::pair<std::string, std::string> key{to_lower(r.entity.surface), period_of(r.timestamp, g)};
    auto& a = groups[key];
    a.entity = key.first;
    a.period = key.second;
    switch (r.polarity) {
      case Polarity::positive: ++a.positive; break;
      case Polarity::negative: ++a.negative; break;
      case Polarity::neutral: ++a.neutral; break;
    }
  }
  std::vector<AggregatedInsight> out;
  out.reserve(groups.size());
  for (auto& [key, a] : groups) out.push_back(std::move(a));
  return out;
}

// --- evaluation join ----------------------------------------------------------------------------

std::vector<eval::Prediction> join_predictions(const std::vector<ElsaExample>& gold,
                                               const std::vector<EntitySentimentRecord>& records) {
  std::map<std::pair<std::string, TokenSpan>, const EntitySentimentRecord*> by_key;
  std::set<std::string> ids;
  for (const auto& ex : gold) ids.insert(ex.id());
  for (const auto& r : records) {
    if (!ids.count(r.utterance_id)) throw ValidationError(r.utterance_id, "prediction has no gold example");
    if (!by_key.emplace(std::make_pair(r.utterance_id, r.entity.span), &r).second)
      throw ValidationError(r.utterance_id, "more than one record for entity '" + r.entity.surface + "'");
  }
  std::vector<eval::Prediction> out;
  out.reserve(gold.size());
  for (const auto& ex : gold) {
    eval::Prediction p;
    auto it = by_key.find({ex.id(), ex.target_entity().span});
    if (it != by_key.end()) {
      p.polarity = it->second->polarity;
      p.opinions = it->second->opinions;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace elsa::pipeline
