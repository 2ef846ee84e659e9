#include "elsa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace elsa::eval {

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace

PolarityReport polarity_report(std::span<const Polarity> gold, std::span<const Polarity> pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("polarity_report: " + std::to_string(gold.size()) + " gold vs " +
                                std::to_string(pred.size()) + " predicted");
  if (gold.empty()) throw std::invalid_argument("polarity_report: empty input");
  PolarityReport r;
  for (std::size_t i = 0; i < gold.size(); ++i)
    ++r.confusion[static_cast<std::size_t>(polarity_index(gold[i]))]
                 [static_cast<std::size_t>(polarity_index(pred[i]))];
  std::size_t total = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t tp = r.confusion[c][c], gold_c = 0, pred_c = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      gold_c += r.confusion[c][k];
      pred_c += r.confusion[k][c];
    }
    auto& m = r.classes[c];
    m.precision = ratio(tp, pred_c);
    m.recall = ratio(tp, gold_c);
    m.f1 = f1_score(m.precision, m.recall);
    m.support = gold_c;
    if (gold_c == 0) continue;
    total += gold_c;
    const double w = static_cast<double>(gold_c);
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  r.weighted.support = total;
  r.weighted.precision /= static_cast<double>(total);
  r.weighted.recall /= static_cast<double>(total);
  r.weighted.f1 /= static_cast<double>(total);
  return r;
}

SpanReport span_report(const std::vector<std::vector<OpinionSpan>>& gold,
                       const std::vector<std::vector<OpinionSpan>>& pred, SpanMatch match) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("span_report: " + std::to_string(gold.size()) + " gold sets vs " +
                                std::to_string(pred.size()) + " predicted sets");
  SpanReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<OpinionSpan> g(gold[i].begin(), gold[i].end());
    const std::set<OpinionSpan> p(pred[i].begin(), pred[i].end());
    r.gold += g.size();
    r.predicted += p.size();
    if (match == SpanMatch::exact) {
      for (const auto& s : p) r.true_positives += g.count(s);
      continue;
    }
    std::vector<bool> claimed(g.size(), false);
    for (const auto& s : p) {
      std::size_t k = 0;
      for (auto it = g.begin(); it != g.end(); ++it, ++k) {
        if (!claimed[k] && it->polarity == s.polarity && it->span.overlaps(s.span)) {
          claimed[k] = true;
          ++r.true_positives;
          break;
        }
      }
    }
  }
  r.precision = ratio(r.true_positives, r.predicted);
  r.recall = ratio(r.true_positives, r.gold);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

std::string_view to_string(SliceKind k) {
  switch (k) {
    case SliceKind::token_count_lt: return "token_count_lt";
    case SliceKind::token_count_gt: return "token_count_gt";
    case SliceKind::entity_count_eq: return "entity_count_eq";
    case SliceKind::entity_count_gt: return "entity_count_gt";
  }
  return "?";
}

std::optional<SliceKind> parse_slice_kind(std::string_view s) {
  for (auto k : {SliceKind::token_count_lt, SliceKind::token_count_gt, SliceKind::entity_count_eq,
                 SliceKind::entity_count_gt})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

bool SliceSpec::contains(const ElsaExample& e) const {
  std::size_t tokens = 0;
  for (const auto& t : e.utterance.tokens) tokens += t != kMarkerToken;
  const std::size_t entities = e.entities.size();
  switch (kind) {
    case SliceKind::token_count_lt: return tokens < threshold;
    case SliceKind::token_count_gt: return tokens > threshold;
    case SliceKind::entity_count_eq: return entities == threshold;
    case SliceKind::entity_count_gt: return entities > threshold;
  }
  return false;
}

std::vector<SliceSpec> default_slices() {
  return {{"tokens<8", SliceKind::token_count_lt, 8},
          {"tokens>45", SliceKind::token_count_gt, 45},
          {"entities=1", SliceKind::entity_count_eq, 1},
          {"entities>1", SliceKind::entity_count_gt, 1}};
}

std::vector<ElsaExample> slice_dataset(const std::vector<ElsaExample>& dataset, const SliceSpec& spec) {
  std::vector<ElsaExample> out;
  std::copy_if(dataset.begin(), dataset.end(), std::back_inserter(out),
               [&](const ElsaExample& e) { return spec.contains(e); });
  return out;
}

MetricsReport metrics_report(const std::vector<ElsaExample>& examples,
                             const std::vector<Prediction>& predictions, SpanMatch match) {
  if (examples.size() != predictions.size())
    throw std::invalid_argument("metrics_report: length mismatch");
  std::vector<Polarity> gp, pp;
  std::vector<std::vector<OpinionSpan>> gs, ps;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    gp.push_back(examples[i].polarity);
    pp.push_back(predictions[i].polarity);
    gs.push_back(examples[i].opinions);
    ps.push_back(predictions[i].opinions);
  }
  return {polarity_report(gp, pp), span_report(gs, ps, match)};
}

RobustnessReport robustness_report(const std::vector<ElsaExample>& dataset,
                                   const std::vector<Prediction>& predictions,
                                   const std::vector<SliceSpec>& slices, SpanMatch match) {
  if (dataset.size() != predictions.size())
    throw std::invalid_argument("robustness_report: length mismatch");
  RobustnessReport r;
  auto row = [&](std::string name, auto&& keep) {
    std::vector<ElsaExample> ex;
    std::vector<Prediction> pr;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!keep(dataset[i])) continue;
      ex.push_back(dataset[i]);
      pr.push_back(predictions[i]);
    }
    RobustnessRow out{std::move(name), ex.size(), std::nullopt};
    if (!ex.empty()) out.metrics = metrics_report(ex, pr, match);
    r.rows.push_back(std::move(out));
  };
  row("all", [](const ElsaExample&) { return true; });
  for (const auto& s : slices) row(s.name, [&](const ElsaExample& e) { return s.contains(e); });
  return r;
}

RobustnessReport robustness_report(const PredictFn& predict_fn, const std::vector<ElsaExample>& dataset,
                                   const std::vector<SliceSpec>& slices, SpanMatch match) {
  std::vector<Prediction> preds;
  preds.reserve(dataset.size());
  for (const auto& e : dataset) preds.push_back(predict_fn(e));
  return robustness_report(dataset, preds, slices, match);
}

Json to_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

Json to_json(const PolarityReport& r) {
  Json j;
  Json per = Json::object();
  for (std::size_t c = 0; c < 3; ++c) per[std::string(to_string(kPolarities[c]))] = to_json(r.classes[c]);
  j["per_class"] = per;
  j["weighted"] = to_json(r.weighted);
  Json conf = Json::array();
  for (const auto& row : r.confusion) conf.push_back(Json(row));
  j["confusion"] = conf;
  return j;
}

Json to_json(const SpanReport& r) {
  return {{"true_positives", r.true_positives},
          {"predicted", r.predicted},
          {"gold", r.gold},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1}};
}

Json to_json(const MetricsReport& r) { return {{"polarity", to_json(r.polarity)}, {"spans", to_json(r.spans)}}; }

Json to_json(const RobustnessReport& r) {
  Json j;
  Json slices = Json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    Json o = {{"name", row.name}, {"size", row.size}};
    o["metrics"] = row.metrics ? to_json(*row.metrics) : Json(nullptr);
    if (i == 0)
      j["overall"] = o;
    else
      slices.push_back(o);
  }
  j["slices"] = slices;
  return j;
}

std::string format_table(const RobustnessReport& r) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %6s  %8s %8s %8s  %8s %8s %8s\n", "slice", "size", "pol_P",
                "pol_R", "pol_F1", "span_P", "span_R", "span_F1");
  out << buf;
  for (const auto& row : r.rows) {
    if (!row.metrics) {
      std::snprintf(buf, sizeof(buf), "%-12s %6zu  %8s %8s %8s  %8s %8s %8s\n", row.name.c_str(),
                    row.size, "-", "-", "-", "-", "-", "-");
    } else {
      const auto& w = row.metrics->polarity.weighted;
      const auto& s = row.metrics->spans;
      std::snprintf(buf, sizeof(buf), "%-12s %6zu  %8.4f %8.4f %8.4f  %8.4f %8.4f %8.4f\n",
                    row.name.c_str(), row.size, w.precision, w.recall, w.f1, s.precision, s.recall,
                    s.f1);
    }
    out << buf;
  }
  return out.str();
}

}  // namespace elsa::eval
