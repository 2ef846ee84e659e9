#pragma once

// Polarity metrics, opinion-span metrics and the robustness slicer.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elsa/corpus.hpp"

namespace elsa::eval {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct PolarityReport {
  std::array<ClassMetrics, 3> classes;  // indexed by polarity_index
  // Support-weighted over classes with support > 0; support = their total.
  ClassMetrics weighted;
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [gold][pred]
};

struct SpanReport {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  PolarityReport polarity;
  SpanReport spans;
};

double f1_score(double precision, double recall);

// Throws std::invalid_argument on a length mismatch or empty input.
PolarityReport polarity_report(std::span<const Polarity> gold, std::span<const Polarity> pred);

enum class SpanMatch { exact, overlap };

// Spans are treated as sets per example. Under `overlap` a predicted span
// counts when it overlaps an unclaimed gold span of the same polarity.
SpanReport span_report(const std::vector<std::vector<OpinionSpan>>& gold,
                       const std::vector<std::vector<OpinionSpan>>& pred,
                       SpanMatch match = SpanMatch::exact);

enum class SliceKind { token_count_lt, token_count_gt, entity_count_eq, entity_count_gt };

struct SliceSpec {
  std::string name;
  SliceKind kind = SliceKind::token_count_lt;
  std::size_t threshold = 0;

  bool contains(const ElsaExample& example) const;
};

std::string_view to_string(SliceKind k);
std::optional<SliceKind> parse_slice_kind(std::string_view s);

// <8 tokens, >45 tokens, =1 entity, >1 entity.
std::vector<SliceSpec> default_slices();

std::vector<ElsaExample> slice_dataset(const std::vector<ElsaExample>& dataset,
                                       const SliceSpec& spec);

struct Prediction {
  Polarity polarity = Polarity::neutral;
  std::vector<OpinionSpan> opinions;
};

using PredictFn = std::function<Prediction(const ElsaExample&)>;

MetricsReport metrics_report(const std::vector<ElsaExample>& examples,
                             const std::vector<Prediction>& predictions,
                             SpanMatch match = SpanMatch::exact);

struct RobustnessRow {
  std::string name;
  std::size_t size = 0;
  std::optional<MetricsReport> metrics;  // absent for an empty slice
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;  // "all" first, then one per slice
};

RobustnessReport robustness_report(const PredictFn& predict_fn,
                                   const std::vector<ElsaExample>& dataset,
                                   const std::vector<SliceSpec>& slices = default_slices(),
                                   SpanMatch match = SpanMatch::exact);

// Same, from precomputed predictions parallel to dataset.
RobustnessReport robustness_report(const std::vector<ElsaExample>& dataset,
                                   const std::vector<Prediction>& predictions,
                                   const std::vector<SliceSpec>& slices = default_slices(),
                                   SpanMatch match = SpanMatch::exact);

Json to_json(const ClassMetrics& m);
Json to_json(const PolarityReport& r);
Json to_json(const SpanReport& r);
Json to_json(const MetricsReport& r);
Json to_json(const RobustnessReport& r);

// Aligned plain-text table: one row per slice, polarity and span columns.
std::string format_table(const RobustnessReport& r);

}  // namespace elsa::eval
