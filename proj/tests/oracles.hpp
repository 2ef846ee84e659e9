#pragma once

// Independent reference computations for metric tests.

#include <algorithm>
#include <random>
#include <vector>

#include "elsa/corpus.hpp"

namespace oracle {

struct Prf {
  double p = 0, r = 0, f = 0;
  std::size_t support = 0;
};

// Per-class and support-weighted P/R/F1 by direct counting over pairs.
inline std::vector<Prf> polarity_metrics(const std::vector<elsa::Polarity>& gold,
                                         const std::vector<elsa::Polarity>& pred) {
  std::vector<Prf> out(4);
  std::size_t total_support = 0;
  for (int c = 0; c < 3; ++c) {
    const auto cls = static_cast<elsa::Polarity>(c);
    std::size_t tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == cls && pred[i] == cls;
      predicted += pred[i] == cls;
      actual += gold[i] == cls;
    }
    Prf m;
    m.p = predicted ? double(tp) / double(predicted) : 0.0;
    m.r = actual ? double(tp) / double(actual) : 0.0;
    m.f = m.p + m.r > 0 ? 2 * m.p * m.r / (m.p + m.r) : 0.0;
    m.support = actual;
    out[static_cast<std::size_t>(c)] = m;
    total_support += actual;
  }
  Prf& w = out[3];
  for (int c = 0; c < 3; ++c) {
    const double share = double(out[static_cast<std::size_t>(c)].support) / double(total_support);
    w.p += share * out[static_cast<std::size_t>(c)].p;
    w.r += share * out[static_cast<std::size_t>(c)].r;
    w.f += share * out[static_cast<std::size_t>(c)].f;
  }
  w.support = total_support;
  return out;
}

struct SpanCounts {
  std::size_t tp = 0, predicted = 0, gold = 0;
};

// Exact-match counts: for every predicted span, scan the gold list.
inline SpanCounts span_counts(const std::vector<std::vector<elsa::OpinionSpan>>& gold,
                              const std::vector<std::vector<elsa::OpinionSpan>>& pred) {
  SpanCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<elsa::OpinionSpan> g = gold[i], p = pred[i];
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    c.gold += g.size();
    c.predicted += p.size();
    for (const auto& s : p)
      for (const auto& t : g)
        if (s.span.start == t.span.start && s.span.end == t.span.end && s.polarity == t.polarity) ++c.tp;
  }
  return c;
}

inline elsa::Polarity random_polarity(std::mt19937_64& rng) {
  return static_cast<elsa::Polarity>(std::uniform_int_distribution<int>(0, 2)(rng));
}

// Non-overlapping random spans within [0, n).
inline std::vector<elsa::OpinionSpan> random_spans(std::mt19937_64& rng, int n) {
  std::vector<elsa::OpinionSpan> out;
  int pos = 0;
  while (pos < n) {
    pos += std::uniform_int_distribution<int>(0, 3)(rng);
    if (pos >= n) break;
    const int len = std::uniform_int_distribution<int>(1, 2)(rng);
    const int end = std::min(n, pos + len);
    out.push_back({{pos, end}, std::uniform_int_distribution<int>(0, 1)(rng) ? elsa::OpinionPolarity::pos
                                                                               : elsa::OpinionPolarity::neg});
    pos = end;
  }
  return out;
}

}  // namespace oracle
