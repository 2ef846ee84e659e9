#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "elsa/error.hpp"
#include "elsa/pipeline.hpp"
#include "support.hpp"

using namespace elsa;
using namespace elsa::pipeline;

namespace {

std::vector<ElsaExample> synthetic(std::size_t n, std::uint64_t seed) {
  return generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(), n, seed,
                                   default_synthetic_options())
      .examples;
}

struct Models {
  heuristics::SentimentLexicon lexicon = heuristics::load_lexicon(test_support::data_file("lexicon.tsv"));
  heuristics::ModifierConfig modifiers =
      heuristics::load_modifier_config(test_support::data_file("modifiers.json"));
  ner::Gazetteer gazetteer = ner::Gazetteer::load(test_support::data_file("gazetteer.tsv"));
  heuristics::ReferencePosTagger pos_tagger{lexicon};
  cnn::TextCnn cnn;
  tagger::TaggerModel tagger;

  Models() {
    cnn::CnnConfig c;
    c.embedding_dim = 16;
    c.filter_sizes = {2, 3};
    c.filters_per_size = 12;
    c.hidden_dim = 16;
    c.max_epochs = 8;
    cnn = cnn::train_cnn(cnn::utterance_sentiment_items(synthetic(900, 41)),
                         cnn::utterance_sentiment_items(synthetic(200, 42)), c)
              .model;

    tagger::TaggerConfig t;
    t.encoder_spec = {1, 32, 2, 64, 128};
    t.learning_rate = 2e-3;
    t.max_epochs = 6;
    t.early_stopping_patience = 2;
    const auto train = synthetic(700, 51);
    std::vector<std::vector<std::string>> vocab;
    for (const auto& ex : train) vocab.push_back(ex.utterance.tokens);
    tagger = tagger::TaggerModel(vocab, t);
    tagger::train_elsa(tagger, tagger::make_elsa_items(train), tagger::make_elsa_items(synthetic(150, 52)), t);
  }

  CnnPathModels cnn_models() const { return {cnn, pos_tagger, lexicon}; }
  CnnPathOptions options() const {
    CnnPathOptions o;
    o.modifiers = modifiers;
    return o;
  }
};

const Models& models() {
  static const Models m;
  return m;
}

EntitySentimentRecord record(const std::string& entity, Polarity p, const std::string& ts) {
  EntitySentimentRecord r;
  r.utterance_id = "u";
  r.entity = {{0, 1}, EntityType::org, entity};
  r.polarity = p;
  if (p != Polarity::neutral) r.opinions = {{{1, 2}, p == Polarity::positive ? OpinionPolarity::pos : OpinionPolarity::neg}};
  r.timestamp = ts;
  return r;
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("tagger path") {
  const auto& m = models();
  SUBCASE("no entities, no records") {
    CHECK(predict_tagger_path(make_utterance("n", "I called about my bill"), m.gazetteer, m.tagger).empty());
  }
  SUBCASE("one record per entity, in order") {
    const auto u = make_utterance("two", "I tried Hulu before but Netflix rocks.");
    const auto rs = predict_tagger_path(u, m.gazetteer, m.tagger);
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].entity.surface == "Hulu");
    CHECK(rs[1].entity.surface == "Netflix");
    CHECK(rs[1].polarity == Polarity::positive);
    for (const auto& r : rs) {
      CHECK(r.utterance_id == "two");
      CHECK(r.path == PredictionPath::tagger);
      CHECK((r.polarity == Polarity::neutral) == r.opinions.empty());
    }
  }
}

TEST_CASE("CNN and heuristics path") {
  const auto& m = models();
  SUBCASE("no entities, no classifier call") {
    CnnPathTrace trace;
    CHECK(predict_cnn_path(make_utterance("n", "I called about my bill"), m.gazetteer, m.cnn_models(), m.options(),
                           &trace)
              .empty());
    CHECK(!trace.attributed);
  }
  SUBCASE("neutral class skips attribution") {
    const auto u = make_utterance("q", "is Google still open today?");
    REQUIRE(cnn::predict_class(m.cnn, u.tokens) == Polarity::neutral);
    CnnPathTrace trace;
    const auto rs = predict_cnn_path(u, m.gazetteer, m.cnn_models(), m.options(), &trace);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].polarity == Polarity::neutral);
    CHECK(rs[0].opinions.empty());
    CHECK(!trace.attributed);
  }
  SUBCASE("Android sucks") {
    const auto u = make_utterance("a", "Android sucks");
    CnnPathTrace trace;
    const auto rs = predict_cnn_path(u, m.gazetteer, m.cnn_models(), m.options(), &trace);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].polarity == Polarity::negative);
    CHECK(rs[0].path == PredictionPath::cnn_heuristics);
    REQUIRE(rs[0].opinions.size() == 1);
    CHECK(rs[0].opinions[0].span == TokenSpan{1, 2});
    REQUIRE(trace.matches.size() == 1);
    CHECK(trace.matches[0].rule == heuristics::RuleId::V3);
  }
  SUBCASE("polar utterance without a pattern stays neutral") {
    // The opinion refers to the entity through a pronoun.
    const auto u = make_utterance("c", "I work at Google and I love it a lot.");
    const auto rs = predict_cnn_path(u, m.gazetteer, m.cnn_models(), m.options());
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].polarity == Polarity::neutral);
  }
}

TEST_CASE("records round trip through json") {
  auto r = record("Google", Polarity::positive, "2024-03-01T10:00:00Z");
  r.call_id = "c1";
  CHECK(record_from_json(to_json(r)) == r);
  auto bad = to_json(record("Google", Polarity::neutral, "2024-03-01"));
  bad["opinions"] = Json::array({Json{{"start", 1}, {"end", 2}, {"polarity", "POS"}}});
  CHECK_THROWS_AS(record_from_json(bad), ValidationError);
}

TEST_CASE("period_of") {
  CHECK(period_of("2024-03-05T10:00:00Z", Granularity::day) == "2024-03-05");
  CHECK(period_of("2024-03-05", Granularity::month) == "2024-03");
  CHECK(period_of("2021-01-01", Granularity::week) == "2020-W53");
  CHECK(period_of("2024-12-30", Granularity::week) == "2025-W01");
  CHECK(period_of(std::nullopt, Granularity::day) == kUndated);
  CHECK(period_of("yesterday", Granularity::day) == kUndated);
}

TEST_CASE("aggregate") {
  SUBCASE("two positive and one negative") {
    const std::vector<EntitySentimentRecord> rs = {record("Google", Polarity::positive, "2024-03-01"),
                                                   record("google", Polarity::positive, "2024-03-01T08:00:00Z"),
                                                   record("Google", Polarity::negative, "2024-03-01")};
    const auto a = aggregate(rs, Granularity::day);
    REQUIRE(a.size() == 1);
    CHECK(a[0].entity == "google");
    CHECK(a[0].positive == 2);
    CHECK(a[0].negative == 1);
    CHECK(a[0].neutral == 0);
    CHECK(a[0].net() == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("empty input") { CHECK(aggregate({}, Granularity::week).empty()); }
  SUBCASE("conservation and order invariance") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> names = {"Google", "Netflix", "Zoom", "Hulu"};
    std::vector<EntitySentimentRecord> rs;
    std::array<std::size_t, 3> per_class{};
    for (int i = 0; i < 1000; ++i) {
      const auto p = static_cast<Polarity>(rng() % 3);
      ++per_class[static_cast<std::size_t>(p)];
      const int day = 1 + static_cast<int>(rng() % 28);
      std::string ts = "2024-02-" + std::string(day < 10 ? "0" : "") + std::to_string(day);
      if (rng() % 10 == 0) ts = "";
      rs.push_back(record(names[rng() % names.size()], p, ts));
      if (ts.empty()) rs.back().timestamp.reset();
    }
    for (auto g : {Granularity::day, Granularity::week, Granularity::month}) {
      const auto a = aggregate(rs, g);
      std::array<std::size_t, 3> got{};
      for (const auto& x : a) {
        got[0] += x.positive;
        got[1] += x.negative;
        got[2] += x.neutral;
      }
      CHECK(got == per_class);
      auto shuffled = rs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(aggregate(shuffled, g) == a);
    }
  }
}

TEST_CASE("join_predictions") {
  using test_support::make_example;
  const auto gold = std::vector<ElsaExample>{make_example("g1", "I love Google", {{2, 3, EntityType::org}}, 0,
                                                          Polarity::positive, {{{1, 2}, OpinionPolarity::pos}})};
  SUBCASE("missing record counts as neutral") {
    const auto p = join_predictions(gold, {});
    REQUIRE(p.size() == 1);
    CHECK(p[0].polarity == Polarity::neutral);
  }
  SUBCASE("matching record") {
    auto r = record("Google", Polarity::positive, "");
    r.utterance_id = "g1";
    r.entity.span = {2, 3};
    CHECK(join_predictions(gold, {r})[0].polarity == Polarity::positive);
    CHECK_THROWS_AS(join_predictions(gold, {r, r}), ValidationError);
  }
  SUBCASE("unknown utterance id") {
    auto r = record("Google", Polarity::positive, "");
    r.utterance_id = "nope";
    try {
      join_predictions(gold, {r});
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.id() == "nope");
    }
  }
}

TEST_CASE("command line") {
  SUBCASE("usage errors") {
    CHECK(cli({}) == 2);
    CHECK(cli({"frobnicate"}) == 2);
    CHECK(cli({"evaluate", "--gold"}) == 2);
  }
  SUBCASE("help") {
    std::string out;
    CHECK(cli({"--help"}, &out) == 0);
    CHECK(out.find("predict") != std::string::npos);
  }
  SUBCASE("synth, predict, evaluate, aggregate") {
    test_support::TempDir dir;
    const auto& m = models();
    m.tagger.save(dir / "tagger");
    const auto corpus = (dir / "c.jsonl").string();
    REQUIRE(cli({"synth", "--out", corpus, "-n", "30", "--seed", "3"}) == 0);
    const auto gold = load_dataset(corpus);
    std::size_t entities = 0;
    std::set<std::string> seen;
    for (const auto& ex : gold.examples)
      if (seen.insert(ex.utterance.id).second) entities += m.gazetteer.detect(ex.utterance).size();

    const auto pred = (dir / "p.jsonl").string();
    std::string err;
    REQUIRE(cli({"predict", "--path", "tagger", "--in", corpus, "--out", pred, "--tagger", (dir / "tagger").string()},
                nullptr, &err) == 0);
    CHECK(load_records(pred).size() == entities);

    std::string metrics;
    REQUIRE(cli({"evaluate", "--gold", corpus, "--pred", pred}, &metrics) == 0);
    CHECK(Json::parse(metrics).contains("polarity"));

    std::string agg;
    CHECK(cli({"aggregate", "--in", pred, "--granularity", "month"}, &agg) == 0);
    CHECK(!agg.empty());

    std::ofstream(dir / "stray.jsonl") << R"({"utterance_id":"ghost","entity":{"start":0,"end":1,"type":"ORG","surface":"x"},"polarity":"neutral","opinions":[],"path":"tagger"})"
                                       << '\n';
    REQUIRE(cli({"evaluate", "--gold", corpus, "--pred", (dir / "stray.jsonl").string()}, nullptr, &err) == 1);
    CHECK(err.find("ghost") != std::string::npos);
  }
}
