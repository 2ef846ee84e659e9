#include "doctest.h"

#include <set>

#include "elsa/corpus.hpp"
#include "elsa/error.hpp"
#include "support.hpp"

using namespace elsa;
using test_support::make_example;
using test_support::TempDir;

namespace {

ElsaExample table1_google() {
  return make_example("t1", "I work at Google and I love it a lot.", {{3, 4, EntityType::org}}, 0,
                      Polarity::positive, {{{6, 7}, OpinionPolarity::pos}});
}

}  // namespace

TEST_CASE("tokenize splits punctuation and keeps contractions") {
  CHECK(tokenize("I work at Google and I love it a lot.") ==
        std::vector<std::string>{"I", "work", "at", "Google", "and", "I", "love", "it", "a", "lot", "."});
  CHECK(tokenize("She's very impressed how MAC works so well.").front() == "She's");
  CHECK(tokenize("   ").empty());
}

TEST_CASE("load_dataset reads the Google example") {
  TempDir dir;
  const auto path = dir / "one.jsonl";
  test_support::write_file(path, to_json(table1_google()).dump() + "\n");
  const auto split = load_dataset(path);
  REQUIRE(split.examples.size() == 1);
  const auto& ex = split.examples[0];
  CHECK(ex.polarity == Polarity::positive);
  CHECK(ex.target_entity().surface == "Google");
  CHECK(ex.target_entity().type == EntityType::org);
  REQUIRE(ex.opinions.size() == 1);
  CHECK(ex.utterance.tokens[static_cast<std::size_t>(ex.opinions[0].span.start)] == "love");
}

TEST_CASE("load_dataset on an empty file yields an empty split") {
  TempDir dir;
  test_support::write_file(dir / "empty.jsonl", "");
  CHECK(load_dataset(dir / "empty.jsonl").examples.empty());
}

TEST_CASE("load_dataset rejects overlapping opinion spans by id") {
  TempDir dir;
  auto ex = make_example("bad-1", "I really love Google", {{3, 4, EntityType::org}}, 0, Polarity::positive,
                         {{{1, 3}, OpinionPolarity::pos}, {{2, 3}, OpinionPolarity::pos}});
  test_support::write_file(dir / "bad.jsonl", to_json(ex).dump() + "\n");
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.id() == "bad-1");
  }
}

TEST_CASE("load_dataset reports the line of malformed json") {
  TempDir dir;
  test_support::write_file(dir / "bad.jsonl", to_json(table1_google()).dump() + "\n{not json\n");
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("load_dataset rejects duplicate ids and the reserved marker") {
  TempDir dir;
  const std::string line = to_json(table1_google()).dump() + "\n";
  test_support::write_file(dir / "dup.jsonl", line + line);
  CHECK_THROWS_AS(load_dataset(dir / "dup.jsonl"), ValidationError);

  auto marked = make_example("m", "I love _NE_ Google", {{3, 4, EntityType::org}}, 0, Polarity::positive,
                             {{{1, 2}, OpinionPolarity::pos}});
  test_support::write_file(dir / "marker.jsonl", to_json(marked).dump() + "\n");
  CHECK_THROWS_AS(load_dataset(dir / "marker.jsonl"), ValidationError);
}

TEST_CASE("save/load round trips") {
  TempDir dir;
  SUBCASE("one example") {
    DatasetSplit split{SplitName::test, {table1_google()}};
    save_dataset(split, dir / "a.jsonl");
    CHECK(load_dataset(dir / "a.jsonl", SplitName::test) == split);
  }
  SUBCASE("empty split") {
    DatasetSplit split{SplitName::dev, {}};
    save_dataset(split, dir / "a.jsonl");
    CHECK(load_dataset(dir / "a.jsonl", SplitName::dev) == split);
  }
  SUBCASE("50 synthetic examples, second save is byte-identical") {
    auto split = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                           50, 11, default_synthetic_options());
    split.name = SplitName::test;
    save_dataset(split, dir / "a.jsonl");
    const auto loaded = load_dataset(dir / "a.jsonl", SplitName::test);
    CHECK(loaded == split);
    save_dataset(loaded, dir / "b.jsonl");
    CHECK(test_support::read_file(dir / "a.jsonl") == test_support::read_file(dir / "b.jsonl"));
  }
}

TEST_CASE("unknown fields survive a round trip") {
  TempDir dir;
  Json j = to_json(table1_google());
  j["annotator"] = "a7";
  j["meta"] = {{"channel", "phone"}};
  test_support::write_file(dir / "x.jsonl", j.dump() + "\n");
  const auto split = load_dataset(dir / "x.jsonl");
  CHECK(to_json(split.examples.at(0)) == j);
}

TEST_CASE("validate_example") {
  SUBCASE("annotated MAC utterance is valid") {
    auto ex = make_example("t2", "She's very impressed how MAC works so well.", {{4, 5, EntityType::product}}, 0,
                           Polarity::positive, {{{1, 3}, OpinionPolarity::pos}});
    CHECK(validate_example(ex).empty());
  }
  SUBCASE("neutral with an opinion span") {
    auto ex = make_example("n", "I love Google", {{2, 3, EntityType::org}}, 0, Polarity::neutral,
                           {{{1, 2}, OpinionPolarity::pos}});
    const auto v = validate_example(ex);
    CHECK(std::find(v.begin(), v.end(), "neutral example has opinion spans") != v.end());
  }
  SUBCASE("span past the end names the span") {
    auto ex = make_example("s", "I love Google", {{2, 3, EntityType::org}}, 0, Polarity::positive,
                           {{{1, 9}, OpinionPolarity::pos}});
    const auto v = validate_example(ex);
    REQUIRE(!v.empty());
    CHECK(v.front().find("[1, 9)") != std::string::npos);
  }
  SUBCASE("bad target index") {
    auto ex = make_example("s", "I love Google", {{2, 3, EntityType::org}}, 3, Polarity::neutral);
    CHECK(!validate_example(ex).empty());
  }
}

TEST_CASE("sample_balanced") {
  const auto syn = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                             200, 5, default_synthetic_options());
  std::vector<Utterance> pool;
  for (const auto& ex : syn.examples) pool.push_back(ex.utterance);
  REQUIRE(pool.size() == 200);

  // 60 polar-eligible items; the last 10 have no entity.
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < pool.size(); ++i) position[pool[i].id] = i;
  auto has_entity = [&](const Utterance& u) -> std::size_t { return position.at(u.id) < 190 ? 1 : 0; };
  auto sentiment = [&](const Utterance& u) {
    return position.at(u.id) < 60 ? Polarity::negative : Polarity::neutral;
  };

  SUBCASE("both predicates hold on every pick") {
    const auto picked = sample_balanced(pool, has_entity, sentiment, 50, 50, 1);
    CHECK(picked.size() == 100);
    std::size_t polar = 0;
    for (const auto& u : picked) {
      CHECK(has_entity(u) > 0);
      if (sentiment(u) != Polarity::neutral) ++polar;
    }
    CHECK(polar == 50);
  }
  SUBCASE("deterministic given the seed") {
    CHECK(sample_balanced(pool, has_entity, sentiment, 10, 20, 9) ==
          sample_balanced(pool, has_entity, sentiment, 10, 20, 9));
  }
  SUBCASE("zero counts") { CHECK(sample_balanced(pool, has_entity, sentiment, 0, 0, 1).empty()); }
  SUBCASE("insufficient candidates report bucket sizes") {
    try {
      sample_balanced(pool, has_entity, sentiment, 61, 0, 1);
      FAIL("expected InsufficientCandidates");
    } catch (const InsufficientCandidates& e) {
      CHECK(e.polar_found == 60);
      CHECK(e.neutral_found == 130);
    }
  }
}

TEST_CASE("sample_balanced at production scale") {
  std::vector<Utterance> pool;
  for (int i = 0; i < 24000; ++i) pool.push_back(make_utterance("u" + std::to_string(i), "I love Google"));
  auto detector = [](const Utterance&) -> std::size_t { return 1; };
  // 13000 polar and 11000 neutral candidates.
  auto sentiment = [](const Utterance& u) {
    return std::stoi(u.id.substr(1)) % 24 < 13 ? Polarity::positive : Polarity::neutral;
  };
  const auto picked = sample_balanced(pool, detector, sentiment, 13000, 10000, 3);
  CHECK(picked.size() == 23000);
  const auto polar = std::count_if(picked.begin(), picked.end(),
                                   [&](const Utterance& u) { return sentiment(u) != Polarity::neutral; });
  CHECK(polar == 13000);
}

TEST_CASE("synthetic corpus") {
  SUBCASE("single template: opinion lands on the filled slot") {
    SyntheticOptions opts;
    opts.positive_weight = 1.0;
    opts.negative_weight = 0.0;
    opts.neutral_weight = 0.0;
    const auto split = generate_synthetic_corpus({"I {OPN} {ENT}"}, {{"Google", EntityType::org}},
                                                 {{"love", OpinionPolarity::pos, ""}}, 3, 1, opts);
    REQUIRE(split.examples.size() == 3);
    for (const auto& ex : split.examples) {
      CHECK(ex.polarity == Polarity::positive);
      REQUIRE(ex.opinions.size() == 1);
      CHECK(ex.utterance.tokens[static_cast<std::size_t>(ex.opinions[0].span.start)] == "love");
      CHECK(ex.target_entity().surface == "Google");
    }
  }
  SUBCASE("n = 0") {
    CHECK(generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(), 0, 1)
              .examples.empty());
  }
  SUBCASE("template without an entity slot") {
    CHECK_THROWS_AS(generate_synthetic_corpus({"I {OPN} it"}, default_entities(), default_opinion_lexicon(), 5, 1),
                    Error);
  }
  SUBCASE("same seed twice gives identical splits; different seeds differ") {
    const auto a = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                             500, 21, default_synthetic_options());
    const auto b = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                             500, 21, default_synthetic_options());
    const auto c = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                             500, 22, default_synthetic_options());
    CHECK(a == b);
    CHECK(!(a == c));
  }
  SUBCASE("every generated example is valid with unique ids") {
    const auto split = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                                 800, 4, default_synthetic_options());
    std::set<std::string> ids;
    for (const auto& ex : split.examples) {
      CHECK(validate_example(ex).empty());
      CHECK(ids.insert(ex.id()).second);
    }
  }
}
