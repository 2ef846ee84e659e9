#include "doctest.h"

#include <random>

#include "elsa/error.hpp"
#include "elsa/ner.hpp"
#include "support.hpp"

using namespace elsa;
using namespace elsa::ner;

namespace {

Gazetteer shipped_gazetteer() { return Gazetteer::load(test_support::data_file("gazetteer.tsv")); }

EntityMention mention(const Utterance& u, int s, int e, EntityType t) { return {{s, e}, t, span_surface(u, {s, e})}; }

}  // namespace

TEST_CASE("gazetteer detection") {
  const auto gaz = shipped_gazetteer();
  SUBCASE("Snapchat utterance") {
    const auto u = make_utterance("s", "I really don't like using Snapchat");
    const auto found = detect_entities(u, gaz);
    REQUIRE(found.size() == 1);
    CHECK(found[0].surface == "Snapchat");
    CHECK(found[0].type == EntityType::product);
    CHECK(found[0].span == TokenSpan{5, 6});
  }
  SUBCASE("no entity words") { CHECK(detect_entities(make_utterance("n", "I called about my bill"), gaz).empty()); }
  SUBCASE("two entities, sorted and disjoint") {
    const auto u = make_utterance("t", "Netflix beats Hulu");
    const auto found = detect_entities(u, gaz);
    REQUIRE(found.size() == 2);
    CHECK(found[0].surface == "Netflix");
    CHECK(found[1].surface == "Hulu");
    CHECK(found[0].span.end <= found[1].span.start);
  }
  SUBCASE("case-insensitive longest match") {
    const auto u = make_utterance("l", "my apple watch and my galaxy s21");
    const auto found = detect_entities(u, gaz);
    REQUIRE(found.size() == 2);
    CHECK(found[0].span == TokenSpan{1, 3});
    CHECK(found[0].surface == "apple watch");
    CHECK(found[1].span == TokenSpan{5, 7});
  }
  SUBCASE("an unloaded model refuses to run") {
    CHECK_THROWS_AS(detect_entities(make_utterance("x", "Google"), Gazetteer{}), ModelNotLoaded);
  }
}

TEST_CASE("gazetteer file errors") {
  test_support::TempDir dir;
  test_support::write_file(dir / "g.tsv", "# comment\nGoogle\tORG\nAcme\tCOMPANY\n");
  try {
    Gazetteer::load(dir / "g.tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(Gazetteer::load(dir / "missing.tsv"), IoError);
}

TEST_CASE("insert_ne_markers") {
  SUBCASE("Snapchat") {
    const auto u = make_utterance("s", "I really don’t like using Snapchat");
    const auto m = insert_ne_markers(u, mention(u, 5, 6, EntityType::product));
    CHECK(m.tokens == std::vector<std::string>{"I", "really", "don’t", "like", "using", "_NE_", "Snapchat"});
    CHECK(m.marker_positions == std::vector<std::size_t>{5});
    CHECK(m.word_count() == u.tokens.size());
  }
  SUBCASE("target at position 0") {
    const auto u = make_utterance("z", "Google rocks");
    const auto m = insert_ne_markers(u, mention(u, 0, 1, EntityType::org));
    CHECK(m.tokens.front() == "_NE_");
    CHECK(m.offset_map == std::vector<int>{-1, 0, 1});
    CHECK(strip_markers(m) == u);
  }
  SUBCASE("invalid span") {
    const auto u = make_utterance("z", "Google rocks");
    CHECK_THROWS_AS(insert_ne_markers(u, {{1, 5}, EntityType::org, "x"}), Error);
    CHECK_THROWS_AS(insert_ne_markers(u, {{1, 1}, EntityType::org, "x"}), Error);
  }
  SUBCASE("multi-entity utterance, one pass per target") {
    const auto u = make_utterance("m", "I tried Hulu before but Netflix rocks.");
    for (const auto& e : detect_entities(u, shipped_gazetteer())) {
      const auto m = insert_ne_markers(u, e);
      CHECK(m.marker_positions.size() == 1);
      CHECK(m.tokens[m.marker_positions[0] + 1] == e.surface);
      CHECK(strip_markers(m) == u);
    }
  }
}

TEST_CASE("strip_markers rejects broken bookkeeping") {
  const auto u = make_utterance("s", "I love Google");
  auto m = insert_ne_markers(u, mention(u, 2, 3, EntityType::org));
  auto broken = m;
  broken.offset_map[1] = 7;
  CHECK_THROWS_AS(strip_markers(broken), Error);
  broken = m;
  broken.marker_positions = {0};
  CHECK_THROWS_AS(strip_markers(broken), Error);
}

TEST_CASE("marker round trip on random synthetic utterances") {
  const auto split = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                               100, 8, default_synthetic_options());
  std::mt19937_64 rng(3);
  int ok = 0;
  for (const auto& ex : split.examples) {
    const auto& e = ex.entities[std::uniform_int_distribution<std::size_t>(0, ex.entities.size() - 1)(rng)];
    const auto m = insert_ne_markers(ex.utterance, e);
    // offset_map is a bijection from non-marker positions onto the original indices.
    std::vector<int> seen;
    for (int o : m.offset_map)
      if (o >= 0) seen.push_back(o);
    bool bijective = seen.size() == ex.utterance.tokens.size();
    for (std::size_t i = 0; bijective && i < seen.size(); ++i) bijective = seen[i] == static_cast<int>(i);
    if (bijective && strip_markers(m) == ex.utterance) ++ok;
  }
  CHECK(ok == 100);
}
