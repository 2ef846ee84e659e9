// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "elsa/error.hpp"
#include "elsa/nn/loss.hpp"
#include "elsa/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace elsa;
namespace fs = std::filesystem;

namespace {

using LD = nn::MatrixT<long double>;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- shared desk data and models ------------------------------------------------

struct Desk {
  std::vector<ElsaExample> train, dev, test;
  std::optional<cnn::TextCnn> cnn;
  std::optional<tagger::TaggerModel> tagger;
  double cnn_train_seconds = 0.0;
  double tagger_train_seconds = 0.0;
};

std::string base_id(const ElsaExample& ex) { return ex.utterance.id; }

// Utterance-disjoint split: examples that share an utterance stay together.
void split_groups(const std::vector<ElsaExample>& all, double fraction, std::uint64_t seed,
                  std::vector<ElsaExample>& rest, std::vector<ElsaExample>& held) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ElsaExample*>> groups;
  for (const auto& ex : all) {
    auto& g = groups[base_id(ex)];
    if (g.empty()) order.push_back(base_id(ex));
    g.push_back(&ex);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(all.size())));
  std::set<std::string> held_ids;
  std::size_t n = 0;
  for (const auto& id : order) {
    if (n >= want) break;
    held_ids.insert(id);
    n += groups[id].size();
  }
  for (const auto& ex : all) (held_ids.count(base_id(ex)) ? held : rest).push_back(ex);
}

Desk& desk() {
  static Desk d = [] {
    Desk d;
    const auto corpus = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                                  2000, 2024, default_synthetic_options());
    std::vector<ElsaExample> train_dev;
    split_groups(corpus.examples, 0.2, 1, train_dev, d.test);
    split_groups(train_dev, 0.1, 2, d.train, d.dev);
    return d;
  }();
  return d;
}

const cnn::TextCnn& desk_cnn() {
  auto& d = desk();
  if (!d.cnn) {
    const auto t0 = Clock::now();
    d.cnn = cnn::train_cnn(cnn::utterance_sentiment_items(d.train), cnn::utterance_sentiment_items(d.dev),
                           cnn::CnnConfig{})
                .model;
    d.cnn_train_seconds = seconds_since(t0);
  }
  return *d.cnn;
}

const tagger::TaggerModel& desk_tagger() {
  auto& d = desk();
  if (!d.tagger) {
    const auto t0 = Clock::now();
    std::vector<std::vector<std::string>> vocab;
    for (const auto& ex : d.train) vocab.push_back(ex.utterance.tokens);
    tagger::TaggerConfig cfg;
    tagger::TaggerModel m(vocab, cfg);
    tagger::train_elsa(m, tagger::make_elsa_items(d.train), tagger::make_elsa_items(d.dev), cfg);
    d.tagger = std::move(m);
    d.tagger_train_seconds = seconds_since(t0);
  }
  return *d.tagger;
}

struct Shipped {
  heuristics::SentimentLexicon lexicon = heuristics::load_lexicon(test_support::data_file("lexicon.tsv"));
  heuristics::ModifierConfig modifiers =
      heuristics::load_modifier_config(test_support::data_file("modifiers.json"));
  ner::Gazetteer gazetteer = ner::Gazetteer::load(test_support::data_file("gazetteer.tsv"));
  heuristics::ReferencePosTagger pos_tagger{lexicon};
};

const Shipped& shipped() {
  static const Shipped s;
  return s;
}

eval::Prediction pick_target(const ElsaExample& ex, const std::vector<pipeline::EntitySentimentRecord>& rs) {
  for (const auto& r : rs)
    if (r.entity.span == ex.target_entity().span) return {r.polarity, r.opinions};
  return {};
}

eval::Prediction tagger_predict(const ElsaExample& ex) {
  return pick_target(ex, pipeline::predict_tagger_entities(ex.utterance, ex.entities, desk_tagger()));
}

eval::Prediction cnn_predict(const ElsaExample& ex) {
  const auto& s = shipped();
  pipeline::CnnPathOptions opt;
  opt.modifiers = s.modifiers;
  return pick_target(ex, pipeline::predict_cnn_entities(ex.utterance, ex.entities,
                                                        {desk_cnn(), s.pos_tagger, s.lexicon}, opt));
}

// --- criteria ------------------------------------------------------------------------

// Log-sum-exp in long double with no max shift.
long double reference_ce(const LD& z, const std::vector<int>& gold) {
  long double total = 0;
  for (Eigen::Index n = 0; n < z.rows(); ++n) {
    long double sum = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) sum += std::exp(z(n, c));
    total += std::log(sum) - z(n, gold[static_cast<std::size_t>(n)]);
  }
  return total / static_cast<long double>(z.rows());
}

Outcome cross_entropy_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 16)(rng);
    const int c = std::uniform_int_distribution<int>(2, 10)(rng);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    nn::Matrix z(n, c);
    for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = u(rng);
    std::vector<int> gold;
    for (int r = 0; r < n; ++r) gold.push_back(std::uniform_int_distribution<int>(0, c - 1)(rng));
    const double got = nn::cross_entropy_loss<double>(z, gold);
    const auto ref = static_cast<double>(reference_ce(z.cast<long double>(), gold));
    worst = std::max(worst, std::abs(got - ref) / std::max(std::abs(ref), 1e-300));
  }
  double uniform_err = 0.0;
  for (int c = 2; c <= 10; ++c) {
    const nn::Matrix z = nn::Matrix::Constant(3, c, 1.7);
    const std::vector<int> gold{0, c - 1, c / 2};
    uniform_err = std::max(uniform_err, std::abs(nn::cross_entropy_loss<double>(z, gold) - std::log(double(c))));
  }
  return {worst <= 1e-9 && uniform_err <= 1e-12,
          "max rel err " + fmt("%.2e", worst) + ", uniform |L - ln C| " + fmt("%.2e", uniform_err)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    const int c = std::uniform_int_distribution<int>(2, 6)(rng);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    LD z(n, c);
    for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = u(rng);
    std::vector<int> gold;
    for (int r = 0; r < n; ++r) gold.push_back(std::uniform_int_distribution<int>(0, c - 1)(rng));
    const LD g = nn::loss_gradient<long double>(z, gold);
    const long double h = 1e-5L;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      LD p = z, m = z;
      p.data()[k] += h;
      m.data()[k] -= h;
      const long double fd =
          (nn::cross_entropy_loss<long double>(p, gold) - nn::cross_entropy_loss<long double>(m, gold)) / (2 * h);
      const long double rel = std::abs(g.data()[k] - fd) / std::max(std::abs(fd), 1e-12L);
      worst = std::max(worst, static_cast<double>(rel));
    }
  }
  return {worst <= 1e-4, "max rel err " + fmt("%.2e", worst)};
}

Outcome ig_exactness_and_completeness() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> nd;
  double linear_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    nn::Matrix w(6, 5), x(6, 5);
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      w.data()[k] = nd(rng);
      x.data()[k] = nd(rng);
    }
    const nn::Matrix base = nn::Matrix::Zero(6, 5);
    cnn::GradientFn f = [&](const nn::Matrix& in) { return std::make_pair(w.cwiseProduct(in).sum(), w); };
    for (int steps : {1, 10, 100}) {
      const auto a = cnn::integrated_gradients(f, x, base, steps);
      for (Eigen::Index r = 0; r < 6; ++r)
        linear_err = std::max(linear_err, std::abs(a.scores[static_cast<std::size_t>(r)] -
                                                   w.row(r).cwiseProduct(x.row(r)).sum()));
    }
  }

  const auto& model = desk_cnn();
  std::set<std::vector<std::string>> seen;
  int checked = 0, failed = 0;
  double worst_ratio = 0.0;
  for (const auto& ex : desk().test) {
    if (checked == 50) break;
    if (!seen.insert(ex.utterance.tokens).second) continue;
    const int target = static_cast<int>(cnn::predict_class(model, ex.utterance.tokens));
    const auto a = cnn::integrated_gradients(model, ex.utterance.tokens, target, 256);
    const double tol = 1e-3 * std::abs(a.f_input - a.f_baseline) + 1e-6;
    worst_ratio = std::max(worst_ratio, a.convergence_gap / tol);
    if (a.convergence_gap > tol) ++failed;
    ++checked;
  }
  return {linear_err <= 1e-9 && checked == 50 && failed == 0,
          "linear max err " + fmt("%.2e", linear_err) + "; completeness " + std::to_string(checked - failed) + "/" +
              std::to_string(checked) + " within tolerance, worst gap/tol " + fmt("%.3f", worst_ratio)};
}

Outcome heuristic_examples() {
  const auto& s = shipped();
  auto run = [&](const std::string& text) {
    const auto u = make_utterance("x", text);
    return std::make_pair(u, heuristics::match_patterns(u.tokens, heuristics::pos_tag(u.tokens, s.pos_tagger),
                                                        s.gazetteer.detect(u), {}, s.lexicon,
                                                        heuristics::kDefaultMaxGap, s.modifiers));
  };
  const std::vector<std::tuple<std::string, std::string, std::string>> phrases = {
      {"I'm so happy that Google made this", "Google", "happy"},
      {"that was awesome of Netflix to do", "Netflix", "awesome"},
      {"Android sucks", "Android", "sucks"},
      {"my hatred of LaTeX", "LaTeX", "hatred"},
      {"Netflix is garbage", "Netflix", "garbage"},
      {"classic LaTeX awesomeness", "LaTeX", "awesomeness"},
  };
  int ok = 0;
  for (const auto& [text, entity, word] : phrases) {
    const auto [u, ms] = run(text);
    if (ms.size() == 1 && ms[0].entity.surface == entity &&
        u.tokens[static_cast<std::size_t>(ms[0].opinion.span.start)] == word)
      ++ok;
  }

  // Customer-service utterances against their gold annotations.
  int gold_ok = 0;
  {
    const auto [u, ms] = run("I work at Google and I love it a lot.");
    gold_ok += ms.empty();  // the opinion reaches the entity only through "it"
  }
  {
    const auto [u, ms] = run("She's very impressed how MAC works so well.");
    const TokenSpan gold{1, 3};
    gold_ok += ms.size() == 1 && ms[0].entity.surface == "MAC" && ms[0].opinion.polarity == OpinionPolarity::pos &&
               ms[0].opinion.span.start >= gold.start && ms[0].opinion.span.end <= gold.end;
  }
  gold_ok += run("He has hard time finding a good yogurt from Walmart.").second.empty();
  gold_ok += run("It's quite difficult to navigate the mobile app of Instacart.").second.empty();
  return {ok == 6 && gold_ok == 4,
          std::to_string(ok) + "/6 phrases, " + std::to_string(gold_ok) + "/4 annotated utterances consistent"};
}

Outcome marker_round_trip() {
  const auto split = generate_synthetic_corpus(default_templates(), default_entities(), default_opinion_lexicon(),
                                               1000, 505, default_synthetic_options());
  std::mt19937_64 rng(505);
  int ok = 0;
  for (const auto& ex : split.examples) {
    const auto& e = ex.entities[std::uniform_int_distribution<std::size_t>(0, ex.entities.size() - 1)(rng)];
    const auto m = ner::insert_ne_markers(ex.utterance, e);
    std::vector<int> mapped;
    for (int o : m.offset_map)
      if (o >= 0) mapped.push_back(o);
    bool bijective = mapped.size() == ex.utterance.tokens.size();
    for (std::size_t i = 0; bijective && i < mapped.size(); ++i) bijective = mapped[i] == static_cast<int>(i);
    ok += bijective && m.marker_positions.size() == 1 && ner::strip_markers(m) == ex.utterance;
  }
  return {ok == 1000 && split.examples.size() == 1000, std::to_string(ok) + "/1000 round trips"};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(606);
  int ok = 0;
  for (int i = 0; i < 500; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<Polarity> gold, pred;
    std::vector<std::vector<OpinionSpan>> gs, ps;
    for (int k = 0; k < n; ++k) {
      gold.push_back(oracle::random_polarity(rng));
      pred.push_back(oracle::random_polarity(rng));
      const int len = std::uniform_int_distribution<int>(1, 12)(rng);
      gs.push_back(oracle::random_spans(rng, len));
      ps.push_back(rng() % 3 == 0 ? gs.back() : oracle::random_spans(rng, len));
    }
    const auto r = eval::polarity_report(gold, pred);
    const auto o = oracle::polarity_metrics(gold, pred);
    bool same = true;
    for (std::size_t c = 0; c < 3; ++c) {
      same = same && r.classes[c].support == o[c].support && std::abs(r.classes[c].precision - o[c].p) <= 1e-12 &&
             std::abs(r.classes[c].recall - o[c].r) <= 1e-12 && std::abs(r.classes[c].f1 - o[c].f) <= 1e-12;
      for (std::size_t p = 0; p < 3; ++p) {
        std::size_t count = 0;
        for (int k = 0; k < n; ++k)
          count += polarity_index(gold[k]) == c && polarity_index(pred[k]) == p;
        same = same && r.confusion[c][p] == count;
      }
    }
    same = same && std::abs(r.weighted.f1 - o[3].f) <= 1e-12;
    const auto sr = eval::span_report(gs, ps);
    const auto sc = oracle::span_counts(gs, ps);
    same = same && sr.true_positives == sc.tp && sr.predicted == sc.predicted && sr.gold == sc.gold;
    ok += same;
  }
  const Polarity P = Polarity::positive, N = Polarity::negative, U = Polarity::neutral;
  const std::vector<Polarity> g{P, P, N, U}, p{P, N, N, U};
  const double worked = eval::polarity_report(g, p).weighted.f1;
  return {ok == 500 && std::abs(worked - 0.75) <= 1e-12,
          std::to_string(ok) + "/500 instances agree, worked example weighted F1 " + fmt("%.4f", worked)};
}

Outcome desk_end_to_end() {
  const auto& model = desk_tagger();
  const auto& test = desk().test;
  std::vector<eval::Prediction> preds;
  for (const auto& ex : test) preds.push_back(tagger_predict(ex));
  const auto r = eval::metrics_report(test, preds);
  const double minutes = desk().tagger_train_seconds / 60.0;
  (void)model;
  return {r.polarity.weighted.f1 >= 0.90 && r.spans.f1 >= 0.80 && minutes < 15.0,
          "train " + std::to_string(desk().train.size()) + ", test " + std::to_string(test.size()) +
              "; weighted F1 " + fmt("%.4f", r.polarity.weighted.f1) + ", span F1 " + fmt("%.4f", r.spans.f1) +
              ", training " + fmt("%.1f", desk().tagger_train_seconds) + " s"};
}

// Call-centre chatter with no entity and no opinion word.
const std::vector<std::string>& filler() {
  static const std::vector<std::string> f = {
      "okay so let me pull up the account first and confirm the address on file for you .",
      "um yeah I have been on hold for about twenty minutes now and the line keeps cutting out .",
      "the reference number should be in the email we sent last week , can you read it back to me ?",
      "alright one moment please while I check the notes from the previous call .",
      "so the order was placed on Monday and it still says processing on my side .",
      "sure , and is the billing address the same as the shipping address ?",
  };
  return f;
}

// Same annotation inside a wrapper of filler sentences, more than 45 tokens long.
ElsaExample lengthen(const ElsaExample& ex, std::size_t k) {
  const auto& f = filler();
  std::string prefix;
  std::size_t i = k;
  while (tokenize(prefix).size() + ex.utterance.tokens.size() < 30) prefix += f[i++ % f.size()] + " ";
  std::string suffix;
  while (tokenize(prefix).size() + ex.utterance.tokens.size() + tokenize(suffix).size() <= 45)
    suffix += " " + f[i++ % f.size()];
  const int shift = static_cast<int>(tokenize(prefix).size());
  ElsaExample out = ex;
  out.utterance = make_utterance("long-" + std::to_string(k), prefix + ex.utterance.text + suffix);
  out.utterance.call_id = ex.utterance.call_id;
  out.utterance.timestamp = ex.utterance.timestamp;
  for (auto& e : out.entities) e.span = {e.span.start + shift, e.span.end + shift};
  for (auto& o : out.opinions) o.span = {o.span.start + shift, o.span.end + shift};
  return out;
}

Outcome length_ordering() {
  const auto& test = desk().test;
  std::vector<ElsaExample> data;
  std::size_t n_short = 0, n_long = 0;
  for (const auto& ex : test)
    if (ex.utterance.tokens.size() < 8) {
      data.push_back(ex);
      ++n_short;
    }
  for (std::size_t k = 0; k < test.size(); ++k) {
    auto ex = lengthen(test[k], k);
    const auto& core = test[k].utterance.tokens;
    const auto at = static_cast<std::size_t>(ex.target_entity().span.start - test[k].target_entity().span.start);
    if (!validate_example(ex).empty() || ex.utterance.tokens.size() <= 45 ||
        !std::equal(core.begin(), core.end(), ex.utterance.tokens.begin() + static_cast<std::ptrdiff_t>(at)))
      continue;
    data.push_back(std::move(ex));
    ++n_long;
  }
  std::vector<eval::Prediction> tp, cp;
  for (const auto& ex : data) {
    tp.push_back(tagger_predict(ex));
    cp.push_back(cnn_predict(ex));
  }
  const auto tr = eval::robustness_report(data, tp);
  const auto cr = eval::robustness_report(data, cp);
  auto span_f1 = [](const eval::RobustnessReport& r, const std::string& name) {
    for (const auto& row : r.rows)
      if (row.name == name && row.metrics) return row.metrics->spans.f1;
    return std::nan("");
  };
  const auto names = eval::default_slices();
  const std::string short_name = names[0].name, long_name = names[1].name;
  const double ts = span_f1(tr, short_name), tl = span_f1(tr, long_name);
  const double cs = span_f1(cr, short_name), cl = span_f1(cr, long_name);
  bool precise = true;
  std::string pr;
  for (const auto& row : cr.rows) {
    if (!row.metrics) continue;
    const auto& s = row.metrics->spans;
    precise = precise && s.precision >= s.recall;
    pr += " " + row.name + " " + fmt("%.3f", s.precision) + "/" + fmt("%.3f", s.recall);
  }
  const bool ordered = tl < ts && cl < cs;
  return {ordered && precise && n_short > 0 && n_long > 0,
          std::to_string(n_short) + " short, " + std::to_string(n_long) + " long; span F1 short/long tagger " +
              fmt("%.3f", ts) + "/" + fmt("%.3f", tl) + ", cnn " + fmt("%.3f", cs) + "/" + fmt("%.3f", cl) +
              "; cnn P/R" + pr};
}

std::map<std::string, std::string> directory_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = test_support::read_file(e.path());
  return out;
}

Outcome determinism() {
  auto run_once = [](const fs::path& dir, std::string& failure) {
    std::ostringstream out, err;
    auto cli = [&](std::vector<std::string> args) {
      if (!failure.empty()) return;
      if (pipeline::run_cli(args, out, err) != 0) failure = args[0] + ": " + err.str();
    };
    const auto p = [&](const char* name) { return (dir / name).string(); };
    test_support::write_file(dir / "tagger.json", R"({"max_epochs": 3})");
    test_support::write_file(dir / "cnn.json", R"({"max_epochs": 3})");
    cli({"synth", "--out", p("train.jsonl"), "-n", "300", "--seed", "9"});
    cli({"synth", "--out", p("test.jsonl"), "-n", "60", "--seed", "10", "--id-prefix", "t"});
    cli({"train-cnn", "--train", p("train.jsonl"), "--config", p("cnn.json"), "--out", p("cnn")});
    cli({"train-elsa", "--train", p("train.jsonl"), "--config", p("tagger.json"), "--out", p("tagger")});
    cli({"predict", "--path", "tagger", "--in", p("test.jsonl"), "--tagger", p("tagger"), "--out", p("pred-tagger.jsonl")});
    cli({"predict", "--path", "cnn", "--in", p("test.jsonl"), "--cnn", p("cnn"), "--out", p("pred-cnn.jsonl")});
    return directory_bytes(dir);
  };
  test_support::TempDir a, b;
  std::string fa, fb;
  const auto da = run_once(a.path(), fa);
  const auto db = run_once(b.path(), fb);
  if (!fa.empty() || !fb.empty()) return {false, "run failed: " + fa + fb};
  std::size_t differing = 0;
  for (const auto& [name, bytes] : da) differing += !db.count(name) || db.at(name) != bytes;
  const bool have = da.count("pred-cnn.jsonl") && da.count("pred-tagger.jsonl");
  return {have && differing == 0 && da.size() == db.size(),
          std::to_string(da.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "cross-entropy oracle", 5, cross_entropy_oracle},
      {2, "loss gradient vs finite differences", 30, gradient_check},
      {3, "IG exactness and completeness", 120, ig_exactness_and_completeness},
      {4, "heuristic example phrases", 5, heuristic_examples},
      {5, "marker round trip", 5, marker_round_trip},
      {6, "metric oracle", 10, metric_oracle},
      {7, "desk-scale tagger end to end", 900, desk_end_to_end},
      {8, "length slices and CNN precision", 0, length_ordering},
      {9, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.limit_seconds > 0 && secs >= c.limit_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.limit_seconds) + " s limit";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << fmt("%.2f", secs)
              << " s): " << o.detail << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << criteria.size() - failures << "/" << criteria.size()
            << std::endl;
  return failures ? 1 : 0;
}
