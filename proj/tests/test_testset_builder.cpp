#include <doctest.h>

#include <sstream>

#include "docnmt/synth.hpp"
#include "docnmt/testset_builder.hpp"

using namespace docnmt;

namespace {

const LexiconMorphology& toy() { return LexiconMorphology::toy(); }

Fragment fragment_of(const std::vector<std::pair<std::string, std::string>>& sents) {
  Fragment f;
  for (std::size_t i = 0; i + 1 < sents.size(); ++i)
    f.context.push_back({sents[i].first, sents[i].second, double(i), double(i) + 1, 1.0});
  f.current = {sents.back().first, sents.back().second, double(sents.size()), double(sents.size()) + 1, 1.0};
  return f;
}

}  // namespace

TEST_CASE("politeness detection") {
  CHECK(detect_politeness("ty vidish dom", toy()) == Politeness::T);
  CHECK(detect_politeness("vy vidite dom", toy()) == Politeness::V);
  CHECK(detect_politeness("smotri na dom", toy()) == Politeness::T);
  CHECK(detect_politeness("vash dom zdes", toy()) == Politeness::V);
  CHECK(detect_politeness("ya vizhu dom", toy()) == Politeness::none);
  CHECK(detect_politeness("", toy()) == Politeness::none);
  CHECK(detect_politeness("ty vidite dom", toy()) == Politeness::none);
}

TEST_CASE("politeness switching") {
  CHECK(switch_politeness("ty vidish dom", toy()) == "vy vidite dom");
  CHECK(switch_politeness("skazhite mne", toy()) == "skazhi mne");
  CHECK_THROWS_AS(switch_politeness("ya vizhu dom", toy()), PolitenessError);
  CHECK_THROWS_AS(switch_politeness("ty vidite", toy()), PolitenessError);
}

TEST_CASE("switching is an involution that flips the detected register") {
  SynthConfig cfg;
  cfg.n_fragments = 100;
  cfg.you_rate = 0.5;
  for (const auto& p : gen_synthetic_corpus(cfg).train) {
    const Politeness before = detect_politeness(p.tgt, toy());
    if (before == Politeness::none) continue;
    const std::string sw = switch_politeness(p.tgt, toy());
    CHECK(detect_politeness(sw, toy()) == (before == Politeness::T ? Politeness::V : Politeness::T));
    CHECK(switch_politeness(sw, toy()) == p.tgt);
  }
}

TEST_CASE("a missing form is reported with the token") {
  std::istringstream text("tyk\ttyk\tNPRO,2per,sing,nomn\n");
  const auto lex = LexiconMorphology::read(text);
  try {
    switch_politeness("tyk", lex);
    FAIL("expected PolitenessError");
  } catch (const PolitenessError& e) {
    CHECK(std::string(e.what()).find("tyk") != std::string::npos);
  }
}

TEST_CASE("deixis: one eligible fragment gives two symmetric instances") {
  auto f = fragment_of({{"you know the city", "ty znaesh gorod"},
                        {"i see the house", "ya vizhu dom"},
                        {"you see the house", "ty vidish dom"}});
  BuildStats stats;
  std::vector<Fragment> frags{f};
  auto out = build_deixis_instances(frags, toy(), {}, &stats);
  REQUIRE(out.size() == 2);
  CHECK(stats.emitted == 2);
  CHECK(out[0].true_tgt == std::vector<std::string>{"ty znaesh gorod", "ya vizhu dom", "ty vidish dom"});
  CHECK(out[1].true_tgt == std::vector<std::string>{"vy znaete gorod", "ya vizhu dom", "vy vidite dom"});
  CHECK(out[0].contrastive[0].back() == out[1].true_tgt.back());
  CHECK(out[1].contrastive[0].back() == out[0].true_tgt.back());
  CHECK(out[0].contrastive[0][0] == out[0].true_tgt[0]);
  CHECK(out[0].distance == 2);
  CHECK(out[1].distance == 2);
  for (const auto& inst : out) CHECK(instance_problem(inst).empty());
}

TEST_CASE("deixis: skip reasons") {
  std::vector<Fragment> frags{
      fragment_of({{"sir , you know", "ser , vy znaete"}, {"you see", "vy vidite"}}),        // blocklisted
      fragment_of({{"you know", "ty znaesh"}, {"you see", "vy vidite"}}),                    // inconsistent
      fragment_of({{"i know", "ya znayu"}, {"you see", "vy vidite"}}),                       // no context
      fragment_of({{"you know", "vy znaete"}, {"i see", "ya vizhu"}}),                       // none in final
      fragment_of({{"Officer , you know", "vy znaete"}, {"you see", "vy vidite"}}),          // case-insensitive
  };
  BuildStats stats;
  CHECK(build_deixis_instances(frags, toy(), {}, &stats).empty());
  CHECK(stats.considered == 5);
  CHECK(stats.skipped["nominal politeness marker"] == 2);
  CHECK(stats.skipped["inconsistent politeness"] == 1);
  CHECK(stats.skipped["no politeness in context"] == 1);
  CHECK(stats.skipped["no politeness in final sentence"] == 1);
  DeixisOptions none;
  none.blocklist.clear();
  CHECK(build_deixis_instances(std::span<const Fragment>(frags.data(), 1), toy(), none).size() == 2);
}

TEST_CASE("alternative translations group by lemma and apply the threshold") {
  LexicalTable table;
  table.add("w", "t1", 0.5);
  table.add("w", "t2", 0.4);
  table.add("w", "t3", 0.08);
  Lemmatizer lem = [](const std::string& t) { return t == "t3" ? std::string("L2") : std::string("L1"); };
  auto alts = alternative_translations(table, "w", lem);
  REQUIRE(alts.size() == 1);
  CHECK(alts[0].lemma == "L1");
  CHECK(alts[0].mass == doctest::Approx(0.9).epsilon(1e-12));

  LexicalTable single;
  single.add("x", "only", 1.0);
  CHECK(alternative_translations(single, "x", lem).size() == 1);
  LexicalTable low;
  for (int i = 0; i < 20; ++i) low.add("y", "t" + std::to_string(i), 0.05);
  CHECK(alternative_translations(low, "y", [](const std::string& t) { return t; }).empty());
  CHECK(alternative_translations(table, "absent", lem).empty());
  CHECK_THROWS_AS(alternative_translations(table, "w", lem, 0.0), std::invalid_argument);
  // Exactly at the threshold counts.
  LexicalTable edge;
  edge.add("z", "a", 0.1);
  edge.add("z", "b", 0.9);
  CHECK(alternative_translations(edge, "z", [](const std::string& t) { return t; }).size() == 2);
}

TEST_CASE("lexical table file round trip and validation") {
  LexicalTable t;
  t.add("martha", "marta", 0.6);
  t.add("martha", "marfa", 0.4);
  std::stringstream ss;
  t.write(ss);
  auto back = LexicalTable::read(ss);
  CHECK(back.translations("martha") == t.translations("martha"));
  std::istringstream over("a\tb\t0.7\na\tc\t0.7\n");
  CHECK_THROWS_AS(LexicalTable::read(over), std::invalid_argument);
  std::istringstream bad("a\tb\tlots\n");
  CHECK_THROWS_AS(LexicalTable::read(bad), std::invalid_argument);
}

TEST_CASE("alignment parsing") {
  CHECK(parse_alignment("0-0 2-1") == Alignment{{0, 0}, {2, 1}});
  CHECK(alignment_text(parse_alignment("0-0 2-1")) == "0-0 2-1");
  CHECK(parse_alignment("").empty());
  CHECK_THROWS_AS(parse_alignment("0-x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_alignment("3"), std::invalid_argument);
}

namespace {

LexicalTable name_table() {
  LexicalTable t;
  t.add("martha", "marta", 0.3);
  t.add("martha", "martu", 0.2);
  t.add("martha", "marfa", 0.3);
  t.add("martha", "marfu", 0.2);
  t.add("daniel", "daniil", 0.95);
  t.add("daniel", "danila", 0.05);
  return t;
}

AlignedFragment aligned(const std::vector<std::pair<std::string, std::string>>& sents, const std::vector<std::string>& links) {
  AlignedFragment af{fragment_of(sents), {}};
  for (const auto& l : links) af.alignments.push_back(parse_alignment(l));
  return af;
}

}  // namespace

TEST_CASE("cohesion: two alternatives give two instances") {
  std::vector<AlignedFragment> frags{aligned({{"i see martha", "ya vizhu martu"}, {"he works", "on rabotaet"},
                                              {"martha reads the book", "marta chitaet dom"}},
                                             {"0-0 1-1 2-2", "0-0 1-1", "0-0 1-1 3-2"})};
  std::vector<std::string> freq{"i", "see", "he", "works", "reads", "the"};
  BuildStats stats;
  auto out = build_cohesion_instances(frags, name_table(), lemmatizer_from(toy()), freq, toy(), {}, &stats);
  REQUIRE(out.size() == 2);
  std::set<std::string> finals;
  for (const auto& inst : out) {
    CHECK(instance_problem(inst).empty());
    CHECK(inst.distance == 2);
    CHECK(inst.contrastive.size() == 1);
    CHECK(inst.contrastive[0][0] == inst.true_tgt[0]);
    finals.insert(inst.true_tgt.back());
  }
  CHECK(finals == std::set<std::string>{"marta chitaet dom", "marfa chitaet dom"});
  // The context mention keeps its accusative case under the other lemma.
  CHECK((out[0].true_tgt[0] == "ya vizhu marfu" || out[1].true_tgt[0] == "ya vizhu marfu"));
}

TEST_CASE("cohesion: no instance without alternatives or a context mention") {
  auto lem = lemmatizer_from(toy());
  std::vector<std::string> freq{"i", "see", "he", "works", "reads", "the"};
  SUBCASE("single alternative") {
    std::vector<AlignedFragment> frags{
        aligned({{"i see daniel", "ya vizhu daniila"}, {"daniel reads", "daniil chitaet"}}, {"0-0 1-1 2-2", "0-0 1-1"})};
    CHECK(build_cohesion_instances(frags, name_table(), lem, freq, toy()).empty());
  }
  SUBCASE("mention only in the current sentence") {
    std::vector<AlignedFragment> frags{
        aligned({{"he works", "on rabotaet"}, {"martha reads", "marta chitaet"}}, {"0-0 1-1", "0-0 1-1"})};
    CHECK(build_cohesion_instances(frags, name_table(), lem, freq, toy()).empty());
  }
  SUBCASE("inconsistent translation in the fragment") {
    std::vector<AlignedFragment> frags{
        aligned({{"i see martha", "ya vizhu marfu"}, {"martha reads", "marta chitaet"}}, {"0-0 1-1 2-2", "0-0 1-1"})};
    CHECK(build_cohesion_instances(frags, name_table(), lem, freq, toy()).empty());
  }
  SUBCASE("frequent word") {
    freq.push_back("martha");
    std::vector<AlignedFragment> frags{
        aligned({{"i see martha", "ya vizhu martu"}, {"martha reads", "marta chitaet"}}, {"0-0 1-1 2-2", "0-0 1-1"})};
    CHECK(build_cohesion_instances(frags, name_table(), lem, freq, toy()).empty());
  }
}

TEST_CASE("cohesion builder on the synthetic corpus") {
  SynthConfig cfg;
  cfg.n_fragments = 200;
  cfg.name_rate = 0.4;
  auto corpus = gen_synthetic_corpus(cfg);
  std::vector<AlignedFragment> frags;
  auto clean = filter_pairs(corpus.train);
  std::vector<std::string> clean_align;
  for (std::size_t i = 0; i < corpus.train.size(); ++i)
    if (corpus.train[i].overlap >= 0.9) clean_align.push_back(corpus.train_alignments[i]);
  for (auto& f : group_and_fragment(clean)) {
    AlignedFragment af{f, {}};
    for (auto idx : f.source_index) af.alignments.push_back(parse_alignment(clean_align[idx]));
    frags.push_back(std::move(af));
  }
  CohesionOptions opt;
  opt.frequent_cutoff = 5;  // names are common at this rate
  auto out = build_cohesion_instances(frags, corpus.lexical_table, lemmatizer_from(toy()), corpus.frequency_list, toy(),
                                      opt);
  CHECK(out.size() > 10);
  CHECK(out.size() % 2 == 0);
  for (const auto& inst : out) {
    CHECK(instance_problem(inst).empty());
    for (const auto& group : inst.contrastive)
      for (std::size_t i = 0; i + 1 < group.size(); ++i) CHECK(group[i] == inst.true_tgt[i]);
  }
}

namespace {

LexicalTable do_table(std::size_t n_verbs) {
  static const char* forms[] = {"vidit", "delaet", "znaet", "lyubit", "khochet", "chitaet",
                                "pomnit", "ponimaet", "rabotaet", "igraet", "govorit", "sdelaet"};
  LexicalTable t;
  for (std::size_t i = 0; i < n_verbs; ++i) t.add("do", forms[i], (12.0 - double(i)) / 78.0);
  return t;
}

}  // namespace

TEST_CASE("VP ellipsis: at most k-1 contrastive groups, same tags") {
  EllipsisSeed seed{{"he sees the house", "she does too"}, {"on vidit dom", "ona tozhe vidit"}, 1, 2, 1};
  std::vector<EllipsisSeed> seeds{seed};
  auto out = build_vp_ellipsis_instances(seeds, do_table(12), lemmatizer_from(toy()), toy());
  REQUIRE(out.size() == 1);
  CHECK(out[0].contrastive.size() == 9);
  CHECK(instance_problem(out[0]).empty());
  for (const auto& g : out[0].contrastive) {
    const auto verb = tokens_of(g[1])[2];
    const auto a = toy().analyze(verb);
    REQUIRE_FALSE(a.empty());
    CHECK(a.front().tags == toy().analyze("vidit").front().tags);
    CHECK(a.front().lemma != "videt");
    CHECK(g[0] == seed.tgt[0]);
  }
}

TEST_CASE("VP ellipsis: seed dropped when the only candidate is the true verb") {
  EllipsisSeed seed{{"he sees the house", "she does too"}, {"on vidit dom", "ona tozhe vidit"}, 1, 2, 1};
  std::vector<EllipsisSeed> seeds{seed};
  LexicalTable t;
  t.add("do", "vidit", 0.6);
  t.add("do", "delaet", 0.4);
  VpEllipsisOptions opt;
  opt.k = 1;
  std::vector<std::string> warnings;
  CHECK(build_vp_ellipsis_instances(seeds, t, lemmatizer_from(toy()), toy(), opt, &warnings).empty());
  CHECK(warnings.size() == 1);
  opt.k = 2;
  CHECK(build_vp_ellipsis_instances(seeds, t, lemmatizer_from(toy()), toy(), opt).size() == 1);
}

TEST_CASE("VP ellipsis: uninflectable candidates are skipped with a warning") {
  EllipsisSeed seed{{"he sees the house", "she does too"}, {"on vidit dom", "ona tozhe vidit"}, 1, 2, 1};
  std::vector<EllipsisSeed> seeds{seed};
  LexicalTable t;
  t.add("do", "smotri", 0.5);  // lemma smotret has imperatives only
  t.add("do", "delaet", 0.5);
  std::vector<std::string> warnings;
  auto out = build_vp_ellipsis_instances(seeds, t, lemmatizer_from(toy()), toy(), {}, &warnings);
  REQUIRE(out.size() == 1);
  CHECK(out[0].contrastive.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("VP ellipsis over synthetic seeds") {
  SynthConfig cfg;
  cfg.n_fragments = 50;
  auto corpus = gen_synthetic_corpus(cfg);
  auto out = build_vp_ellipsis_instances(corpus.ellipsis_seeds, corpus.lexical_table, lemmatizer_from(toy()), toy());
  CHECK(out.size() == corpus.ellipsis_seeds.size());
  for (const auto& inst : out) {
    CHECK(instance_problem(inst).empty());
    CHECK(inst.contrastive.size() == 9);
  }
}

TEST_CASE("toy lexicon: inflect inverts analyze") {
  const auto& lex = toy();
  CHECK(lex.entries().size() > 100);
  for (const auto& e : lex.entries()) {
    const auto f = lex.inflect(e.lemma, e.tags);
    REQUIRE(f);
    CHECK(*f == e.surface);
    bool found = false;
    for (const auto& a : lex.analyze(e.surface)) found |= a.lemma == e.lemma && a.tags == e.tags;
    CHECK(found);
  }
  CHECK(lex.analyze("nonsense").empty());
  CHECK_FALSE(lex.inflect("videt", parse_tags("VERB,2per,sing,impr")));
}

TEST_CASE("lexicon reader rejects duplicates and malformed lines") {
  std::istringstream dup("a\tx\tNOUN\nb\tx\tNOUN\n");
  CHECK_THROWS_AS(LexiconMorphology::read(dup), std::invalid_argument);
  std::istringstream bad("a x NOUN\n");
  CHECK_THROWS_AS(LexiconMorphology::read(bad), std::invalid_argument);
  CHECK(parse_tags("NOUN, masc,,accs") == Tags{"NOUN", "masc", "accs"});
  CHECK(tags_text(parse_tags("b,a")) == "a,b");
}
