#include "docnmt/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace docnmt {

std::string SynthConfig::to_text() const {
  std::ostringstream out;
  out << "seed=" << seed << "\nn_fragments=" << n_fragments << "\nn_dev=" << n_dev << "\nn_test=" << n_test
      << "\nyou_rate=" << you_rate << "\nname_rate=" << name_rate << "\nname_repeat=" << name_repeat
      << "\nadverb_rate=" << adverb_rate << "\nnoise_rate=" << noise_rate << "\nn_ellipsis=" << n_ellipsis << "\n";
  return out.str();
}

SynthConfig SynthConfig::from_text(const std::string& text) {
  SynthConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad synth config line: " + line);
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "seed") c.seed = std::stoull(v);
    else if (k == "n_fragments") c.n_fragments = std::stoul(v);
    else if (k == "n_dev") c.n_dev = std::stoul(v);
    else if (k == "n_test") c.n_test = std::stoul(v);
    else if (k == "you_rate") c.you_rate = std::stod(v);
    else if (k == "name_rate") c.name_rate = std::stod(v);
    else if (k == "name_repeat") c.name_repeat = std::stod(v);
    else if (k == "adverb_rate") c.adverb_rate = std::stod(v);
    else if (k == "noise_rate") c.noise_rate = std::stod(v);
    else if (k == "n_ellipsis") c.n_ellipsis = std::stoul(v);
    else throw std::invalid_argument("unknown synth config key: " + k);
  }
  return c;
}

namespace {

struct Verb {
  const char* base;
  const char* third;
  const char* lemma;
  bool transitive;
};
constexpr std::array<Verb, 10> kVerbs{{{"see", "sees", "videt", true},
                                       {"know", "knows", "znat", true},
                                       {"love", "loves", "lyubit", true},
                                       {"want", "wants", "khotet", true},
                                       {"make", "makes", "delat", true},
                                       {"read", "reads", "chitat", true},
                                       {"remember", "remembers", "pomnit", true},
                                       {"understand", "understands", "ponimat", true},
                                       {"work", "works", "rabotat", false},
                                       {"play", "plays", "igrat", false}}};
constexpr std::size_t kTransitive = 8;

struct Subject {
  const char* en;
  const char* tgt;
  const char* person;
  const char* number;
};
constexpr std::array<Subject, 5> kSubjects{{{"i", "ya", "1per", "sing"},
                                            {"he", "on", "3per", "sing"},
                                            {"she", "ona", "3per", "sing"},
                                            {"we", "my", "1per", "plur"},
                                            {"they", "oni", "3per", "plur"}}};

constexpr std::array<std::pair<const char*, const char*>, 10> kNouns{{{"house", "dom"},
                                                                      {"table", "stol"},
                                                                      {"city", "gorod"},
                                                                      {"forest", "les"},
                                                                      {"garden", "sad"},
                                                                      {"bread", "khleb"},
                                                                      {"park", "park"},
                                                                      {"bridge", "most"},
                                                                      {"train", "poezd"},
                                                                      {"world", "mir"}}};

constexpr std::array<std::pair<const char*, const char*>, 3> kAdverbs{
    {{"today", "segodnya"}, {"now", "seychas"}, {"again", "snova"}}};

struct Name {
  const char* en;
  std::array<const char*, 2> lemmas;
};
constexpr std::array<Name, 5> kNames{{{"martha", {"marta", "marfa"}},
                                      {"kate", {"katya", "katerina"}},
                                      {"helen", {"elena", "olena"}},
                                      {"ann", {"anna", "anya"}},
                                      {"daniel", {"daniil", "danila"}}}};

enum class Kind { neutral_svo, neutral_intr, name_subject, name_object, you_svo, you_intr, you_name, imperative, possessive };

struct Clause {
  Kind kind = Kind::neutral_svo;
  std::size_t subj = 0, verb = 0, noun = 0, name = 0, imp = 0;
  int adverb = -1;
};

using Variants = std::array<int, kNames.size()>;

struct Sent {
  std::vector<std::string> src, tgt;
  Alignment align;

  void pair(const std::string& s, const std::string& t) {
    align.emplace_back(src.size(), tgt.size());
    src.push_back(s);
    tgt.push_back(t);
  }
  void src_only(const std::string& s) { src.push_back(s); }
};

const LexiconMorphology& lex() { return LexiconMorphology::toy(); }

std::string form(const std::string& lemma, std::initializer_list<const char*> tags) {
  Tags t;
  for (const char* s : tags) t.insert(s);
  auto f = lex().inflect(lemma, t);
  if (!f) throw std::logic_error("toy lexicon lacks " + lemma + " " + tags_text(t));
  return *f;
}

std::string verb_form(std::size_t verb, const char* person, const char* number) {
  return form(kVerbs[verb].lemma, {"VERB", person, number, "indc"});
}

std::string name_form(std::size_t name, int variant, const char* grammatical_case) {
  const std::string lemma = kNames[name].lemmas[static_cast<std::size_t>(variant)];
  const std::string gender = lex().analyze(lemma).front().tags.count("masc") ? "masc" : "femn";
  return form(lemma, {"NOUN", "Name", gender.c_str(), grammatical_case});
}

void render_into(Sent& s, const Clause& c, Politeness reg, const Variants& variants) {
  const char* you_number = reg == Politeness::V ? "plur" : "sing";
  const Subject& subj = kSubjects[c.subj];
  const Verb& verb = kVerbs[c.verb];
  const bool third = std::string(subj.person) == "3per" && std::string(subj.number) == "sing";
  switch (c.kind) {
    case Kind::neutral_svo:
    case Kind::neutral_intr:
      s.pair(subj.en, subj.tgt);
      s.pair(third ? verb.third : verb.base, verb_form(c.verb, subj.person, subj.number));
      if (c.kind == Kind::neutral_svo) {
        s.src_only("the");
        s.pair(kNouns[c.noun].first, kNouns[c.noun].second);
      }
      break;
    case Kind::name_subject:
      s.pair(kNames[c.name].en, name_form(c.name, variants[c.name], "nomn"));
      s.pair(verb.third, verb_form(c.verb, "3per", "sing"));
      s.src_only("the");
      s.pair(kNouns[c.noun].first, kNouns[c.noun].second);
      break;
    case Kind::name_object:
      s.pair(subj.en, subj.tgt);
      s.pair(third ? verb.third : verb.base, verb_form(c.verb, subj.person, subj.number));
      s.pair(kNames[c.name].en, name_form(c.name, variants[c.name], "accs"));
      break;
    case Kind::you_svo:
    case Kind::you_intr:
    case Kind::you_name:
      s.pair("you", form("ty", {"NPRO", "2per", you_number, "nomn"}));
      s.pair(verb.base, verb_form(c.verb, "2per", you_number));
      if (c.kind == Kind::you_svo) {
        s.src_only("the");
        s.pair(kNouns[c.noun].first, kNouns[c.noun].second);
      } else if (c.kind == Kind::you_name) {
        s.pair(kNames[c.name].en, name_form(c.name, variants[c.name], "accs"));
      }
      break;
    case Kind::imperative: {
      static const std::array<std::pair<const char*, const char*>, 4> verbs{
          {{"look", "smotret"}, {"go", "idti"}, {"listen", "slushat"}, {"tell", "skazat"}}};
      s.pair(verbs[c.imp].first, form(verbs[c.imp].second, {"VERB", "2per", you_number, "impr"}));
      if (c.imp == 0) {
        s.pair("at", "na");
        s.src_only("the");
        s.pair(kNouns[c.noun].first, kNouns[c.noun].second);
      } else if (c.imp == 1) {
        s.pair("to", "v");
        s.src_only("the");
        s.pair(kNouns[c.noun].first, kNouns[c.noun].second);
      } else if (c.imp == 2) {
        s.src_only("to");
        s.pair("me", "menya");
      } else {
        s.pair("me", "mne");
      }
      break;
    }
    case Kind::possessive:
      s.pair("your", form("tvoy", {"POSS", "2per", you_number, "masc"}));
      s.pair(kNouns[c.noun].first, kNouns[c.noun].second);
      s.src_only("is");
      s.pair("here", "zdes");
      break;
  }
  if (c.adverb >= 0) s.pair(kAdverbs[static_cast<std::size_t>(c.adverb)].first, kAdverbs[static_cast<std::size_t>(c.adverb)].second);
}

struct RunSpec {
  Politeness reg = Politeness::T;
  Variants variants{};
  std::vector<Clause> clauses;  // clause 0 carries the marker
};

Sent render(const RunSpec& run, std::size_t i) {
  Sent s;
  if (i == 0) {
    if (run.reg == Politeness::V) s.pair(kPoliteMarker, "ser");
    else s.pair(kFamiliarMarker, "druzhe");
    s.pair(",", ",");
  }
  render_into(s, run.clauses[i], run.reg, run.variants);
  return s;
}

class Generator {
 public:
  Generator(const SynthConfig& cfg, std::uint64_t stream) : cfg_(cfg), rng_(cfg.seed * 1000003ULL + stream) {}

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  double unif(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  bool coin(double p) { return unif() < p; }

  int adverb() { return coin(cfg_.adverb_rate) ? static_cast<int>(pick(kAdverbs.size())) : -1; }

  Clause neutral() {
    Clause c;
    c.subj = pick(kSubjects.size());
    if (coin(0.8)) {
      c.kind = Kind::neutral_svo;
      c.verb = pick(kTransitive);
      c.noun = pick(kNouns.size());
    } else {
      c.kind = Kind::neutral_intr;
      c.verb = kTransitive + pick(kVerbs.size() - kTransitive);
    }
    c.adverb = adverb();
    return c;
  }

  Clause you_clause(bool allow_name) {
    Clause c;
    const double u = unif();
    c.noun = pick(kNouns.size());
    if (allow_name && u < cfg_.name_rate) {
      c.kind = Kind::you_name;
      c.verb = pick(kTransitive);
      c.name = pick(kNames.size());
      c.adverb = adverb();
    } else if (u < 0.45) {
      c.kind = Kind::you_svo;
      c.verb = pick(kTransitive);
      c.adverb = adverb();
    } else if (u < 0.6) {
      c.kind = Kind::you_intr;
      c.verb = kTransitive + pick(kVerbs.size() - kTransitive);
      c.adverb = adverb();
    } else if (u < 0.85) {
      c.kind = Kind::imperative;
      c.imp = pick(4);
    } else {
      c.kind = Kind::possessive;
    }
    return c;
  }

  Clause name_clause(std::size_t name) {
    Clause c;
    c.name = name;
    c.noun = pick(kNouns.size());
    c.verb = pick(kTransitive);
    c.subj = pick(kSubjects.size());
    c.kind = coin(0.5) ? Kind::name_subject : Kind::name_object;
    c.adverb = adverb();
    return c;
  }

  RunSpec base_run() {
    RunSpec r;
    r.reg = coin(0.5) ? Politeness::T : Politeness::V;
    for (auto& v : r.variants) v = static_cast<int>(pick(2));
    return r;
  }

  std::size_t name_for(const std::vector<std::size_t>& used) {
    if (!used.empty() && coin(cfg_.name_repeat)) return used[pick(used.size())];
    return pick(kNames.size());
  }

  RunSpec corpus_run() {
    RunSpec r = base_run();
    std::vector<std::size_t> used;
    r.clauses.push_back(you_clause(true));
    if (r.clauses[0].kind == Kind::you_name) used.push_back(r.clauses[0].name);
    for (std::size_t i = 1; i < 4; ++i) {
      const double u = unif();
      if (u < cfg_.you_rate) {
        r.clauses.push_back(you_clause(false));
      } else if (u < cfg_.you_rate + cfg_.name_rate) {
        const std::size_t n = name_for(used);
        used.push_back(n);
        r.clauses.push_back(name_clause(n));
      } else {
        r.clauses.push_back(neutral());
      }
    }
    return r;
  }

  /// Final sentence second-person; sentences 2-3 second-person with chance 0.3.
  RunSpec deixis_run() {
    RunSpec r = base_run();
    r.clauses.push_back(you_clause(false));
    for (std::size_t i = 1; i < 3; ++i) r.clauses.push_back(coin(0.3) ? you_clause(false) : neutral());
    r.clauses.push_back(you_clause(false));
    return r;
  }

  /// Final sentence mentions a name last mentioned at a uniformly chosen
  /// earlier sentence; no other names.
  RunSpec cohesion_run(std::size_t& name) {
    RunSpec r = base_run();
    name = pick(kNames.size());
    const std::size_t at = pick(3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (i == 0) {
        Clause c = you_clause(false);
        if (at == 0) {
          c.kind = Kind::you_name;
          c.verb = pick(kTransitive);
          c.name = name;
        }
        r.clauses.push_back(c);
      } else {
        r.clauses.push_back(i == at ? name_clause(name) : neutral());
      }
    }
    r.clauses.push_back(name_clause(name));
    return r;
  }

  void timed_run(const std::vector<Sent>& sents, std::vector<SubtitlePair>& out, std::vector<std::string>& align) {
    clock_ += unif(10.0, 20.0);
    for (std::size_t i = 0; i < sents.size(); ++i) {
      if (i > 0) clock_ += unif(1.0, 4.0);
      SubtitlePair p;
      p.src = join_tokens(sents[i].src);
      p.tgt = join_tokens(sents[i].tgt);
      p.start_time = round2(clock_);
      p.end_time = round2(clock_ + unif(0.8, 2.5));
      p.overlap = std::round(unif(0.9, 1.0) * 1000.0) / 1000.0;
      out.push_back(std::move(p));
      align.push_back(alignment_text(sents[i].align));
    }
  }

  void noisy_pair(std::vector<SubtitlePair>& out, std::vector<std::string>& align) {
    Sent s;
    render_into(s, neutral(), Politeness::T, Variants{});
    std::vector<std::string> garbage = s.tgt;
    std::shuffle(garbage.begin(), garbage.end(), rng_);
    garbage.push_back(kNouns[pick(kNouns.size())].second);
    clock_ += unif(10.0, 20.0);
    SubtitlePair p;
    p.src = join_tokens(s.src);
    p.tgt = join_tokens(garbage);
    p.start_time = round2(clock_);
    p.end_time = round2(clock_ + unif(0.8, 2.5));
    p.overlap = std::round(unif(0.2, 0.85) * 1000.0) / 1000.0;
    out.push_back(std::move(p));
    align.emplace_back();
  }

  static double round2(double x) { return std::round(x * 100.0) / 100.0; }

 private:
  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  double clock_ = 0.0;
};

std::vector<Sent> render_run(const RunSpec& r) {
  std::vector<Sent> out;
  for (std::size_t i = 0; i < r.clauses.size(); ++i) out.push_back(render(r, i));
  return out;
}

std::vector<std::string> src_texts(const std::vector<Sent>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) out.push_back(join_tokens(x.src));
  return out;
}

std::vector<std::string> tgt_texts(const std::vector<Sent>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) out.push_back(join_tokens(x.tgt));
  return out;
}

int latest_distance(const std::vector<std::string>& tgt, const std::function<bool(std::size_t)>& relevant) {
  for (std::size_t i = tgt.size() - 1; i-- > 0;)
    if (relevant(i)) return static_cast<int>(tgt.size() - 1 - i);
  throw std::logic_error("generated instance without relevant context");
}

// Instances come in mirrored pairs sharing the final source sentence.
void deixis_pair(Generator& g, std::vector<ContrastiveInstance>& out) {
  RunSpec r = g.deixis_run();
  r.reg = Politeness::T;
  const auto t = render_run(r);
  r.reg = Politeness::V;
  const auto v = render_run(r);
  const auto t_tgt = tgt_texts(t), v_tgt = tgt_texts(v);
  const int d = latest_distance(t_tgt, [&](std::size_t i) {
    return detect_politeness(t_tgt[i], LexiconMorphology::toy()) != Politeness::none;
  });
  auto make = [d](std::vector<std::string> src, std::vector<std::string> truth, const std::vector<std::string>& other) {
    ContrastiveInstance inst;
    inst.phenomenon = Phenomenon::deixis;
    inst.src = std::move(src);
    inst.true_tgt = truth;
    truth.back() = other.back();
    inst.contrastive.push_back(std::move(truth));
    inst.distance = d;
    return inst;
  };
  out.push_back(make(src_texts(t), t_tgt, v_tgt));
  out.push_back(make(src_texts(v), v_tgt, t_tgt));
}

void cohesion_pair(Generator& g, std::vector<ContrastiveInstance>& out) {
  std::size_t name = 0;
  RunSpec r = g.cohesion_run(name);
  r.variants[name] = 0;
  const auto a = render_run(r);
  r.variants[name] = 1;
  const auto b = render_run(r);
  const auto a_tgt = tgt_texts(a), b_tgt = tgt_texts(b);
  const int d = latest_distance(a_tgt, [&](std::size_t i) { return a_tgt[i] != b_tgt[i]; });
  auto make = [&](std::vector<std::string> truth, const std::vector<std::string>& other) {
    ContrastiveInstance inst;
    inst.phenomenon = Phenomenon::lex_cohesion;
    inst.src = src_texts(a);
    inst.true_tgt = truth;
    truth.back() = other.back();
    inst.contrastive.push_back(std::move(truth));
    inst.distance = d;
    return inst;
  };
  out.push_back(make(a_tgt, b_tgt));
  out.push_back(make(b_tgt, a_tgt));
}

}  // namespace

Politeness synth_marker_register(const std::string& first_src) {
  const auto toks = tokens_of(first_src);
  if (toks.empty()) return Politeness::none;
  if (toks[0] == kPoliteMarker) return Politeness::V;
  if (toks[0] == kFamiliarMarker) return Politeness::T;
  return Politeness::none;
}

std::string synth_run_problem(std::span<const SubtitlePair> run) {
  if (run.empty()) return "empty run";
  const Politeness reg = synth_marker_register(run[0].src);
  if (reg == Politeness::none) return "first source sentence lacks a register marker";
  for (std::size_t i = 0; i < run.size(); ++i) {
    const auto toks = tokens_of(run[i].src);
    const auto markers = std::count_if(toks.begin(), toks.end(),
                                       [](const std::string& t) { return t == kPoliteMarker || t == kFamiliarMarker; });
    if (markers != (i == 0 ? 1 : 0)) return "marker count wrong in sentence " + std::to_string(i + 1);
    const Politeness p = detect_politeness(run[i].tgt, LexiconMorphology::toy());
    if (p != Politeness::none && p != reg) return "sentence " + std::to_string(i + 1) + " breaks the run's register";
    if (i == 0 && p != reg) return "first target sentence does not show the marker's register";
  }
  return {};
}

SynthCorpus gen_synthetic_corpus(const SynthConfig& cfg) {
  if (cfg.n_fragments == 0) throw std::invalid_argument("n_fragments must be at least 1");
  if (cfg.you_rate < 0 || cfg.name_rate < 0 || cfg.you_rate + cfg.name_rate > 1.0)
    throw std::invalid_argument("you_rate and name_rate must be nonnegative and sum to at most 1");
  SynthCorpus out;

  Generator train(cfg, 1);
  for (std::size_t i = 0; i < cfg.n_fragments; ++i) {
    train.timed_run(render_run(train.corpus_run()), out.train, out.train_alignments);
    if (train.coin(cfg.noise_rate)) train.noisy_pair(out.train, out.train_alignments);
  }
  Generator dev(cfg, 2);
  for (std::size_t i = 0; i < cfg.n_dev; ++i) dev.timed_run(render_run(dev.corpus_run()), out.dev, out.dev_alignments);
  Generator test(cfg, 3);
  std::vector<std::string> unused;
  for (std::size_t i = 0; i < cfg.n_test; ++i) test.timed_run(render_run(test.corpus_run()), out.test, unused);

  Generator contrast_dev(cfg, 4);
  for (std::size_t i = 0; i < cfg.n_dev; ++i) {
    deixis_pair(contrast_dev, out.deixis_dev);
    cohesion_pair(contrast_dev, out.cohesion_dev);
  }
  Generator contrast_test(cfg, 5);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    deixis_pair(contrast_test, out.deixis_test);
    cohesion_pair(contrast_test, out.cohesion_test);
  }

  // VP ellipsis seeds: "<subj> <verb> ... . <subj2> do too" with the verb regenerated on the target side.
  Generator ell(cfg, 6);
  std::map<std::string, std::map<std::string, double>> links;
  for (std::size_t i = 0; i < cfg.n_ellipsis; ++i) {
    RunSpec r = ell.base_run();
    Clause first = ell.neutral();
    first.verb = i % kVerbs.size();
    first.kind = kVerbs[first.verb].transitive ? Kind::neutral_svo : Kind::neutral_intr;
    Sent s1;
    render_into(s1, first, r.reg, r.variants);
    std::size_t subj2 = ell.pick(kSubjects.size());
    if (subj2 == first.subj) subj2 = (subj2 + 1) % kSubjects.size();
    const Subject& su = kSubjects[subj2];
    const bool third = std::string(su.person) == "3per" && std::string(su.number) == "sing";
    Sent s2;
    s2.pair(su.en, su.tgt);
    s2.src_only(third ? "does" : "do");
    s2.pair("too", "tozhe");
    s2.tgt.push_back(verb_form(first.verb, su.person, su.number));
    s2.align.emplace_back(1, 2);
    EllipsisSeed seed;
    seed.src = {join_tokens(s1.src), join_tokens(s2.src)};
    seed.tgt = {join_tokens(s1.tgt), join_tokens(s2.tgt)};
    seed.verb_sentence = 1;
    seed.verb_token = 2;
    seed.distance = 1;
    out.ellipsis_seeds.push_back(std::move(seed));
    for (const Sent* s : {&s1, &s2})
      for (const auto& [a, b] : s->align) {
        std::string src = s->src[a];
        if (src == "does") src = "do";
        links[src][s->tgt[b]] += 1.0;
      }
  }

  std::map<std::string, double> src_counts;
  for (std::size_t i = 0; i < out.train.size(); ++i) {
    const auto s = tokens_of(out.train[i].src), t = tokens_of(out.train[i].tgt);
    for (const auto& w : s) src_counts[w] += 1.0;
    for (const auto& [a, b] : parse_alignment(out.train_alignments[i])) links[s[a]][t[b]] += 1.0;
  }
  for (const auto& [src, tr] : links) {
    double total = 0.0;
    for (const auto& [t, c] : tr) total += c;
    for (const auto& [t, c] : tr) out.lexical_table.add(src, t, c / total);
  }
  std::vector<std::pair<std::string, double>> freq(src_counts.begin(), src_counts.end());
  std::stable_sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [w, c] : freq) out.frequency_list.push_back(w);
  return out;
}

}  // namespace docnmt
