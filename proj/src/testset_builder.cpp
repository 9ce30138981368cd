#include "docnmt/testset_builder.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace docnmt {

std::string to_string(Politeness p) {
  switch (p) {
    case Politeness::none: return "none";
    case Politeness::T: return "T";
    case Politeness::V: return "V";
  }
  return "?";
}

namespace {

bool is_indicator(const Tags& t) {
  const bool pos = t.count("NPRO") || t.count("VERB") || t.count("POSS");
  return pos && (t.count("2per") || t.count("impr"));
}

// Number of an unambiguous indicator token; none for anything else.
Politeness indicator_number(const std::string& token, const MorphologyProvider& morph) {
  const auto analyses = morph.analyze(token);
  if (analyses.empty()) return Politeness::none;
  Politeness seen = Politeness::none;
  for (const auto& a : analyses) {
    if (!is_indicator(a.tags)) return Politeness::none;
    const Politeness p = a.tags.count("sing") ? Politeness::T : a.tags.count("plur") ? Politeness::V : Politeness::none;
    if (p == Politeness::none || (seen != Politeness::none && p != seen)) return Politeness::none;
    seen = p;
  }
  return seen;
}

}  // namespace

Politeness detect_politeness(std::span<const std::string> tokens, const MorphologyProvider& morph) {
  bool t = false, v = false;
  for (const auto& tok : tokens) {
    const Politeness p = indicator_number(tok, morph);
    t |= p == Politeness::T;
    v |= p == Politeness::V;
  }
  if (t == v) return Politeness::none;
  return t ? Politeness::T : Politeness::V;
}

Politeness detect_politeness(const std::string& sentence, const MorphologyProvider& morph) {
  return detect_politeness(tokens_of(sentence), morph);
}

std::vector<std::string> switch_politeness(std::span<const std::string> tokens, const MorphologyProvider& morph) {
  if (detect_politeness(tokens, morph) == Politeness::none)
    throw PolitenessError("sentence has no consistent politeness indicator: " + join_tokens(tokens));
  std::vector<std::string> out(tokens.begin(), tokens.end());
  std::vector<std::string> failed;
  for (auto& tok : out) {
    const Politeness p = indicator_number(tok, morph);
    if (p == Politeness::none) continue;
    const Analysis a = morph.analyze(tok).front();
    Tags tags = a.tags;
    tags.erase(p == Politeness::T ? "sing" : "plur");
    tags.insert(p == Politeness::T ? "plur" : "sing");
    if (auto form = morph.inflect(a.lemma, tags)) {
      tok = *form;
    } else {
      failed.push_back(tok);
    }
  }
  if (!failed.empty()) {
    std::string msg = "no opposite-number form for:";
    for (const auto& f : failed) msg += " " + f;
    throw PolitenessError(msg);
  }
  return out;
}

std::string switch_politeness(const std::string& sentence, const MorphologyProvider& morph) {
  const auto toks = tokens_of(sentence);
  const auto out = switch_politeness(std::span<const std::string>(toks), morph);
  return join_tokens(out);
}

std::vector<std::string> default_politeness_markers() {
  return {"mr.", "mrs.", "officer", "your honour", "sir", "mom", "dad", "honey", "sweetie", "dude", "pal"};
}

namespace {

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool contains_phrase(const std::string& sentence, const std::vector<std::string>& phrase) {
  const auto toks = tokens_of(lowercase(sentence));
  if (phrase.empty() || phrase.size() > toks.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= toks.size(); ++i)
    if (std::equal(phrase.begin(), phrase.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  return false;
}

void skip(BuildStats* stats, const std::string& reason) {
  if (stats) ++stats->skipped[reason];
}

}  // namespace

std::vector<ContrastiveInstance> build_deixis_instances(std::span<const Fragment> fragments,
                                                        const MorphologyProvider& morph, const DeixisOptions& options,
                                                        BuildStats* stats) {
  std::vector<std::vector<std::string>> blocked;
  for (const auto& m : options.blocklist) blocked.push_back(tokens_of(lowercase(m)));
  std::vector<ContrastiveInstance> out;
  for (const auto& f : fragments) {
    if (stats) ++stats->considered;
    const std::size_t n = f.size();
    if (n < 2 || n > 4) {
      skip(stats, "fragment size");
      continue;
    }
    bool has_marker = false;
    for (std::size_t i = 0; i < n && !has_marker; ++i)
      for (const auto& phrase : blocked)
        has_marker |= contains_phrase(f.at(i).src, phrase) || contains_phrase(f.at(i).tgt, phrase);
    if (has_marker) {
      skip(stats, "nominal politeness marker");
      continue;
    }
    std::vector<Politeness> pol(n);
    for (std::size_t i = 0; i < n; ++i) pol[i] = detect_politeness(f.at(i).tgt, morph);
    const Politeness final_pol = pol[n - 1];
    if (final_pol == Politeness::none) {
      skip(stats, "no politeness in final sentence");
      continue;
    }
    if (std::any_of(pol.begin(), pol.end(), [&](Politeness p) { return p != Politeness::none && p != final_pol; })) {
      skip(stats, "inconsistent politeness");
      continue;
    }
    std::optional<std::size_t> latest;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (pol[i] != Politeness::none) latest = i;
    if (!latest) {
      skip(stats, "no politeness in context");
      continue;
    }
    std::vector<std::string> original, switched;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      original.push_back(f.at(i).tgt);
      if (pol[i] == Politeness::none) {
        switched.push_back(f.at(i).tgt);
        continue;
      }
      try {
        switched.push_back(switch_politeness(f.at(i).tgt, morph));
      } catch (const PolitenessError&) {
        ok = false;
      }
    }
    if (!ok) {
      skip(stats, "inflection unavailable");
      continue;
    }
    std::vector<std::string> src;
    for (std::size_t i = 0; i < n; ++i) src.push_back(f.at(i).src);
    const int distance = static_cast<int>(n - 1 - *latest);
    auto make = [&](const std::vector<std::string>& truth, const std::vector<std::string>& other) {
      ContrastiveInstance inst;
      inst.phenomenon = Phenomenon::deixis;
      inst.src = src;
      inst.true_tgt = truth;
      auto contrast = truth;
      contrast.back() = other.back();
      inst.contrastive.push_back(std::move(contrast));
      inst.distance = distance;
      return inst;
    };
    const auto& t_group = final_pol == Politeness::T ? original : switched;
    const auto& v_group = final_pol == Politeness::T ? switched : original;
    out.push_back(make(t_group, v_group));
    out.push_back(make(v_group, t_group));
    if (stats) stats->emitted += 2;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexical table

void LexicalTable::add(const std::string& src, const std::string& tgt, double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("translation probability outside [0, 1]");
  table_[src].emplace_back(tgt, prob);
}

const std::vector<std::pair<std::string, double>>& LexicalTable::translations(const std::string& src) const {
  static const std::vector<std::pair<std::string, double>> empty;
  auto it = table_.find(src);
  return it == table_.end() ? empty : it->second;
}

LexicalTable LexicalTable::read(std::istream& in, const std::string& name) {
  LexicalTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::invalid_argument(where + ": expected src<TAB>tgt<TAB>prob");
    double p = 0.0;
    const std::string ptxt = line.substr(t2 + 1);
    auto r = std::from_chars(ptxt.data(), ptxt.data() + ptxt.size(), p);
    if (r.ec != std::errc() || r.ptr != ptxt.data() + ptxt.size()) throw std::invalid_argument(where + ": bad probability");
    try {
      t.add(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), p);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
  for (const auto& [src, tr] : t.table_) {
    double total = 0.0;
    for (const auto& [w, p] : tr) total += p;
    if (total > 1.0 + 1e-6) throw std::invalid_argument(name + ": probabilities for '" + src + "' sum to more than 1");
  }
  return t;
}

LexicalTable LexicalTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexical table: " + path);
  return read(in, path);
}

void LexicalTable::write(std::ostream& out) const {
  char buf[64];
  for (const auto& [src, tr] : table_)
    for (const auto& [tgt, p] : tr) {
      auto r = std::to_chars(buf, buf + sizeof buf, p);
      out << src << '\t' << tgt << '\t' << std::string(buf, r.ptr) << '\n';
    }
}

void LexicalTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write lexical table: " + path);
  write(out);
}

Lemmatizer lemmatizer_from(const MorphologyProvider& morph) {
  return [&morph](const std::string& token) {
    const auto a = morph.analyze(token);
    return a.empty() ? token : a.front().lemma;
  };
}

std::vector<LemmaMass> alternative_translations(const LexicalTable& table, const std::string& src_word,
                                                const Lemmatizer& lemmatizer, double min_prob) {
  if (!(min_prob > 0.0 && min_prob <= 1.0)) throw std::invalid_argument("min_prob must be in (0, 1]");
  std::map<std::string, double> mass;
  for (const auto& [tgt, p] : table.translations(src_word)) mass[lemmatizer(tgt)] += p;
  std::vector<LemmaMass> out;
  // Sums of table entries may land a rounding step below the threshold.
  for (const auto& [lemma, m] : mass)
    if (m >= min_prob - 1e-12) out.push_back({lemma, m});
  std::stable_sort(out.begin(), out.end(), [](const LemmaMass& a, const LemmaMass& b) { return a.mass > b.mass; });
  return out;
}

Alignment parse_alignment(const std::string& pharaoh) {
  Alignment a;
  for (const auto& link : tokens_of(pharaoh)) {
    const auto dash = link.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("bad alignment link '" + link + "'");
    try {
      std::size_t used = 0;
      const auto i = std::stoul(link.substr(0, dash), &used);
      if (used != dash) throw std::invalid_argument(link);
      const auto j = std::stoul(link.substr(dash + 1), &used);
      if (used != link.size() - dash - 1) throw std::invalid_argument(link);
      a.emplace_back(i, j);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad alignment link '" + link + "'");
    }
  }
  return a;
}

std::string alignment_text(const Alignment& a) {
  std::string out;
  for (const auto& [i, j] : a) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i) + "-" + std::to_string(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexical cohesion

std::vector<ContrastiveInstance> build_cohesion_instances(std::span<const AlignedFragment> fragments,
                                                          const LexicalTable& table, const Lemmatizer& lemmatizer,
                                                          std::span<const std::string> frequency_list,
                                                          const MorphologyProvider& morph,
                                                          const CohesionOptions& options, BuildStats* stats) {
  const std::set<std::string> frequent(frequency_list.begin(),
                                       frequency_list.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                                    options.frequent_cutoff, frequency_list.size())));
  std::vector<ContrastiveInstance> out;
  for (const auto& af : fragments) {
    const Fragment& f = af.fragment;
    const std::size_t n = f.size();
    if (af.alignments.size() != n) throw std::invalid_argument("one alignment per fragment sentence required");
    if (n < 2) continue;
    std::vector<std::vector<std::string>> src(n), tgt(n);
    for (std::size_t i = 0; i < n; ++i) {
      src[i] = tokens_of(f.at(i).src);
      tgt[i] = tokens_of(f.at(i).tgt);
    }
    std::set<std::string> candidates;
    for (const auto& w : src[n - 1])
      if (!frequent.count(w)) candidates.insert(w);
    for (const auto& w : candidates) {
      if (stats) ++stats->considered;
      const auto alts = alternative_translations(table, w, lemmatizer, options.min_prob);
      if (alts.size() < 2) {
        skip(stats, "fewer than two alternative lemmas");
        continue;
      }
      struct Mention {
        std::size_t sentence, token;
      };
      std::vector<Mention> mentions;
      bool aligned = true;
      for (std::size_t i = 0; i < n && aligned; ++i)
        for (std::size_t p = 0; p < src[i].size(); ++p) {
          if (src[i][p] != w) continue;
          std::vector<std::size_t> links;
          for (const auto& [s, t] : af.alignments[i])
            if (s == p) links.push_back(t);
          if (links.size() != 1 || links[0] >= tgt[i].size()) {
            aligned = false;
            break;
          }
          mentions.push_back({i, links[0]});
        }
      if (!aligned) {
        skip(stats, "mention not aligned to exactly one token");
        continue;
      }
      std::optional<std::size_t> latest;
      for (const auto& m : mentions)
        if (m.sentence + 1 < n) latest = m.sentence;
      if (!latest) {
        skip(stats, "no mention in context");
        continue;
      }
      const std::string lemma0 = lemmatizer(tgt[mentions[0].sentence][mentions[0].token]);
      const bool consistent = std::all_of(mentions.begin(), mentions.end(), [&](const Mention& m) {
        return lemmatizer(tgt[m.sentence][m.token]) == lemma0;
      });
      const bool known = std::any_of(alts.begin(), alts.end(), [&](const LemmaMass& a) { return a.lemma == lemma0; });
      if (!consistent || !known) {
        skip(stats, "inconsistent translation");
        continue;
      }
      // One full version of the fragment per alternative lemma.
      std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> versions;
      for (const auto& alt : alts) {
        auto version = tgt;
        bool ok = true;
        for (const auto& m : mentions) {
          const std::string& tok = tgt[m.sentence][m.token];
          std::optional<std::string> form;
          for (const auto& a : morph.analyze(tok))
            if (a.lemma == lemma0 && (form = morph.inflect(alt.lemma, a.tags))) break;
          if (alt.lemma == lemma0) form = tok;
          if (!form) {
            ok = false;
            break;
          }
          version[m.sentence][m.token] = *form;
        }
        if (ok) versions.emplace_back(alt.lemma, std::move(version));
      }
      if (versions.size() < 2) {
        skip(stats, "inflection unavailable");
        continue;
      }
      std::vector<std::string> srcs;
      for (std::size_t i = 0; i < n; ++i) srcs.push_back(f.at(i).src);
      for (std::size_t a = 0; a < versions.size(); ++a) {
        ContrastiveInstance inst;
        inst.phenomenon = Phenomenon::lex_cohesion;
        inst.src = srcs;
        for (const auto& s : versions[a].second) inst.true_tgt.push_back(join_tokens(s));
        for (std::size_t b = 0; b < versions.size(); ++b) {
          if (b == a) continue;
          auto group = inst.true_tgt;
          group.back() = join_tokens(versions[b].second[n - 1]);
          inst.contrastive.push_back(std::move(group));
        }
        inst.distance = static_cast<int>(n - 1 - *latest);
        out.push_back(std::move(inst));
        if (stats) ++stats->emitted;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// VP ellipsis

std::vector<ContrastiveInstance> build_vp_ellipsis_instances(std::span<const EllipsisSeed> seeds,
                                                             const LexicalTable& table, const Lemmatizer& lemmatizer,
                                                             const MorphologyProvider& morph,
                                                             const VpEllipsisOptions& options,
                                                             std::vector<std::string>* warnings) {
  auto warn = [warnings](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };
  auto top = alternative_translations(table, options.do_word, lemmatizer, 1e-12);
  if (top.size() > options.k) top.resize(options.k);
  std::vector<ContrastiveInstance> out;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto& seed = seeds[s];
    auto toks = tokens_of(seed.tgt.at(seed.verb_sentence));
    const std::string verb = toks.at(seed.verb_token);
    std::optional<Analysis> analysis;
    for (const auto& a : morph.analyze(verb))
      if (a.tags.count("VERB")) {
        analysis = a;
        break;
      }
    if (!analysis) {
      warn("seed " + std::to_string(s + 1) + ": '" + verb + "' is not a known verb form; dropped");
      continue;
    }
    ContrastiveInstance inst;
    inst.phenomenon = Phenomenon::ellipsis_vp;
    inst.src = seed.src;
    inst.true_tgt = seed.tgt;
    inst.distance = seed.distance;
    for (const auto& cand : top) {
      if (cand.lemma == analysis->lemma) continue;
      const auto form = morph.inflect(cand.lemma, analysis->tags);
      if (!form) {
        warn("seed " + std::to_string(s + 1) + ": no form of '" + cand.lemma + "' with tags " +
             tags_text(analysis->tags) + "; candidate skipped");
        continue;
      }
      auto group = seed.tgt;
      auto replaced = toks;
      replaced[seed.verb_token] = *form;
      group[seed.verb_sentence] = join_tokens(replaced);
      inst.contrastive.push_back(std::move(group));
    }
    if (inst.contrastive.empty()) {
      warn("seed " + std::to_string(s + 1) + ": no contrastive candidates; dropped");
      continue;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace docnmt
