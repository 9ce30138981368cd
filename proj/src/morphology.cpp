#include "docnmt/morphology.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace docnmt {

Tags parse_tags(const std::string& comma_separated) {
  Tags tags;
  std::string cur;
  for (char ch : comma_separated + ",") {
    if (ch == ',') {
      if (!cur.empty()) tags.insert(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  return tags;
}

std::string tags_text(const Tags& tags) {
  std::string out;
  for (const auto& t : tags) {
    if (!out.empty()) out += ',';
    out += t;
  }
  return out;
}

void LexiconMorphology::add(Entry e) {
  const std::size_t idx = entries_.size();
  auto key = std::make_pair(e.lemma, e.tags);
  if (by_form_.count(key)) throw std::invalid_argument("duplicate lexicon form " + e.lemma + " " + tags_text(e.tags));
  by_form_.emplace(std::move(key), idx);
  by_surface_.emplace(e.surface, idx);
  entries_.push_back(std::move(e));
}

LexiconMorphology LexiconMorphology::read(std::istream& in, const std::string& name) {
  LexiconMorphology lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": expected surface<TAB>lemma<TAB>tags");
    lex.add({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), parse_tags(line.substr(t2 + 1))});
  }
  return lex;
}

LexiconMorphology LexiconMorphology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon: " + path);
  return read(in, path);
}

const LexiconMorphology& LexiconMorphology::toy() {
  static const LexiconMorphology lex = [] {
    std::istringstream in(toy_lexicon_text());
    return read(in, "<toy lexicon>");
  }();
  return lex;
}

std::vector<Analysis> LexiconMorphology::analyze(const std::string& token) const {
  std::vector<Analysis> out;
  auto [lo, hi] = by_surface_.equal_range(token);
  for (auto it = lo; it != hi; ++it) out.push_back({entries_[it->second].lemma, entries_[it->second].tags});
  return out;
}

std::optional<std::string> LexiconMorphology::inflect(const std::string& lemma, const Tags& tags) const {
  auto it = by_form_.find({lemma, tags});
  if (it == by_form_.end()) return std::nullopt;
  return entries_[it->second].surface;
}

std::vector<LexiconMorphology::Entry> LexiconMorphology::paradigm(const std::string& lemma) const {
  std::vector<Entry> out;
  for (const auto& e : entries_)
    if (e.lemma == lemma) out.push_back(e);
  return out;
}

}  // namespace docnmt
