#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace docnmt {

/// Morphological tags, e.g. {"VERB", "2per", "sing", "indc"}.
using Tags = std::set<std::string>;

Tags parse_tags(const std::string& comma_separated);
std::string tags_text(const Tags& tags);

struct Analysis {
  std::string lemma;
  Tags tags;
  bool operator==(const Analysis&) const = default;
};

/// Pluggable analyzer/generator.
class MorphologyProvider {
 public:
  virtual ~MorphologyProvider() = default;
  virtual std::vector<Analysis> analyze(const std::string& token) const = 0;
  virtual std::optional<std::string> inflect(const std::string& lemma, const Tags& tags) const = 0;
};

/// Table-driven provider over `surface<TAB>lemma<TAB>tags` lines.
class LexiconMorphology final : public MorphologyProvider {
 public:
  struct Entry {
    std::string surface;
    std::string lemma;
    Tags tags;
  };

  static LexiconMorphology read(std::istream& in, const std::string& name = "<stream>");
  static LexiconMorphology load(const std::string& path);
  /// The bundled romanized toy lexicon.
  static const LexiconMorphology& toy();

  std::vector<Analysis> analyze(const std::string& token) const override;
  std::optional<std::string> inflect(const std::string& lemma, const Tags& tags) const override;

  const std::vector<Entry>& entries() const { return entries_; }
  /// All surfaces of `lemma` with their tags.
  std::vector<Entry> paradigm(const std::string& lemma) const;

 private:
  void add(Entry e);

  std::vector<Entry> entries_;
  std::multimap<std::string, std::size_t> by_surface_;
  std::map<std::pair<std::string, Tags>, std::size_t> by_form_;
};

/// Text of the bundled lexicon.
const std::string& toy_lexicon_text();

}  // namespace docnmt
