#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "docnmt/data.hpp"
#include "docnmt/morphology.hpp"

namespace docnmt {

enum class Politeness { none, T, V };

std::string to_string(Politeness p);

class PolitenessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// T or V when second-person pronouns, verb forms, imperatives or possessives
/// agree on one number; none when there is no indicator or they conflict.
/// Tokens whose analyses disagree on number are ignored.
Politeness detect_politeness(std::span<const std::string> tokens, const MorphologyProvider& morph);
Politeness detect_politeness(const std::string& sentence, const MorphologyProvider& morph);

/// Re-inflects every second-person indicator to the opposite number. Throws
/// PolitenessError when the sentence has no (or conflicting) indicators, or
/// when an indicator cannot be inflected; the message lists the tokens.
std::vector<std::string> switch_politeness(std::span<const std::string> tokens, const MorphologyProvider& morph);
std::string switch_politeness(const std::string& sentence, const MorphologyProvider& morph);

/// Nominal markers that reveal politeness by themselves.
std::vector<std::string> default_politeness_markers();

struct BuildStats {
  std::size_t considered = 0;
  std::size_t emitted = 0;
  std::map<std::string, std::size_t> skipped;  // reason -> count
};

struct DeixisOptions {
  /// Lowercased, whitespace-tokenized phrases; any match in a source or
  /// target sentence disqualifies the fragment.
  std::vector<std::string> blocklist = default_politeness_markers();
};

/// For every fragment whose sentences agree on politeness (the final sentence
/// and at least one context sentence carrying indicators), emits the all-T and
/// all-V versions as true groups, each contrasted with its final sentence
/// switched.
std::vector<ContrastiveInstance> build_deixis_instances(std::span<const Fragment> fragments,
                                                        const MorphologyProvider& morph,
                                                        const DeixisOptions& options = {},
                                                        BuildStats* stats = nullptr);

/// Word-level translation probabilities, `src<TAB>tgt<TAB>prob` lines.
class LexicalTable {
 public:
  void add(const std::string& src, const std::string& tgt, double prob);
  /// Empty when the word is absent.
  const std::vector<std::pair<std::string, double>>& translations(const std::string& src) const;
  std::size_t size() const { return table_.size(); }
  const std::map<std::string, std::vector<std::pair<std::string, double>>>& entries() const { return table_; }

  static LexicalTable read(std::istream& in, const std::string& name = "<stream>");
  static LexicalTable load(const std::string& path);
  void write(std::ostream& out) const;
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::vector<std::pair<std::string, double>>> table_;
};

using Lemmatizer = std::function<std::string(const std::string&)>;

/// First analysis' lemma, or the token itself when the provider does not know it.
Lemmatizer lemmatizer_from(const MorphologyProvider& morph);

struct LemmaMass {
  std::string lemma;
  double mass = 0.0;
};

/// Translation probabilities summed per lemma; lemmas with mass >= min_prob,
/// heaviest first (ties by lemma).
std::vector<LemmaMass> alternative_translations(const LexicalTable& table, const std::string& src_word,
                                                const Lemmatizer& lemmatizer, double min_prob = 0.1);

/// (source token, target token) links.
using Alignment = std::vector<std::pair<std::size_t, std::size_t>>;

/// Parses Pharaoh "i-j" pairs.
Alignment parse_alignment(const std::string& pharaoh);
std::string alignment_text(const Alignment& a);

/// A fragment with one alignment per sentence, context first.
struct AlignedFragment {
  Fragment fragment;
  std::vector<Alignment> alignments;
};

struct CohesionOptions {
  std::size_t frequent_cutoff = 5000;
  double min_prob = 0.1;
};

/// Entities (source words outside the `frequent_cutoff` most frequent) that
/// appear in the final sentence and in context, translated with one lemma
/// throughout, and having at least two alternative lemmas. One true group per
/// alternative lemma; contrastive groups switch only the final sentence's mentions.
std::vector<ContrastiveInstance> build_cohesion_instances(std::span<const AlignedFragment> fragments,
                                                          const LexicalTable& table, const Lemmatizer& lemmatizer,
                                                          std::span<const std::string> frequency_list,
                                                          const MorphologyProvider& morph,
                                                          const CohesionOptions& options = {},
                                                          BuildStats* stats = nullptr);

struct VpEllipsisOptions {
  std::size_t k = 10;
  std::string do_word = "do";
};

/// Replaces each seed's marked verb with the other top-k translation lemmas of
/// `do_word`, inflected with the true verb's tags. Uninflectable candidates
/// are skipped with a warning; seeds left without candidates are dropped.
std::vector<ContrastiveInstance> build_vp_ellipsis_instances(std::span<const EllipsisSeed> seeds,
                                                             const LexicalTable& table, const Lemmatizer& lemmatizer,
                                                             const MorphologyProvider& morph,
                                                             const VpEllipsisOptions& options = {},
                                                             std::vector<std::string>* warnings = nullptr);

}  // namespace docnmt
