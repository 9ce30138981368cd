#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace docnmt {

/// One aligned subtitle line.
struct SubtitlePair {
  std::string src;
  std::string tgt;
  double start_time = 0.0;
  double end_time = 0.0;
  double overlap = 1.0;  // relative time overlap of the source and target frames

  bool operator==(const SubtitlePair&) const = default;
};

/// A current sentence pair with up to 3 preceding pairs, oldest first.
struct Fragment {
  std::vector<SubtitlePair> context;
  SubtitlePair current;
  /// Positions of the fragment's sentences in the input of group_and_fragment.
  std::vector<std::size_t> source_index;

  std::size_t size() const { return context.size() + 1; }
  /// Sentence i of the fragment, context first.
  const SubtitlePair& at(std::size_t i) const { return i < context.size() ? context[i] : current; }
  bool operator==(const Fragment&) const = default;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Keeps pairs whose overlap is at least `min_overlap`.
std::vector<SubtitlePair> filter_pairs(std::span<const SubtitlePair> pairs, double min_overlap = 0.9);

struct FragmentOptions {
  double max_gap_seconds = 7.0;
  std::size_t window = 4;
  /// Also emit the (s1,s2) ... (s1..s_{window-1}) prefixes of every run.
  bool include_short_prefixes = false;
};

/// Splits temporally ordered pairs into runs whose consecutive start times
/// differ by at most max_gap. Throws DataError on decreasing start times.
std::vector<std::vector<SubtitlePair>> split_runs(std::span<const SubtitlePair> pairs, double max_gap_seconds);

/// Sliding windows of `window` sentences over every run, plus prefixes when
/// requested. Runs shorter than the window yield only their prefixes.
std::vector<Fragment> group_and_fragment(std::span<const SubtitlePair> pairs, const FragmentOptions& options = {});

/// Corpus TSV: src, tgt, start, end, overlap.
std::vector<SubtitlePair> read_corpus(std::istream& in, const std::string& name = "<stream>");
void write_corpus(std::ostream& out, std::span<const SubtitlePair> pairs);
std::vector<SubtitlePair> load_corpus(const std::string& path);
void save_corpus(const std::string& path, std::span<const SubtitlePair> pairs);

enum class Phenomenon { deixis, lex_cohesion, ellipsis_infl, ellipsis_vp };

std::string to_string(Phenomenon p);
Phenomenon phenomenon_from_string(const std::string& s);

struct ContrastiveInstance {
  Phenomenon phenomenon = Phenomenon::deixis;
  std::vector<std::string> src;
  std::vector<std::string> true_tgt;
  std::vector<std::vector<std::string>> contrastive;
  std::optional<int> distance;  // latest relevant context, 1..3

  bool operator==(const ContrastiveInstance&) const = default;
};

/// Empty string when valid, otherwise the first violated invariant.
std::string instance_problem(const ContrastiveInstance& inst);

/// Test-set file: blank-line separated blocks, each a header
/// "# phenomenon=<p> distance=<d|n/a>" followed by S<i>, T<i> and C<k>.<i> lines.
std::vector<ContrastiveInstance> read_testset(std::istream& in, const std::string& name = "<stream>");
void write_testset(std::ostream& out, std::span<const ContrastiveInstance> instances);
std::vector<ContrastiveInstance> load_testset(const std::string& path);
void save_testset(const std::string& path, std::span<const ContrastiveInstance> instances);

/// A VP-ellipsis seed: true translation with the target-only verb marked.
struct EllipsisSeed {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::size_t verb_sentence = 0;  // index into tgt
  std::size_t verb_token = 0;     // whitespace token index within that sentence
  std::optional<int> distance;

  bool operator==(const EllipsisSeed&) const = default;
};

/// Same block format with header "# phenomenon=ellipsis_vp distance=<d> verb=<sentence>.<token>"
/// and no contrastive lines.
std::vector<EllipsisSeed> read_ellipsis_seeds(std::istream& in, const std::string& name = "<stream>");
void write_ellipsis_seeds(std::ostream& out, std::span<const EllipsisSeed> seeds);

/// Whitespace tokenization and joining.
std::vector<std::string> tokens_of(const std::string& sentence);
std::string join_tokens(std::span<const std::string> tokens);

}  // namespace docnmt
