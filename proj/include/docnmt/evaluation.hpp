#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "docnmt/bpe.hpp"
#include "docnmt/data.hpp"
#include "docnmt/inference.hpp"
#include "docnmt/model.hpp"

namespace docnmt {

struct BleuStats {
  double score = 0.0;                  // 0..100
  std::array<double, 4> precision{};   // clipped n-gram precisions
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

/// Corpus BLEU against a single reference per line, whitespace tokens, no
/// smoothing. Throws std::invalid_argument when line counts differ.
BleuStats bleu_stats(std::span<const std::string> candidates, std::span<const std::string> references,
                     bool lowercase = true);
double bleu(std::span<const std::string> candidates, std::span<const std::string> references, bool lowercase = true);

/// Scores of one instance's groups: the true group first, then each contrastive group.
using GroupScores = std::vector<double>;

/// Score of group `g` (0 = true, k = k-th contrastive) of an instance.
using ContrastiveScorer = std::function<double(const ContrastiveInstance&, std::size_t g)>;

/// Force-decoding scorer over trained models. Without CADec the final
/// sentence is scored by the base model alone; with CADec the context
/// sentences of the scored group are the context translations and the first
/// pass is the base beam translation of the current source.
class ModelScorer {
 public:
  ModelScorer(const BaseModel& base, const CadecModel* cadec, const BpeModel& src_bpe, const BpeModel& tgt_bpe,
              TranslateOptions options = {});

  double score(const ContrastiveInstance& inst, std::size_t group);
  /// Batched scores for many instances.
  std::vector<GroupScores> score_all(std::span<const ContrastiveInstance> instances);
  ContrastiveScorer as_function();

 private:
  const TokenSeq& first_pass(const TokenSeq& src);
  void prefetch_first_passes(std::span<const ContrastiveInstance> instances);

  const BaseModel& base_;
  const CadecModel* cadec_;
  const BpeModel& src_bpe_;
  const BpeModel& tgt_bpe_;
  TranslateOptions options_;
  std::map<TokenSeq, TokenSeq> first_pass_;
};

/// Sum of log-probabilities of each (tgt, EOS) given logits [B, L, V] whose
/// row b predicts tgt[b] then EOS.
std::vector<double> sequence_log_probs(const Tensor& logits, std::span<const TokenSeq> tgt);

struct ConsistencyBucket {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct ConsistencyReport {
  std::string phenomenon;
  ConsistencyBucket total;
  /// Keyed by latest relevant distance 1..3; 0 collects instances without one.
  std::map<int, ConsistencyBucket> by_distance;

  double accuracy() const { return total.accuracy(); }
  /// `bucket<TAB>count<TAB>correct<TAB>accuracy` rows.
  void write_tsv(std::ostream& out) const;
  /// Aligned table: total, 1st, 2nd, 3rd.
  std::string table() const;
};

/// An instance is correct iff its true group scores strictly above every contrastive group.
bool instance_correct(const GroupScores& scores);

ConsistencyReport consistency_report(std::span<const ContrastiveInstance> instances,
                                     std::span<const GroupScores> scores);
ConsistencyReport evaluate_consistency(const ContrastiveScorer& scorer, std::span<const ContrastiveInstance> instances);

/// Merged table for several reports (one row each).
std::string consistency_table(std::span<const ConsistencyReport> reports);

}  // namespace docnmt
