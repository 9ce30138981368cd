#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "docnmt/model.hpp"

namespace docnmt {

struct Hypothesis {
  TokenSeq tokens;  // ends with EOS iff finished
  double score = 0.0;
  bool finished = false;

  /// Tokens without the trailing EOS.
  TokenSeq content() const;
};

/// Beam search over `session`, whose rows are one per sentence (all starting
/// from an empty prefix). Returns the best hypothesis per sentence. Scores are
/// unnormalized sums of log-probabilities; ties go to the lexicographically
/// smaller token sequence. `max_len` bounds the length including EOS;
/// unfinished hypotheses at that length compete with finished ones.
std::vector<Hypothesis> beam_search(DecoderSession& session, std::size_t beam_size, std::size_t max_len);

/// Trace hook: (sentence position in the group, number of context sentences).
using CadecTrace = std::function<void(std::size_t, std::size_t)>;

struct TranslateOptions {
  std::size_t beam_size = 4;
  std::size_t max_len = 0;  // 0: the model's max_len
  std::size_t context = 3;  // C
};

/// Context-agnostic translation of independent sentences.
std::vector<TokenSeq> translate_sentences(const BaseModel& base, const std::vector<TokenSeq>& src,
                                          const TranslateOptions& options = {});

/// Two-pass translation of consecutive sentences: the first with the base
/// model alone, every later one by CADec given the base translation and up to
/// C previous sources with their final translations. Without a CADec model
/// every sentence gets its base translation.
std::vector<TokenSeq> translate_document(const BaseModel& base, const CadecModel* cadec,
                                         const std::vector<TokenSeq>& sentences, const TranslateOptions& options = {},
                                         const CadecTrace& trace = {});

/// translate_document over many groups, batching equal positions together.
std::vector<std::vector<TokenSeq>> translate_documents(const BaseModel& base, const CadecModel* cadec,
                                                       const std::vector<std::vector<TokenSeq>>& groups,
                                                       const TranslateOptions& options = {},
                                                       const CadecTrace& trace = {});

}  // namespace docnmt
