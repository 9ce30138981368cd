#include "docnmt/inference.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "docnmt/bpe.hpp"

namespace docnmt {

TokenSeq Hypothesis::content() const {
  if (finished && !tokens.empty()) return TokenSeq(tokens.begin(), tokens.end() - 1);
  return tokens;
}

namespace {

bool better(double sa, const TokenSeq& a, double sb, const TokenSeq& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

struct Candidate {
  double score;
  std::size_t hyp;  // index into the sentence's live list
  int token;
};

constexpr std::size_t kChunk = 64;

}  // namespace

std::vector<Hypothesis> beam_search(DecoderSession& session, std::size_t beam_size, std::size_t max_len) {
  if (beam_size == 0) throw std::invalid_argument("beam size must be at least 1");
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  struct Live {
    TokenSeq tokens;
    double score;
  };
  const std::size_t n = session.rows();
  std::vector<std::vector<Live>> live(n, std::vector<Live>{Live{{}, 0.0}});
  std::vector<std::vector<Hypothesis>> finished(n);

  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<int> feed;
    for (const auto& hyps : live)
      for (const auto& h : hyps) feed.push_back(h.tokens.empty() ? kBosId : h.tokens.back());
    if (feed.empty()) break;
    const Tensor lp = session.step(feed);
    const std::size_t v = lp.size(1);
    const auto data = lp.data();
    std::vector<std::size_t> keep;
    std::size_t row = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& hyps = live[i];
      if (hyps.empty()) continue;
      std::vector<Candidate> cands;
      cands.reserve(hyps.size() * v);
      for (std::size_t h = 0; h < hyps.size(); ++h)
        for (std::size_t tok = 0; tok < v; ++tok)
          cands.push_back({hyps[h].score + data[(row + h) * v + tok], h, static_cast<int>(tok)});
      auto order = [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        const TokenSeq& ta = hyps[a.hyp].tokens;
        const TokenSeq& tb = hyps[b.hyp].tokens;
        if (ta != tb) return ta < tb;
        return a.token < b.token;
      };
      const std::size_t take = std::min(beam_size, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), order);
      std::vector<Live> next;
      std::vector<std::size_t> next_rows;
      for (std::size_t c = 0; c < take; ++c) {
        TokenSeq seq = hyps[cands[c].hyp].tokens;
        seq.push_back(cands[c].token);
        if (cands[c].token == kEosId) {
          finished[i].push_back({std::move(seq), cands[c].score, true});
        } else {
          next.push_back({std::move(seq), cands[c].score});
          next_rows.push_back(row + cands[c].hyp);
        }
      }
      row += hyps.size();
      if (t + 1 == max_len) {
        for (auto& h : next) finished[i].push_back({std::move(h.tokens), h.score, false});
        next.clear();
      }
      // Scores only decrease, so a finished hypothesis ahead of every live one is final.
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished[i]) best_finished = std::max(best_finished, f.score);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : next) best_live = std::max(best_live, h.score);
      if (!finished[i].empty() && best_finished > best_live) next.clear();
      if (!next.empty()) keep.insert(keep.end(), next_rows.begin(), next_rows.end());
      hyps = std::move(next);
    }
    if (keep.empty()) break;
    session.reorder(keep);
  }

  std::vector<Hypothesis> out;
  for (auto& f : finished) {
    if (f.empty()) throw std::logic_error("beam search ended without hypotheses");
    auto best = std::min_element(f.begin(), f.end(), [](const Hypothesis& a, const Hypothesis& b) {
      return better(a.score, a.tokens, b.score, b.tokens);
    });
    out.push_back(std::move(*best));
  }
  return out;
}

std::vector<TokenSeq> translate_sentences(const BaseModel& base, const std::vector<TokenSeq>& src,
                                          const TranslateOptions& options) {
  NoGradGuard ng;
  const std::size_t max_len = options.max_len ? options.max_len : base.config().max_len;
  std::vector<TokenSeq> out;
  out.reserve(src.size());
  for (std::size_t begin = 0; begin < src.size(); begin += kChunk) {
    const std::size_t end = std::min(src.size(), begin + kChunk);
    std::vector<TokenSeq> chunk(src.begin() + static_cast<std::ptrdiff_t>(begin),
                                src.begin() + static_cast<std::ptrdiff_t>(end));
    const EncoderOutput enc = base.encode(chunk);
    auto session = base.start_session(enc);
    for (auto& h : beam_search(*session, options.beam_size, max_len)) out.push_back(h.content());
  }
  return out;
}

std::vector<std::vector<TokenSeq>> translate_documents(const BaseModel& base, const CadecModel* cadec,
                                                       const std::vector<std::vector<TokenSeq>>& groups,
                                                       const TranslateOptions& options, const CadecTrace& trace) {
  NoGradGuard ng;
  if (cadec && options.context > cadec->config().max_context)
    throw std::invalid_argument("context window exceeds the model's max_context");
  // First passes for every sentence: they do not depend on context.
  std::vector<TokenSeq> flat;
  for (const auto& g : groups) flat.insert(flat.end(), g.begin(), g.end());
  const std::vector<TokenSeq> first = translate_sentences(base, flat, options);
  std::vector<std::vector<TokenSeq>> out(groups.size());
  std::vector<std::vector<TokenSeq>> first_pass(groups.size());
  std::size_t longest = 0;
  for (std::size_t g = 0, k = 0; g < groups.size(); ++g) {
    first_pass[g].assign(first.begin() + static_cast<std::ptrdiff_t>(k),
                         first.begin() + static_cast<std::ptrdiff_t>(k + groups[g].size()));
    k += groups[g].size();
    longest = std::max(longest, groups[g].size());
    out[g].resize(groups[g].size());
    if (!groups[g].empty()) out[g][0] = first_pass[g][0];
    if (!cadec) out[g] = first_pass[g];
  }
  if (!cadec) return out;

  const std::size_t max_len = options.max_len ? options.max_len : cadec->config().max_len;
  BaseRepresentationCache cache(base);
  for (std::size_t pos = 1; pos < longest; ++pos) {
    std::vector<std::size_t> which;
    std::vector<CadecInput> inputs;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].size() <= pos) continue;
      const std::size_t from = pos > options.context ? pos - options.context : 0;
      CadecInput in;
      in.src = groups[g][pos];
      in.first_pass = first_pass[g][pos];
      for (std::size_t j = from; j < pos; ++j) {
        in.ctx_src.push_back(groups[g][j]);
        in.ctx_tgt.push_back(out[g][j]);
      }
      if (trace) trace(pos, in.ctx_src.size());
      which.push_back(g);
      inputs.push_back(std::move(in));
    }
    for (std::size_t begin = 0; begin < inputs.size(); begin += kChunk) {
      const std::size_t end = std::min(inputs.size(), begin + kChunk);
      std::vector<CadecInput> chunk(inputs.begin() + static_cast<std::ptrdiff_t>(begin),
                                    inputs.begin() + static_cast<std::ptrdiff_t>(end));
      const CadecMemory memory = build_cadec_memory(base, cache, chunk);
      auto session = cadec->start_session(memory);
      const auto hyps = beam_search(*session, options.beam_size, max_len);
      for (std::size_t k = 0; k < hyps.size(); ++k) out[which[begin + k]][pos] = hyps[k].content();
    }
  }
  return out;
}

std::vector<TokenSeq> translate_document(const BaseModel& base, const CadecModel* cadec,
                                         const std::vector<TokenSeq>& sentences, const TranslateOptions& options,
                                         const CadecTrace& trace) {
  return translate_documents(base, cadec, {sentences}, options, trace).front();
}

}  // namespace docnmt
