#include "docnmt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace docnmt {

namespace {

std::vector<std::string> bleu_tokens(const std::string& line, bool lowercase) {
  std::string s = line;
  if (lowercase)
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return tokens_of(s);
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

}  // namespace

BleuStats bleu_stats(std::span<const std::string> candidates, std::span<const std::string> references, bool lowercase) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("BLEU needs equal line counts (" + std::to_string(candidates.size()) + " vs " +
                                std::to_string(references.size()) + ")");
  std::array<std::size_t, 4> matched{}, total{};
  BleuStats s;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = bleu_tokens(candidates[i], lowercase);
    const auto r = bleu_tokens(references[i], lowercase);
    s.hyp_length += c.size();
    s.ref_length += r.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cc = ngram_counts(c, n);
      const auto rc = ngram_counts(r, n);
      for (const auto& [gram, k] : cc) {
        auto it = rc.find(gram);
        matched[n - 1] += std::min(k, it == rc.end() ? std::size_t{0} : it->second);
        total[n - 1] += k;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    s.precision[n] = total[n] ? static_cast<double>(matched[n]) / static_cast<double>(total[n]) : 0.0;
    if (s.precision[n] == 0.0) zero = true;
    else log_sum += std::log(s.precision[n]);
  }
  if (s.hyp_length == 0) {
    s.brevity_penalty = 0.0;
  } else if (s.hyp_length < s.ref_length) {
    s.brevity_penalty = std::exp(1.0 - static_cast<double>(s.ref_length) / static_cast<double>(s.hyp_length));
  } else {
    s.brevity_penalty = 1.0;
  }
  s.score = zero ? 0.0 : 100.0 * s.brevity_penalty * std::exp(log_sum / 4.0);
  return s;
}

double bleu(std::span<const std::string> candidates, std::span<const std::string> references, bool lowercase) {
  return bleu_stats(candidates, references, lowercase).score;
}

std::vector<double> sequence_log_probs(const Tensor& logits, std::span<const TokenSeq> tgt) {
  const Tensor lp = log_softmax(logits);
  const std::size_t l = lp.size(1), v = lp.size(2);
  const auto d = lp.data();
  std::vector<double> out;
  for (std::size_t b = 0; b < tgt.size(); ++b) {
    if (tgt[b].size() + 1 > l) throw std::invalid_argument("target longer than the scored logits");
    double s = 0.0;
    for (std::size_t t = 0; t <= tgt[b].size(); ++t) {
      const int id = t < tgt[b].size() ? tgt[b][t] : kEosId;
      s += d[(b * l + t) * v + static_cast<std::size_t>(id)];
    }
    out.push_back(s);
  }
  return out;
}

ModelScorer::ModelScorer(const BaseModel& base, const CadecModel* cadec, const BpeModel& src_bpe,
                         const BpeModel& tgt_bpe, TranslateOptions options)
    : base_(base), cadec_(cadec), src_bpe_(src_bpe), tgt_bpe_(tgt_bpe), options_(options) {}

const TokenSeq& ModelScorer::first_pass(const TokenSeq& src) {
  auto it = first_pass_.find(src);
  if (it != first_pass_.end()) return it->second;
  return first_pass_[src] = translate_sentences(base_, {src}, options_).front();
}

void ModelScorer::prefetch_first_passes(std::span<const ContrastiveInstance> instances) {
  std::vector<TokenSeq> missing;
  for (const auto& inst : instances) {
    TokenSeq s = src_bpe_.encode(inst.src.back());
    if (!first_pass_.count(s) && std::find(missing.begin(), missing.end(), s) == missing.end()) missing.push_back(s);
  }
  const auto out = translate_sentences(base_, missing, options_);
  for (std::size_t i = 0; i < missing.size(); ++i) first_pass_[missing[i]] = out[i];
}

double ModelScorer::score(const ContrastiveInstance& inst, std::size_t group) {
  ContrastiveInstance one = inst;
  const auto& chosen = group == 0 ? inst.true_tgt : inst.contrastive.at(group - 1);
  one.true_tgt = chosen;
  one.contrastive = {chosen};
  return score_all(std::span<const ContrastiveInstance>(&one, 1)).front().front();
}

std::vector<GroupScores> ModelScorer::score_all(std::span<const ContrastiveInstance> instances) {
  NoGradGuard ng;
  struct Job {
    std::size_t inst, group;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (std::size_t g = 0; g <= instances[i].contrastive.size(); ++g) jobs.push_back({i, g});
  std::vector<GroupScores> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) out[i].resize(instances[i].contrastive.size() + 1);
  if (cadec_) prefetch_first_passes(instances);
  BaseRepresentationCache cache(base_);
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < jobs.size(); begin += kChunk) {
    const std::size_t end = std::min(jobs.size(), begin + kChunk);
    std::vector<TokenSeq> src, cand, cand_in;
    std::vector<CadecInput> inputs;
    for (std::size_t j = begin; j < end; ++j) {
      const auto& inst = instances[jobs[j].inst];
      const auto& group = jobs[j].group == 0 ? inst.true_tgt : inst.contrastive[jobs[j].group - 1];
      TokenSeq s = src_bpe_.encode(inst.src.back());
      TokenSeq c = tgt_bpe_.encode(group.back());
      TokenSeq in{kBosId};
      in.insert(in.end(), c.begin(), c.end());
      if (cadec_) {
        CadecInput ci;
        ci.first_pass = first_pass(s);
        ci.src = s;
        const std::size_t n = inst.src.size();
        const std::size_t from = n - 1 > options_.context ? n - 1 - options_.context : 0;
        for (std::size_t k = from; k + 1 < n; ++k) {
          ci.ctx_src.push_back(src_bpe_.encode(inst.src[k]));
          ci.ctx_tgt.push_back(tgt_bpe_.encode(group[k]));
        }
        inputs.push_back(std::move(ci));
      }
      src.push_back(std::move(s));
      cand.push_back(std::move(c));
      cand_in.push_back(std::move(in));
    }
    Tensor logits;
    if (cadec_) {
      const CadecMemory memory = build_cadec_memory(base_, cache, inputs);
      logits = cadec_->forward_logits(memory, cand_in);
    } else {
      logits = base_.forward_logits(src, cand_in);
    }
    const auto scores = sequence_log_probs(logits, cand);
    for (std::size_t j = begin; j < end; ++j) out[jobs[j].inst][jobs[j].group] = scores[j - begin];
  }
  return out;
}

ContrastiveScorer ModelScorer::as_function() {
  return [this](const ContrastiveInstance& inst, std::size_t g) { return score(inst, g); };
}

bool instance_correct(const GroupScores& scores) {
  if (scores.size() < 2) throw std::invalid_argument("an instance needs at least one contrastive score");
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (!(scores[0] > scores[k])) return false;
  return true;
}

ConsistencyReport consistency_report(std::span<const ContrastiveInstance> instances,
                                     std::span<const GroupScores> scores) {
  if (instances.size() != scores.size()) throw std::invalid_argument("one score vector per instance required");
  ConsistencyReport r;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (scores[i].size() != instances[i].contrastive.size() + 1)
      throw std::invalid_argument("score count does not match the instance's groups");
    const std::string ph = to_string(instances[i].phenomenon);
    if (r.phenomenon.empty()) r.phenomenon = ph;
    else if (r.phenomenon != ph) r.phenomenon = "mixed";
    const bool ok = instance_correct(scores[i]);
    auto& bucket = r.by_distance[instances[i].distance.value_or(0)];
    ++bucket.count;
    ++r.total.count;
    bucket.correct += ok;
    r.total.correct += ok;
  }
  return r;
}

ConsistencyReport evaluate_consistency(const ContrastiveScorer& scorer, std::span<const ContrastiveInstance> instances) {
  std::vector<GroupScores> scores;
  for (const auto& inst : instances) {
    if (inst.contrastive.empty()) throw std::invalid_argument("instance without contrastive groups");
    GroupScores s;
    for (std::size_t g = 0; g <= inst.contrastive.size(); ++g) s.push_back(scorer(inst, g));
    scores.push_back(std::move(s));
  }
  return consistency_report(instances, scores);
}

void ConsistencyReport::write_tsv(std::ostream& out) const {
  out << "bucket\tcount\tcorrect\taccuracy\n";
  auto row = [&out](const std::string& name, const ConsistencyBucket& b) {
    out << name << '\t' << b.count << '\t' << b.correct << '\t' << std::fixed << std::setprecision(4) << b.accuracy()
        << '\n';
  };
  row("total", total);
  for (const auto& [d, b] : by_distance) row(d == 0 ? "n/a" : std::to_string(d), b);
}

namespace {

std::string cell(const std::map<int, ConsistencyBucket>& m, int d) {
  auto it = m.find(d);
  if (it == m.end() || it->second.count == 0) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * it->second.accuracy();
  return s.str();
}

}  // namespace

std::string consistency_table(std::span<const ConsistencyReport> reports) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "phenomenon" << std::right << std::setw(8) << "total" << std::setw(8) << "1st"
      << std::setw(8) << "2nd" << std::setw(8) << "3rd" << std::setw(8) << "n\n";
  for (const auto& r : reports) {
    std::ostringstream tot;
    tot << std::fixed << std::setprecision(1) << 100.0 * r.accuracy();
    out << std::left << std::setw(14) << r.phenomenon << std::right << std::setw(8) << tot.str() << std::setw(8)
        << cell(r.by_distance, 1) << std::setw(8) << cell(r.by_distance, 2) << std::setw(8) << cell(r.by_distance, 3)
        << std::setw(7) << r.total.count << '\n';
  }
  return out.str();
}

std::string ConsistencyReport::table() const { return consistency_table(std::span<const ConsistencyReport>(this, 1)); }

}  // namespace docnmt
