#include "docnmt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "docnmt/bpe.hpp"

namespace docnmt {

std::size_t corruption_count(std::size_t n, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("corruption rate must be in [0, 1]");
  return static_cast<std::size_t>(std::round(rate * static_cast<double>(n)));
}

TokenSeq corrupt_reference(const TokenSeq& ref, double rate, std::size_t vocab, std::mt19937_64& rng) {
  const std::size_t k = corruption_count(ref.size(), rate);
  TokenSeq out = ref;
  if (k == 0) return out;
  const std::size_t first = kNumSpecials;
  if (vocab < first + 2) throw std::invalid_argument("vocabulary too small to corrupt references");
  std::vector<std::size_t> pos(ref.size());
  std::iota(pos.begin(), pos.end(), 0);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const int orig = ref[pos[i]];
    const bool content = orig >= static_cast<int>(first) && static_cast<std::size_t>(orig) < vocab;
    std::uniform_int_distribution<int> draw(static_cast<int>(first), static_cast<int>(vocab) - (content ? 2 : 1));
    int r = draw(rng);
    if (content && r >= orig) ++r;
    out[pos[i]] = r;
  }
  return out;
}

bool draw_corrupted_branch(double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must be in [0, 1]");
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

double lr_at(std::size_t step, std::size_t warmup_steps, double scale) {
  if (step == 0) throw std::invalid_argument("learning-rate schedule starts at step 1");
  if (warmup_steps == 0) throw std::invalid_argument("warmup_steps must be positive");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return scale * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

double Adam::step(ParameterSet& params) {
  ++step_;
  const double lr = lr_at(step_, config_.warmup_steps, config_.scale);
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (auto& [name, t] : params) {
    if (!t.requires_grad()) continue;
    const auto g = t.grad();
    if (g.empty()) continue;
    auto& [m, v] = moments_[name];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    auto w = t.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
  return lr;
}

ParameterSet average_checkpoints(std::span<const ParameterSet> checkpoints) {
  if (checkpoints.empty()) throw CheckpointError("no checkpoints to average");
  ParameterSet out = checkpoints[0].clone();
  for (std::size_t k = 1; k < checkpoints.size(); ++k) {
    if (checkpoints[k].size() != out.size()) throw CheckpointError("checkpoints differ in parameter count");
    for (const auto& [name, t] : checkpoints[k]) {
      if (!out.contains(name)) throw CheckpointError("parameter " + name + " missing from the first checkpoint");
      if (out.at(name).shape() != t.shape()) throw CheckpointError("shape mismatch for " + name);
    }
  }
  // Extended-precision sums make the mean of identical values exact.
  const auto n = static_cast<long double>(checkpoints.size());
  for (auto& [name, t] : out) {
    auto a = t.mutable_data();
    std::vector<long double> acc(a.begin(), a.end());
    for (std::size_t k = 1; k < checkpoints.size(); ++k) {
      const auto b = checkpoints[k].at(name).data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
    }
    for (std::size_t i = 0; i < acc.size(); ++i) a[i] = static_cast<double>(acc[i] / n);
  }
  return out;
}

void MixedObjectiveConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must be in [0, 1]");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) throw std::invalid_argument("corruption_rate must be in [0, 1]");
}

namespace {

// Teacher-forced NLL of tgt+EOS for decoder logits [B, L, V].
Tensor sequence_nll(const Tensor& logits, std::span<const TokenSeq> tgt, std::size_t* tokens) {
  const std::size_t b = logits.size(0), l = logits.size(1), v = logits.size(2);
  std::vector<int> targets(b * l, kPadId);
  std::size_t n = 0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < tgt[i].size(); ++t) targets[i * l + t] = tgt[i][t];
    targets[i * l + tgt[i].size()] = kEosId;
    n += tgt[i].size() + 1;
  }
  if (tokens) *tokens += n;
  return cross_entropy(reshape(logits, {b * l, v}), targets, kPadId);
}

std::vector<TokenSeq> with_bos(std::span<const TokenSeq> seqs) {
  std::vector<TokenSeq> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    TokenSeq in{kBosId};
    in.insert(in.end(), s.begin(), s.end());
    out.push_back(std::move(in));
  }
  return out;
}

}  // namespace

Tensor cadec_training_loss(const BaseModel& base, const CadecModel& cadec, BaseRepresentationCache& cache,
                           std::span<const CadecExample> batch, const MixedObjectiveConfig& cfg, std::mt19937_64& rng,
                           const ForwardOptions& opt, LossStats* stats) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<CadecInput> inputs(batch.size());
  std::vector<TokenSeq> targets;
  std::vector<std::size_t> sample_rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    inputs[i].src = ex.src;
    inputs[i].ctx_src = ex.ctx_src;
    inputs[i].ctx_tgt = ex.ctx_tgt;
    targets.push_back(ex.tgt);
    if (draw_corrupted_branch(cfg.p, rng)) {
      inputs[i].first_pass = corrupt_reference(ex.tgt, cfg.corruption_rate, base.config().tgt_vocab, rng);
      if (stats) ++stats->corrupted;
    } else {
      sample_rows.push_back(i);
      if (stats) ++stats->sampled;
    }
  }
  if (!sample_rows.empty()) {
    std::vector<TokenSeq> srcs;
    std::vector<std::mt19937_64> rngs;
    for (std::size_t i : sample_rows) {
      srcs.push_back(batch[i].src);
      rngs.emplace_back(rng());
    }
    auto samples = sample_translations(base, srcs, rngs, base.config().max_len);
    for (std::size_t k = 0; k < sample_rows.size(); ++k) inputs[sample_rows[k]].first_pass = std::move(samples[k]);
  }
  const CadecMemory memory = build_cadec_memory(base, cache, inputs);
  const Tensor logits = cadec.forward_logits(memory, with_bos(targets), opt);
  return sequence_nll(logits, targets, stats ? &stats->tokens : nullptr);
}

Tensor base_training_loss(const BaseModel& model, std::span<const SentencePair> batch, const ForwardOptions& opt) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<TokenSeq> src, tgt;
  for (const auto& p : batch) {
    src.push_back(p.src);
    tgt.push_back(p.tgt);
  }
  const Tensor logits = model.forward_logits(src, with_bos(tgt), opt);
  return sequence_nll(logits, tgt, nullptr);
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> src_lengths, std::size_t budget,
                                                   std::mt19937_64& rng) {
  if (budget == 0) throw std::invalid_argument("batch token budget must be positive");
  std::vector<std::size_t> order(src_lengths.size());
  std::iota(order.begin(), order.end(), 0);
  // Shuffle first so equal lengths are not always grouped the same way.
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return src_lengths[a] < src_lengths[b]; });
  std::vector<std::vector<std::size_t>> batches;
  std::size_t tokens = 0;
  for (std::size_t idx : order) {
    const std::size_t len = std::max<std::size_t>(src_lengths[idx], 1);
    if (batches.empty() || tokens + len > budget) {
      batches.emplace_back();
      tokens = 0;
    }
    batches.back().push_back(idx);
    tokens += len;
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "seed=" << seed << "\nbatch_tokens=" << batch_tokens << "\nmax_steps=" << max_steps
      << "\nmax_seconds=" << max_seconds << "\neval_every=" << eval_every << "\npatience=" << patience
      << "\naverage_last=" << average_last << "\nbeta1=" << adam.beta1 << "\nbeta2=" << adam.beta2
      << "\neps=" << adam.eps << "\nwarmup_steps=" << adam.warmup_steps << "\nlr_scale=" << adam.scale
      << "\np=" << mix.p << "\ncorruption_rate=" << mix.corruption_rate << "\n";
  return out.str();
}

void TrainConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad training config line: " + line);
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "seed") seed = std::stoull(v);
    else if (k == "batch_tokens") batch_tokens = std::stoul(v);
    else if (k == "max_steps") max_steps = std::stoul(v);
    else if (k == "max_seconds") max_seconds = std::stod(v);
    else if (k == "eval_every") eval_every = std::stoul(v);
    else if (k == "patience") patience = std::stoul(v);
    else if (k == "average_last") average_last = std::stoul(v);
    else if (k == "beta1") adam.beta1 = std::stod(v);
    else if (k == "beta2") adam.beta2 = std::stod(v);
    else if (k == "eps") adam.eps = std::stod(v);
    else if (k == "warmup_steps") adam.warmup_steps = std::stoul(v);
    else if (k == "lr_scale") adam.scale = std::stod(v);
    else if (k == "p") mix.p = std::stod(v);
    else if (k == "corruption_rate") mix.corruption_rate = std::stod(v);
    else throw std::invalid_argument("unknown training config key: " + k);
  }
  mix.validate();
}

MetricLog::MetricLog(const std::string& path) : path_(path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open metric log: " + path);
}

void MetricLog::add(std::size_t step, const std::string& metric, double value) {
  entries_.push_back({step, metric, value});
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  out.precision(10);
  out << step << '\t' << metric << '\t' << value << '\n';
}

std::vector<double> MetricLog::series(const std::string& metric) const {
  std::vector<double> out;
  for (const auto& e : entries_)
    if (e.metric == metric) out.push_back(e.value);
  return out;
}

namespace {

using StepLoss = std::function<Tensor(std::span<const std::size_t> batch, std::mt19937_64& rng)>;

TrainResult run_training(ParameterSet& params, std::span<const std::size_t> src_lengths, const StepLoss& step_loss,
                         const TrainConfig& config, const DevEvaluator& evaluate, MetricLog& log) {
  if (src_lengths.empty()) throw std::invalid_argument("no training data");
  if (config.eval_every == 0 || config.average_last == 0) throw std::invalid_argument("eval_every and average_last must be positive");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  std::mt19937_64 rng(config.seed);
  Adam adam(config.adam);
  TrainResult result;
  std::deque<ParameterSet> kept;
  double best_bleu = -1.0, best_cons = -1.0;
  std::size_t stale = 0;
  double loss_sum = 0.0;
  std::size_t loss_n = 0;
  bool evaluated_last = false;

  auto checkpoint = [&](std::size_t step) {
    const DevMetrics m = evaluate ? evaluate() : DevMetrics{};
    ++result.evaluations;
    if (loss_n) log.add(step, "train_loss", loss_sum / static_cast<double>(loss_n));
    loss_sum = 0.0;
    loss_n = 0;
    log.add(step, "dev_bleu", m.bleu);
    if (m.consistency) log.add(step, "dev_consistency", *m.consistency);
    bool improved = m.bleu > best_bleu + 1e-9;
    best_bleu = std::max(best_bleu, m.bleu);
    if (m.consistency) {
      improved |= *m.consistency > best_cons + 1e-9;
      best_cons = std::max(best_cons, *m.consistency);
    }
    stale = improved ? 0 : stale + 1;
    kept.push_back(params.clone());
    if (kept.size() > config.average_last) kept.pop_front();
  };

  bool done = false;
  while (!done) {
    for (const auto& batch : make_batches(src_lengths, config.batch_tokens, rng)) {
      params.zero_grad();
      const Tensor loss = step_loss(batch, rng);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "training diverged at step " << adam.steps() + 1 << ": loss " << value << " (lr "
            << lr_at(adam.steps() + 1, config.adam.warmup_steps, config.adam.scale) << ", batch of " << batch.size()
            << ")";
        throw TrainingDiverged(msg.str());
      }
      loss.backward();
      adam.step(params);
      ++result.steps;
      loss_sum += value;
      ++loss_n;
      evaluated_last = false;
      if (result.steps % config.eval_every == 0) {
        checkpoint(result.steps);
        evaluated_last = true;
        if (stale >= config.patience) {
          result.stopped_early = true;
          done = true;
          break;
        }
      }
      if (result.steps >= config.max_steps || (config.max_seconds > 0 && elapsed() >= config.max_seconds)) {
        done = true;
        break;
      }
    }
  }
  if (!evaluated_last) checkpoint(result.steps);
  const std::vector<ParameterSet> last(kept.begin(), kept.end());
  assign_parameters(params, average_checkpoints(last));
  result.averaged = last.size();
  result.seconds = elapsed();
  log.add(result.steps, "averaged_checkpoints", static_cast<double>(result.averaged));
  return result;
}

}  // namespace

TrainResult train_base(BaseModel& model, std::span<const SentencePair> data, const TrainConfig& config,
                       const DevEvaluator& evaluate, MetricLog& log) {
  std::vector<std::size_t> lengths;
  for (const auto& p : data) lengths.push_back(p.src.size());
  std::vector<SentencePair> buf;
  StepLoss step = [&](std::span<const std::size_t> batch, std::mt19937_64& rng) {
    buf.clear();
    for (std::size_t i : batch) buf.push_back(data[i]);
    ForwardOptions opt;
    if (model.config().dropout > 0) opt.dropout_rng = &rng;
    return base_training_loss(model, buf, opt);
  };
  return run_training(model.params(), lengths, step, config, evaluate, log);
}

TrainResult train_cadec(const BaseModel& base, CadecModel& cadec, std::span<const CadecExample> data,
                        const TrainConfig& config, const DevEvaluator& evaluate, MetricLog& log) {
  config.mix.validate();
  std::vector<std::size_t> lengths;
  for (const auto& ex : data) {
    std::size_t n = ex.src.size();
    for (const auto& c : ex.ctx_src) n += c.size();
    lengths.push_back(n);
  }
  BaseRepresentationCache cache(base);
  std::vector<CadecExample> buf;
  StepLoss step = [&](std::span<const std::size_t> batch, std::mt19937_64& rng) {
    buf.clear();
    for (std::size_t i : batch) buf.push_back(data[i]);
    ForwardOptions opt;
    if (cadec.config().dropout > 0) opt.dropout_rng = &rng;
    return cadec_training_loss(base, cadec, cache, buf, config.mix, rng, opt);
  };
  return run_training(cadec.params(), lengths, step, config, evaluate, log);
}

}  // namespace docnmt
