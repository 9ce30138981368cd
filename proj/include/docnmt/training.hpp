#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "docnmt/checkpoint.hpp"
#include "docnmt/model.hpp"

namespace docnmt {

/// round(rate * n) with halves away from zero.
std::size_t corruption_count(std::size_t n, double rate);

/// Replaces exactly corruption_count(ref.size(), rate) positions, chosen
/// uniformly without replacement, with uniform non-special ids in
/// [kNumSpecials, vocab) other than the original. `ref` holds content ids only.
TokenSeq corrupt_reference(const TokenSeq& ref, double rate, std::size_t vocab, std::mt19937_64& rng);

/// Bernoulli(p) draw deciding whether the first pass is the corrupted reference.
bool draw_corrupted_branch(double p, std::mt19937_64& rng);

/// scale * min(step^-0.5, step * warmup^-1.5). Throws for step 0.
double lr_at(std::size_t step, std::size_t warmup_steps, double scale);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  std::size_t warmup_steps = 16000;
  double scale = 1.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}
  /// One update of every parameter with a gradient; returns the learning rate used.
  double step(ParameterSet& params);
  std::size_t steps() const { return step_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

/// Elementwise mean. Throws CheckpointError on name or shape mismatch.
ParameterSet average_checkpoints(std::span<const ParameterSet> checkpoints);

/// Reference-side data of one CADec training example.
struct CadecExample {
  TokenSeq src;
  TokenSeq tgt;
  std::vector<TokenSeq> ctx_src;  // oldest first
  std::vector<TokenSeq> ctx_tgt;  // reference translations of the context
};

struct MixedObjectiveConfig {
  double p = 0.5;
  double corruption_rate = 0.2;

  void validate() const;
};

struct LossStats {
  std::size_t corrupted = 0;
  std::size_t sampled = 0;
  std::size_t tokens = 0;
};

/// Mean token NLL of the reference current sentence (plus EOS) given first
/// passes drawn per example: corrupted reference with probability p,
/// otherwise a base-model sample.
Tensor cadec_training_loss(const BaseModel& base, const CadecModel& cadec, BaseRepresentationCache& cache,
                           std::span<const CadecExample> batch, const MixedObjectiveConfig& cfg, std::mt19937_64& rng,
                           const ForwardOptions& opt = {}, LossStats* stats = nullptr);

struct SentencePair {
  TokenSeq src;
  TokenSeq tgt;
};

/// Mean token NLL of (tgt, EOS) under teacher forcing.
Tensor base_training_loss(const BaseModel& model, std::span<const SentencePair> batch, const ForwardOptions& opt = {});

/// Groups example indices into batches of at most `budget` source tokens
/// (a longer example gets a batch of its own); examples of similar length
/// share batches. Batch order is shuffled with `rng`.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> src_lengths, std::size_t budget,
                                                   std::mt19937_64& rng);

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch_tokens = 16000;  // source tokens per batch
  std::size_t max_steps = 100000;
  double max_seconds = 0.0;          // 0 = unlimited
  std::size_t eval_every = 1000;     // steps between dev evaluations (= checkpoint interval)
  std::size_t patience = 5;
  std::size_t average_last = 5;
  AdamConfig adam;
  MixedObjectiveConfig mix;

  std::string to_text() const;
  /// Applies key=value lines on top of the current values.
  void apply_text(const std::string& text);
};

/// Dev metrics; consistency is absent when no contrastive dev set is used.
struct DevMetrics {
  double bleu = 0.0;
  std::optional<double> consistency;
};

/// Append-only `step<TAB>metric<TAB>value` log, optionally mirrored to a file.
class MetricLog {
 public:
  MetricLog() = default;
  explicit MetricLog(const std::string& path);
  void add(std::size_t step, const std::string& metric, double value);
  struct Entry {
    std::size_t step;
    std::string metric;
    double value;
  };
  const std::vector<Entry>& entries() const { return entries_; }
  /// Values of one metric in order.
  std::vector<double> series(const std::string& metric) const;

 private:
  std::string path_;
  std::vector<Entry> entries_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  std::size_t steps = 0;
  std::size_t evaluations = 0;
  bool stopped_early = false;
  std::size_t averaged = 0;  // checkpoints in the final average
  double seconds = 0.0;
};

/// Evaluates the model whose parameters are currently loaded.
using DevEvaluator = std::function<DevMetrics()>;

/// Trains in place. Every `eval_every` steps the dev metrics are logged and a
/// checkpoint kept; training stops after `patience` evaluations in which
/// neither BLEU nor consistency improved, or at the step/time limit. The
/// model ends up holding the mean of the last `average_last` checkpoints.
TrainResult train_base(BaseModel& model, std::span<const SentencePair> data, const TrainConfig& config,
                       const DevEvaluator& evaluate, MetricLog& log);

/// As train_base for the context-aware decoder; `base` stays untouched.
TrainResult train_cadec(const BaseModel& base, CadecModel& cadec, std::span<const CadecExample> data,
                        const TrainConfig& config, const DevEvaluator& evaluate, MetricLog& log);

}  // namespace docnmt
