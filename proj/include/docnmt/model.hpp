#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "docnmt/checkpoint.hpp"
#include "docnmt/tensor.hpp"

namespace docnmt {

using TokenSeq = std::vector<int>;

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t max_context = 3;  // C: context sentences visible to CADec
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t max_len = 32;
  double dropout = 0.0;

  /// N=6, h=8, d_model=512, d_ff=2048.
  static ModelConfig transformer_base();

  void validate() const;
  std::string to_text() const;  // key=value lines
  static ModelConfig from_text(const std::string& text);
  std::string fingerprint() const;
  /// Width of the one-hot sentence-distance code: C + 1.
  std::size_t distance_dims() const { return max_context + 1; }
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

/// Per-call forward options. Dropout applies only when an rng is supplied.
struct ForwardOptions {
  std::mt19937_64* dropout_rng = nullptr;
  /// When set, every attention weight tensor [B, h, Lq, Lk] is appended here.
  std::vector<Tensor>* attention_log = nullptr;
};

/// Right-padded id batch.
struct PaddedBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;               // batch * length, kPadId filler
  std::vector<std::size_t> lengths;   // true lengths
};

PaddedBatch pad_batch(const std::vector<TokenSeq>& seqs);

/// Source states from the last encoder layer.
struct EncoderOutput {
  Tensor states;                      // [B, Ls, d]
  std::vector<std::size_t> lengths;
};

/// Incremental decoder over a batch of hypotheses. Row order is defined by
/// the caller; reorder() keeps and duplicates rows (beam pruning).
class DecoderSession {
 public:
  virtual ~DecoderSession() = default;
  /// Feeds one token per row and returns next-token log-probabilities [rows, V].
  virtual Tensor step(const std::vector<int>& tokens) = 0;
  virtual void reorder(const std::vector<std::size_t>& rows) = 0;
  virtual std::size_t rows() const = 0;
};

/// Context-agnostic Transformer (pre-norm encoder-decoder).
class BaseModel {
 public:
  BaseModel(const ModelConfig& config, std::uint64_t seed);
  BaseModel(const ModelConfig& config, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  EncoderOutput encode(const std::vector<TokenSeq>& src, const ForwardOptions& opt = {}) const;
  /// Final-layer decoder states [B, Lt, d] for inputs that already start with BOS.
  Tensor decode_states(const EncoderOutput& enc, const std::vector<TokenSeq>& tgt_in,
                       const ForwardOptions& opt = {}) const;
  Tensor logits(const Tensor& states) const;
  /// Teacher-forced logits [B, Lt, V].
  Tensor forward_logits(const std::vector<TokenSeq>& src, const std::vector<TokenSeq>& tgt_in,
                        const ForwardOptions& opt = {}) const;

  /// Session over `enc`, each row starting from an empty prefix.
  std::unique_ptr<DecoderSession> start_session(const EncoderOutput& enc) const;

  const Tensor& target_embedding() const { return params_.at("tgt_emb"); }

 private:
  ModelConfig config_;
  ParameterSet params_;
};

/// Log-probabilities [n+1, V] for predicting tgt[0..n-1] then EOS from (src, BOS tgt).
Tensor base_forward(const BaseModel& model, const TokenSeq& src, const TokenSeq& tgt);

/// Attended memories for a batch of CADec predictions. Rows of `enc` are base
/// encoder states concatenated with a distance one-hot (d + C + 1 wide);
/// rows of `dec` are base decoder states, target token embeddings and the
/// distance one-hot (2d + C + 1 wide).
struct CadecMemory {
  Tensor enc;                          // [B, Me, d + C + 1]
  std::vector<std::size_t> enc_lengths;
  Tensor dec;                          // [B, Md, 2d + C + 1]
  std::vector<std::size_t> dec_lengths;
};

/// One sentence to be (re)translated with context. Context lists are ordered
/// oldest first; the last entry sits at distance 1.
struct CadecInput {
  TokenSeq src;
  TokenSeq first_pass;
  std::vector<TokenSeq> ctx_src;
  std::vector<TokenSeq> ctx_tgt;
};

/// Caches frozen base-model representations of sentences keyed by token ids.
class BaseRepresentationCache {
 public:
  explicit BaseRepresentationCache(const BaseModel& base) : base_(&base) {}
  /// Encoder states [Ls, d].
  Tensor encoder_states(const TokenSeq& src);
  /// [Lt + 1, 2d]: decoder states for BOS+tgt next to the embeddings of those tokens.
  Tensor decoder_states(const TokenSeq& src, const TokenSeq& tgt);
  /// Batched fill of the encoder cache for every missing sentence.
  void prefetch_encoder(const std::vector<TokenSeq>& srcs);
  void prefetch_decoder(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs);
  void clear();
  std::size_t size() const { return enc_.size() + dec_.size(); }

 private:
  const BaseModel* base_;
  std::map<TokenSeq, Tensor> enc_;
  std::map<std::pair<TokenSeq, TokenSeq>, Tensor> dec_;
};

/// Decoder-side states of `tgt` produced by the frozen base model, not cached.
std::vector<Tensor> base_decoder_representations(const BaseModel& base, const std::vector<TokenSeq>& src,
                                                 const std::vector<TokenSeq>& tgt);

/// Builds the attended memories. Throws if any input has more than C context
/// sentences. First-pass representations bypass the cache unless
/// `cache_first_pass` is set (sampled first passes rarely repeat).
CadecMemory build_cadec_memory(const BaseModel& base, BaseRepresentationCache& cache,
                               const std::vector<CadecInput>& inputs, bool cache_first_pass = false);

/// Context-aware decoder: masked self-attention, attention over base encoder
/// states of current + context sources, attention over base decoder
/// representations of first-pass + context translations, feed-forward.
class CadecModel {
 public:
  CadecModel(const ModelConfig& config, std::uint64_t seed);
  CadecModel(const ModelConfig& config, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Teacher-forced logits [B, Lt, V]; tgt_in starts with BOS.
  Tensor forward_logits(const CadecMemory& memory, const std::vector<TokenSeq>& tgt_in,
                        const ForwardOptions& opt = {}) const;
  std::unique_ptr<DecoderSession> start_session(const CadecMemory& memory) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
};

/// Log-probabilities [n+1, V] of (tgt, EOS) under CADec for one input.
Tensor cadec_forward(const BaseModel& base, const CadecModel& cadec, const CadecInput& input, const TokenSeq& tgt,
                     BaseRepresentationCache* cache = nullptr);

/// Ancestral sampling from the base model until EOS or max_len tokens.
TokenSeq sample_translation(const BaseModel& base, const TokenSeq& src, std::mt19937_64& rng, std::size_t max_len);
/// Batched variant; row i uses rngs[i].
std::vector<TokenSeq> sample_translations(const BaseModel& base, const std::vector<TokenSeq>& src,
                                          std::vector<std::mt19937_64>& rngs, std::size_t max_len);

/// Draws an index from a log-probability row by inverse CDF.
int sample_from_log_probs(std::span<const double> log_probs, std::mt19937_64& rng);

}  // namespace docnmt
