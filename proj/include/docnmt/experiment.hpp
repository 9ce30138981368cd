#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docnmt/bpe.hpp"
#include "docnmt/data.hpp"
#include "docnmt/evaluation.hpp"
#include "docnmt/inference.hpp"
#include "docnmt/model.hpp"
#include "docnmt/synth.hpp"
#include "docnmt/training.hpp"

namespace docnmt {

/// Encoded training material and dev documents.
struct PreparedData {
  BpeModel src_bpe;
  BpeModel tgt_bpe;
  std::vector<SentencePair> base_train;    // every filtered training pair
  std::vector<CadecExample> cadec_train;   // current sentence of every fragment and prefix
  std::vector<std::vector<std::string>> dev_src;  // dev runs, raw text
  std::vector<std::vector<std::string>> dev_tgt;
};

struct PrepareOptions {
  double min_overlap = 0.9;
  FragmentOptions fragments{7.0, 4, true};
  std::size_t src_merges = 300;
  std::size_t tgt_merges = 600;
  std::size_t max_context = 3;
};

/// Filters, fragments and BPE-encodes a corpus. BPE is learned on the
/// filtered training side only unless both models are given; dev runs use
/// the same gap rule.
PreparedData prepare_data(std::span<const SubtitlePair> train, std::span<const SubtitlePair> dev,
                          const PrepareOptions& options = {}, const BpeModel* src_bpe = nullptr,
                          const BpeModel* tgt_bpe = nullptr);

/// Encodes a document group with a BPE model.
std::vector<TokenSeq> encode_all(const BpeModel& bpe, std::span<const std::string> text);

/// Dev BLEU of two-pass (or base-only when cadec is null) translation of the
/// first `limit` dev documents (0 = all).
double document_bleu(const BaseModel& base, const CadecModel* cadec, const PreparedData& data,
                     const TranslateOptions& options = {}, std::size_t limit = 0);

/// Translations of the dev documents as text, one vector per document.
std::vector<std::vector<std::string>> translate_text_documents(const BaseModel& base, const CadecModel* cadec,
                                                               const BpeModel& src_bpe, const BpeModel& tgt_bpe,
                                                               const std::vector<std::vector<std::string>>& docs,
                                                               const TranslateOptions& options = {});

/// Everything needed to train and evaluate both stages on one corpus.
struct ExperimentConfig {
  ModelConfig model;  // vocabulary sizes are filled in from the data
  TrainConfig base_train;
  TrainConfig cadec_train;
  PrepareOptions prepare;
  TranslateOptions translate;
  std::size_t dev_eval_docs = 50;  // dev documents used for periodic BLEU
  std::size_t dev_eval_instances = 100;  // contrastive dev instances used for periodic consistency

  /// Desk-scale defaults used by the synthetic experiments.
  static ExperimentConfig desk();
  std::string to_text() const;
  /// Applies `section.key=value` lines (sections: model, base, cadec, prepare, translate, experiment).
  void apply_text(const std::string& text);
};

/// Base model trained on `data`; dev BLEU drives stopping.
BaseModel train_base_model(const PreparedData& data, const ExperimentConfig& config, MetricLog& log,
                           TrainResult* result = nullptr);

/// CADec trained over a frozen base; dev BLEU and the dev contrastive sets
/// drive stopping.
CadecModel train_cadec_model(const BaseModel& base, const PreparedData& data,
                             std::span<const ContrastiveInstance> dev_contrastive, const ExperimentConfig& config,
                             MetricLog& log, TrainResult* result = nullptr);

/// Accuracy of the model pair on a contrastive set (base only when cadec is null).
ConsistencyReport contrastive_report(const BaseModel& base, const CadecModel* cadec, const PreparedData& data,
                                     std::span<const ContrastiveInstance> instances,
                                     const TranslateOptions& options = {});

/// Model of the right shape for `data` with the given seed.
ModelConfig sized_config(const ModelConfig& model, const PreparedData& data);

}  // namespace docnmt
