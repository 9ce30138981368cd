#include "docnmt/experiment.hpp"

#include <sstream>
#include <stdexcept>

namespace docnmt {

std::vector<TokenSeq> encode_all(const BpeModel& bpe, std::span<const std::string> text) {
  std::vector<TokenSeq> out;
  out.reserve(text.size());
  for (const auto& s : text) out.push_back(bpe.encode(s));
  return out;
}

PreparedData prepare_data(std::span<const SubtitlePair> train, std::span<const SubtitlePair> dev,
                          const PrepareOptions& options, const BpeModel* src_bpe, const BpeModel* tgt_bpe) {
  PreparedData d;
  const auto clean = filter_pairs(train, options.min_overlap);
  if (clean.empty()) throw DataError("no training pairs survive the overlap filter");
  std::vector<std::string> src_text, tgt_text;
  for (const auto& p : clean) {
    src_text.push_back(p.src);
    tgt_text.push_back(p.tgt);
  }
  if ((src_bpe == nullptr) != (tgt_bpe == nullptr)) throw std::invalid_argument("give both BPE models or neither");
  d.src_bpe = src_bpe ? *src_bpe : BpeModel::train(src_text, options.src_merges);
  d.tgt_bpe = tgt_bpe ? *tgt_bpe : BpeModel::train(tgt_text, options.tgt_merges);
  const auto src_ids = encode_all(d.src_bpe, src_text);
  const auto tgt_ids = encode_all(d.tgt_bpe, tgt_text);
  for (std::size_t i = 0; i < clean.size(); ++i) d.base_train.push_back({src_ids[i], tgt_ids[i]});

  for (const auto& f : group_and_fragment(clean, options.fragments)) {
    CadecExample ex;
    const std::size_t n = f.size();
    ex.src = src_ids[f.source_index[n - 1]];
    ex.tgt = tgt_ids[f.source_index[n - 1]];
    const std::size_t from = n - 1 > options.max_context ? n - 1 - options.max_context : 0;
    for (std::size_t i = from; i + 1 < n; ++i) {
      ex.ctx_src.push_back(src_ids[f.source_index[i]]);
      ex.ctx_tgt.push_back(tgt_ids[f.source_index[i]]);
    }
    d.cadec_train.push_back(std::move(ex));
  }

  for (const auto& run : split_runs(filter_pairs(dev, options.min_overlap), options.fragments.max_gap_seconds)) {
    std::vector<std::string> s, t;
    for (const auto& p : run) {
      s.push_back(p.src);
      t.push_back(p.tgt);
    }
    d.dev_src.push_back(std::move(s));
    d.dev_tgt.push_back(std::move(t));
  }
  return d;
}

std::vector<std::vector<std::string>> translate_text_documents(const BaseModel& base, const CadecModel* cadec,
                                                               const BpeModel& src_bpe, const BpeModel& tgt_bpe,
                                                               const std::vector<std::vector<std::string>>& docs,
                                                               const TranslateOptions& options) {
  std::vector<std::vector<TokenSeq>> groups;
  for (const auto& doc : docs) groups.push_back(encode_all(src_bpe, doc));
  const auto out = translate_documents(base, cadec, groups, options);
  std::vector<std::vector<std::string>> text(out.size());
  for (std::size_t g = 0; g < out.size(); ++g)
    for (const auto& s : out[g]) text[g].push_back(tgt_bpe.decode(s));
  return text;
}

double document_bleu(const BaseModel& base, const CadecModel* cadec, const PreparedData& data,
                     const TranslateOptions& options, std::size_t limit) {
  const std::size_t n = limit ? std::min(limit, data.dev_src.size()) : data.dev_src.size();
  const std::vector<std::vector<std::string>> docs(data.dev_src.begin(), data.dev_src.begin() + static_cast<std::ptrdiff_t>(n));
  const auto hyp = translate_text_documents(base, cadec, data.src_bpe, data.tgt_bpe, docs, options);
  std::vector<std::string> cand, ref;
  for (std::size_t g = 0; g < n; ++g) {
    cand.insert(cand.end(), hyp[g].begin(), hyp[g].end());
    ref.insert(ref.end(), data.dev_tgt[g].begin(), data.dev_tgt[g].end());
  }
  return bleu(cand, ref);
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.model.n_layers = 2;
  c.model.n_heads = 4;
  c.model.d_model = 32;
  c.model.d_ff = 64;
  c.model.max_context = 3;
  c.model.max_len = 24;
  c.model.dropout = 0.1;
  for (TrainConfig* t : {&c.base_train, &c.cadec_train}) {
    t->batch_tokens = 256;
    t->max_steps = 3000;
    t->eval_every = 250;
    t->patience = 5;
    t->average_last = 5;
    t->adam.warmup_steps = 300;
    t->adam.scale = 0.1;
  }
  c.cadec_train.batch_tokens = 1024;  // counts context sources too
  c.cadec_train.seed = 2;
  return c;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  auto section = [&out](const std::string& name, const std::string& body) {
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) out << name << '.' << line << '\n';
  };
  section("model", model.to_text());
  section("base", base_train.to_text());
  section("cadec", cadec_train.to_text());
  std::ostringstream prep;
  prep << "min_overlap=" << prepare.min_overlap << "\nmax_gap=" << prepare.fragments.max_gap_seconds
       << "\nwindow=" << prepare.fragments.window << "\nsrc_merges=" << prepare.src_merges
       << "\ntgt_merges=" << prepare.tgt_merges << "\n";
  section("prepare", prep.str());
  std::ostringstream tr;
  tr << "beam=" << translate.beam_size << "\nmax_len=" << translate.max_len << "\ncontext=" << translate.context << "\n";
  section("translate", tr.str());
  std::ostringstream ex;
  ex << "dev_eval_docs=" << dev_eval_docs << "\ndev_eval_instances=" << dev_eval_instances << "\n";
  section("experiment", ex.str());
  return out.str();
}

void ExperimentConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto dot = line.find('.');
    const auto eq = line.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq)
      throw std::invalid_argument("expected section.key=value, got: " + line);
    const std::string sec = line.substr(0, dot);
    const std::string kv = line.substr(dot + 1);
    const std::string key = line.substr(dot + 1, eq - dot - 1);
    const std::string val = line.substr(eq + 1);
    if (sec == "model") {
      model = ModelConfig::from_text(model.to_text() + kv + "\n");
    } else if (sec == "base") {
      base_train.apply_text(kv);
    } else if (sec == "cadec") {
      cadec_train.apply_text(kv);
    } else if (sec == "prepare") {
      if (key == "min_overlap") prepare.min_overlap = std::stod(val);
      else if (key == "max_gap") prepare.fragments.max_gap_seconds = std::stod(val);
      else if (key == "window") prepare.fragments.window = std::stoul(val);
      else if (key == "src_merges") prepare.src_merges = std::stoul(val);
      else if (key == "tgt_merges") prepare.tgt_merges = std::stoul(val);
      else throw std::invalid_argument("unknown prepare key: " + key);
    } else if (sec == "translate") {
      if (key == "beam") translate.beam_size = std::stoul(val);
      else if (key == "max_len") translate.max_len = std::stoul(val);
      else if (key == "context") translate.context = std::stoul(val);
      else throw std::invalid_argument("unknown translate key: " + key);
    } else if (sec == "experiment") {
      if (key == "dev_eval_docs") dev_eval_docs = std::stoul(val);
      else if (key == "dev_eval_instances") dev_eval_instances = std::stoul(val);
      else throw std::invalid_argument("unknown experiment key: " + key);
    } else {
      throw std::invalid_argument("unknown config section: " + sec);
    }
  }
  prepare.max_context = model.max_context;
}

ModelConfig sized_config(const ModelConfig& model, const PreparedData& data) {
  ModelConfig c = model;
  c.src_vocab = data.src_bpe.vocab_size();
  c.tgt_vocab = data.tgt_bpe.vocab_size();
  c.validate();
  return c;
}

BaseModel train_base_model(const PreparedData& data, const ExperimentConfig& config, MetricLog& log,
                           TrainResult* result) {
  BaseModel base(sized_config(config.model, data), config.base_train.seed);
  DevEvaluator eval = [&] {
    DevMetrics m;
    m.bleu = document_bleu(base, nullptr, data, config.translate, config.dev_eval_docs);
    return m;
  };
  const TrainResult r = train_base(base, data.base_train, config.base_train, eval, log);
  if (result) *result = r;
  return base;
}

ConsistencyReport contrastive_report(const BaseModel& base, const CadecModel* cadec, const PreparedData& data,
                                     std::span<const ContrastiveInstance> instances, const TranslateOptions& options) {
  ModelScorer scorer(base, cadec, data.src_bpe, data.tgt_bpe, options);
  const auto scores = scorer.score_all(instances);
  return consistency_report(instances, scores);
}

CadecModel train_cadec_model(const BaseModel& base, const PreparedData& data,
                             std::span<const ContrastiveInstance> dev_contrastive, const ExperimentConfig& config,
                             MetricLog& log, TrainResult* result) {
  CadecModel cadec(base.config(), config.cadec_train.seed);
  const auto dev_subset = dev_contrastive.first(std::min(dev_contrastive.size(), config.dev_eval_instances));
  DevEvaluator eval = [&] {
    DevMetrics m;
    m.bleu = document_bleu(base, &cadec, data, config.translate, config.dev_eval_docs);
    if (!dev_subset.empty()) m.consistency = contrastive_report(base, &cadec, data, dev_subset, config.translate).accuracy();
    return m;
  };
  const TrainResult r = train_cadec(base, cadec, data.cadec_train, config.cadec_train, eval, log);
  if (result) *result = r;
  return cadec;
}

}  // namespace docnmt
