#include "docnmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "docnmt/bpe.hpp"

namespace docnmt {

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::transformer_base() {
  ModelConfig c;
  c.n_layers = 6;
  c.n_heads = 8;
  c.d_model = 512;
  c.d_ff = 2048;
  c.dropout = 0.1;
  return c;
}

void ModelConfig::validate() const {
  if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_ff == 0) throw std::invalid_argument("model sizes must be positive");
  if (d_model % n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
  if (src_vocab <= static_cast<std::size_t>(kNumSpecials) || tgt_vocab <= static_cast<std::size_t>(kNumSpecials))
    throw std::invalid_argument("vocabulary sizes must exceed the special symbols");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "n_layers=" << n_layers << "\nn_heads=" << n_heads << "\nd_model=" << d_model << "\nd_ff=" << d_ff
      << "\nmax_context=" << max_context << "\nsrc_vocab=" << src_vocab << "\ntgt_vocab=" << tgt_vocab
      << "\nmax_len=" << max_len << "\ndropout=" << dropout << "\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "n_layers") c.n_layers = std::stoul(val);
    else if (key == "n_heads") c.n_heads = std::stoul(val);
    else if (key == "d_model") c.d_model = std::stoul(val);
    else if (key == "d_ff") c.d_ff = std::stoul(val);
    else if (key == "max_context") c.max_context = std::stoul(val);
    else if (key == "src_vocab") c.src_vocab = std::stoul(val);
    else if (key == "tgt_vocab") c.tgt_vocab = std::stoul(val);
    else if (key == "max_len") c.max_len = std::stoul(val);
    else if (key == "dropout") c.dropout = std::stod(val);
    else throw std::invalid_argument("unknown model config key: " + key);
  }
  return c;
}

std::string ModelConfig::fingerprint() const {
  std::ostringstream out;
  out << "N" << n_layers << "-h" << n_heads << "-d" << d_model << "-ff" << d_ff << "-C" << max_context << "-vs"
      << src_vocab << "-vt" << tgt_vocab << "-len" << max_len;
  return out.str();
}

bool operator==(const ModelConfig& a, const ModelConfig& b) { return a.to_text() == b.to_text(); }

PaddedBatch pad_batch(const std::vector<TokenSeq>& seqs) {
  PaddedBatch b;
  b.batch = seqs.size();
  for (const auto& s : seqs) b.length = std::max(b.length, s.size());
  if (b.batch == 0 || b.length == 0) throw std::invalid_argument("cannot pad an empty batch or empty sequences");
  b.ids.assign(b.batch * b.length, kPadId);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].empty()) throw std::invalid_argument("empty sequence in batch");
    std::copy(seqs[i].begin(), seqs[i].end(), b.ids.begin() + static_cast<std::ptrdiff_t>(i * b.length));
    b.lengths.push_back(seqs[i].size());
  }
  return b;
}

namespace {

// ---------------------------------------------------------------------------
// Building blocks

void init_matrix(ParameterSet& p, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(in * out);
  for (double& x : v) x = dist(rng);
  p.add(name, Tensor::from_data({in, out}, std::move(v), true));
}

void init_vector(ParameterSet& p, const std::string& name, std::size_t n, double value) {
  p.add(name, Tensor::full({n}, value, true));
}

void init_embedding(ParameterSet& p, const std::string& name, std::size_t vocab, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> v(vocab * d);
  for (double& x : v) x = dist(rng);
  p.add(name, Tensor::from_data({vocab, d}, std::move(v), true));
}

void init_attention(ParameterSet& p, const std::string& prefix, std::size_t d_query, std::size_t d_memory,
                    std::size_t d_model, std::mt19937_64& rng) {
  init_matrix(p, prefix + ".wq", d_query, d_model, rng);
  init_vector(p, prefix + ".bq", d_model, 0.0);
  init_matrix(p, prefix + ".wk", d_memory, d_model, rng);
  init_vector(p, prefix + ".bk", d_model, 0.0);
  init_matrix(p, prefix + ".wv", d_memory, d_model, rng);
  init_vector(p, prefix + ".bv", d_model, 0.0);
  init_matrix(p, prefix + ".wo", d_model, d_model, rng);
  init_vector(p, prefix + ".bo", d_model, 0.0);
}

void init_norm(ParameterSet& p, const std::string& prefix, std::size_t d) {
  init_vector(p, prefix + ".g", d, 1.0);
  init_vector(p, prefix + ".b", d, 0.0);
}

void init_ffn(ParameterSet& p, const std::string& prefix, std::size_t d, std::size_t d_ff, std::mt19937_64& rng) {
  init_matrix(p, prefix + ".w1", d, d_ff, rng);
  init_vector(p, prefix + ".b1", d_ff, 0.0);
  init_matrix(p, prefix + ".w2", d_ff, d, rng);
  init_vector(p, prefix + ".b2", d, 0.0);
}

Tensor linear(const Tensor& x, const ParameterSet& p, const std::string& w, const std::string& b) {
  return add_bias(matmul(x, p.at(w)), p.at(b));
}

Tensor norm(const Tensor& x, const ParameterSet& p, const std::string& prefix) {
  return layer_norm(x, p.at(prefix + ".g"), p.at(prefix + ".b"));
}

Tensor ffn(const Tensor& x, const ParameterSet& p, const std::string& prefix) {
  return linear(relu(linear(x, p, prefix + ".w1", prefix + ".b1")), p, prefix + ".w2", prefix + ".b2");
}

Tensor maybe_dropout(const Tensor& x, double rate, const ForwardOptions& opt) {
  if (!opt.dropout_rng || rate <= 0.0) return x;
  return dropout(x, rate, *opt.dropout_rng);
}

// [B, L, d] -> [B, h, L, d/h]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.size(0), l = x.size(1), d = x.size(2);
  return permute(reshape(x, {b, l, heads, d / heads}), {0, 2, 1, 3});
}

// [B, h, L, dk] -> [B, L, h*dk]
Tensor merge_heads(const Tensor& x) {
  const std::size_t b = x.size(0), h = x.size(1), l = x.size(2), dk = x.size(3);
  return reshape(permute(x, {0, 2, 1, 3}), {b, l, h * dk});
}

struct KeyValue {
  Tensor k;  // [B, h, Lk, dk]
  Tensor v;
};

KeyValue project_kv(const ParameterSet& p, const std::string& prefix, const Tensor& memory, std::size_t heads) {
  return {split_heads(linear(memory, p, prefix + ".wk", prefix + ".bk"), heads),
          split_heads(linear(memory, p, prefix + ".wv", prefix + ".bv"), heads)};
}

// mask: [B, Lq, Lk], nonzero = blocked.
Tensor attend(const ParameterSet& p, const std::string& prefix, const Tensor& query_in, const KeyValue& kv,
              const std::vector<std::uint8_t>& mask, std::size_t heads, const ForwardOptions& opt) {
  const std::size_t b = query_in.size(0);
  const std::size_t lq = query_in.size(1);
  const std::size_t lk = kv.k.size(2);
  const std::size_t dk = kv.k.size(3);
  Tensor q = split_heads(linear(query_in, p, prefix + ".wq", prefix + ".bq"), heads);
  Tensor scores = scale(matmul(q, kv.k, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(dk)));
  std::vector<std::uint8_t> full(b * heads * lq * lk);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      std::copy_n(mask.begin() + static_cast<std::ptrdiff_t>(i * lq * lk), lq * lk,
                  full.begin() + static_cast<std::ptrdiff_t>((i * heads + h) * lq * lk));
  Tensor weights = softmax(masked_fill(scores, full, -1e9), 3);
  if (opt.attention_log) opt.attention_log->push_back(weights);
  return linear(merge_heads(matmul(weights, kv.v)), p, prefix + ".wo", prefix + ".bo");
}

std::vector<std::uint8_t> key_mask(std::size_t b, std::size_t lq, std::size_t lk,
                                   const std::vector<std::size_t>& key_lengths, bool causal,
                                   std::size_t query_offset = 0) {
  std::vector<std::uint8_t> m(b * lq * lk, 0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t q = 0; q < lq; ++q)
      for (std::size_t k = 0; k < lk; ++k) {
        const bool blocked = k >= key_lengths[i] || (causal && k > q + query_offset);
        m[(i * lq + q) * lk + k] = blocked ? 1 : 0;
      }
  return m;
}

Tensor positional_encoding(std::size_t b, std::size_t l, std::size_t d, std::size_t offset = 0) {
  std::vector<double> pe(b * l * d);
  for (std::size_t pos = 0; pos < l; ++pos)
    for (std::size_t j = 0; j < d; ++j) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos + offset) * rate;
      const double v = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
      for (std::size_t i = 0; i < b; ++i) pe[(i * l + pos) * d + j] = v;
    }
  return Tensor::from_data({b, l, d}, std::move(pe));
}

Tensor embed(const Tensor& table, const std::vector<int>& ids, std::size_t b, std::size_t l, std::size_t offset = 0) {
  const std::size_t d = table.size(1);
  Tensor x = scale(embedding(table, ids, {b, l}), std::sqrt(static_cast<double>(d)));
  return add(x, positional_encoding(b, l, d, offset));
}

void check_ids(const PaddedBatch& batch, std::size_t vocab, std::size_t max_len, const char* side) {
  if (batch.length > max_len + 1) {
    throw std::invalid_argument(std::string(side) + " sequence of length " + std::to_string(batch.length) +
                                " exceeds max_len " + std::to_string(max_len));
  }
  for (int id : batch.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw std::out_of_range(std::string(side) + " token id " + std::to_string(id) + " outside vocabulary");
}

Tensor rows_to_batch(const Tensor& x) {
  // [B, 1, V] -> [B, V]
  return reshape(x, {x.size(0), x.size(2)});
}

std::string layer_name(const char* stack, std::size_t i) { return std::string(stack) + "." + std::to_string(i); }

void check_params(const ParameterSet& expected, const ParameterSet& given) {
  if (expected.size() != given.size()) {
    throw CheckpointError("parameter count " + std::to_string(given.size()) + " does not match model (" +
                          std::to_string(expected.size()) + ")");
  }
  for (const auto& [name, t] : expected) {
    if (!given.contains(name)) throw CheckpointError("checkpoint lacks parameter " + name);
    if (given.at(name).shape() != t.shape()) throw CheckpointError("shape mismatch for parameter " + name);
  }
}

ParameterSet base_parameters(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  ParameterSet p;
  const std::size_t d = c.d_model;
  init_embedding(p, "src_emb", c.src_vocab, d, rng);
  init_embedding(p, "tgt_emb", c.tgt_vocab, d, rng);
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const std::string e = layer_name("enc", i);
    init_norm(p, e + ".ln1", d);
    init_attention(p, e + ".self", d, d, d, rng);
    init_norm(p, e + ".ln2", d);
    init_ffn(p, e + ".ff", d, c.d_ff, rng);
  }
  init_norm(p, "enc.ln", d);
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const std::string l = layer_name("dec", i);
    init_norm(p, l + ".ln1", d);
    init_attention(p, l + ".self", d, d, d, rng);
    init_norm(p, l + ".ln2", d);
    init_attention(p, l + ".cross", d, d, d, rng);
    init_norm(p, l + ".ln3", d);
    init_ffn(p, l + ".ff", d, c.d_ff, rng);
  }
  init_norm(p, "dec.ln", d);
  init_matrix(p, "out.w", d, c.tgt_vocab, rng);
  init_vector(p, "out.b", c.tgt_vocab, 0.0);
  return p;
}

ParameterSet cadec_parameters(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  ParameterSet p;
  const std::size_t d = c.d_model;
  const std::size_t enc_width = d + c.distance_dims();
  const std::size_t dec_width = 2 * d + c.distance_dims();
  init_embedding(p, "cadec.emb", c.tgt_vocab, d, rng);
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const std::string l = layer_name("cadec", i);
    init_norm(p, l + ".ln1", d);
    init_attention(p, l + ".self", d, d, d, rng);
    init_norm(p, l + ".ln2", d);
    init_attention(p, l + ".src", d, enc_width, d, rng);
    init_norm(p, l + ".ln3", d);
    init_attention(p, l + ".base", d, dec_width, d, rng);
    init_norm(p, l + ".ln4", d);
    init_ffn(p, l + ".ff", d, c.d_ff, rng);
  }
  init_norm(p, "cadec.ln", d);
  init_matrix(p, "cadec.out.w", d, c.tgt_vocab, rng);
  init_vector(p, "cadec.out.b", c.tgt_vocab, 0.0);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// BaseModel

BaseModel::BaseModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), params_(base_parameters(config, seed)) {}

BaseModel::BaseModel(const ModelConfig& config, ParameterSet params) : config_(config) {
  check_params(base_parameters(config, 0), params);
  params_ = std::move(params);
}

EncoderOutput BaseModel::encode(const std::vector<TokenSeq>& src, const ForwardOptions& opt) const {
  const PaddedBatch batch = pad_batch(src);
  check_ids(batch, config_.src_vocab, config_.max_len, "source");
  const std::size_t h = config_.n_heads;
  Tensor x = maybe_dropout(embed(params_.at("src_emb"), batch.ids, batch.batch, batch.length), config_.dropout, opt);
  const auto mask = key_mask(batch.batch, batch.length, batch.length, batch.lengths, false);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string e = layer_name("enc", i);
    Tensor hn = norm(x, params_, e + ".ln1");
    x = add(x, maybe_dropout(attend(params_, e + ".self", hn, project_kv(params_, e + ".self", hn, h), mask, h, opt),
                             config_.dropout, opt));
    x = add(x, maybe_dropout(ffn(norm(x, params_, e + ".ln2"), params_, e + ".ff"), config_.dropout, opt));
  }
  return {norm(x, params_, "enc.ln"), batch.lengths};
}

Tensor BaseModel::decode_states(const EncoderOutput& enc, const std::vector<TokenSeq>& tgt_in,
                                const ForwardOptions& opt) const {
  const PaddedBatch batch = pad_batch(tgt_in);
  check_ids(batch, config_.tgt_vocab, config_.max_len, "target");
  if (batch.batch != enc.states.size(0)) throw ShapeError("source and target batch sizes differ");
  const std::size_t h = config_.n_heads;
  const std::size_t ls = enc.states.size(1);
  Tensor x = maybe_dropout(embed(params_.at("tgt_emb"), batch.ids, batch.batch, batch.length), config_.dropout, opt);
  const auto self_mask = key_mask(batch.batch, batch.length, batch.length, batch.lengths, true);
  const auto cross_mask = key_mask(batch.batch, batch.length, ls, enc.lengths, false);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string l = layer_name("dec", i);
    Tensor hn = norm(x, params_, l + ".ln1");
    x = add(x, maybe_dropout(attend(params_, l + ".self", hn, project_kv(params_, l + ".self", hn, h), self_mask, h, opt),
                             config_.dropout, opt));
    hn = norm(x, params_, l + ".ln2");
    x = add(x, maybe_dropout(attend(params_, l + ".cross", hn, project_kv(params_, l + ".cross", enc.states, h),
                                    cross_mask, h, opt),
                             config_.dropout, opt));
    x = add(x, maybe_dropout(ffn(norm(x, params_, l + ".ln3"), params_, l + ".ff"), config_.dropout, opt));
  }
  return norm(x, params_, "dec.ln");
}

Tensor BaseModel::logits(const Tensor& states) const { return linear(states, params_, "out.w", "out.b"); }

Tensor BaseModel::forward_logits(const std::vector<TokenSeq>& src, const std::vector<TokenSeq>& tgt_in,
                                 const ForwardOptions& opt) const {
  return logits(decode_states(encode(src, opt), tgt_in, opt));
}

namespace {

class BaseSession final : public DecoderSession {
 public:
  BaseSession(const BaseModel& model, const EncoderOutput& enc) : model_(model), src_lengths_(enc.lengths) {
    NoGradGuard ng;
    const auto& p = model_.params();
    const std::size_t h = model_.config().n_heads;
    for (std::size_t i = 0; i < model_.config().n_layers; ++i)
      cross_.push_back(project_kv(p, layer_name("dec", i) + ".cross", enc.states, h));
    self_.resize(model_.config().n_layers);
  }

  Tensor step(const std::vector<int>& tokens) override {
    NoGradGuard ng;
    const auto& c = model_.config();
    const auto& p = model_.params();
    const std::size_t b = tokens.size();
    if (b != src_lengths_.size()) throw ShapeError("session row count mismatch");
    for (int t : tokens)
      if (t < 0 || static_cast<std::size_t>(t) >= c.tgt_vocab) throw std::out_of_range("token outside vocabulary");
    Tensor x = embed(p.at("tgt_emb"), tokens, b, 1, pos_);
    const std::vector<std::size_t> self_len(b, pos_ + 1);
    const auto self_mask = key_mask(b, 1, pos_ + 1, self_len, false);
    const auto cross_mask = key_mask(b, 1, cross_[0].k.size(2), src_lengths_, false);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
      const std::string l = layer_name("dec", i);
      Tensor hn = norm(x, p, l + ".ln1");
      KeyValue fresh = project_kv(p, l + ".self", hn, c.n_heads);
      if (self_[i].k.defined()) {
        const Tensor ks[] = {self_[i].k, fresh.k};
        const Tensor vs[] = {self_[i].v, fresh.v};
        self_[i] = {concat(ks, 2), concat(vs, 2)};
      } else {
        self_[i] = fresh;
      }
      x = add(x, attend(p, l + ".self", hn, self_[i], self_mask, c.n_heads, {}));
      x = add(x, attend(p, l + ".cross", norm(x, p, l + ".ln2"), cross_[i], cross_mask, c.n_heads, {}));
      x = add(x, ffn(norm(x, p, l + ".ln3"), p, l + ".ff"));
    }
    ++pos_;
    return rows_to_batch(log_softmax(model_.logits(norm(x, p, "dec.ln"))));
  }

  void reorder(const std::vector<std::size_t>& rows) override {
    NoGradGuard ng;
    for (auto& kv : cross_) kv = {index_select(kv.k, 0, rows), index_select(kv.v, 0, rows)};
    for (auto& kv : self_)
      if (kv.k.defined()) kv = {index_select(kv.k, 0, rows), index_select(kv.v, 0, rows)};
    std::vector<std::size_t> lengths;
    for (std::size_t r : rows) lengths.push_back(src_lengths_.at(r));
    src_lengths_ = std::move(lengths);
  }

  std::size_t rows() const override { return src_lengths_.size(); }

 private:
  const BaseModel& model_;
  std::vector<std::size_t> src_lengths_;
  std::vector<KeyValue> cross_;
  std::vector<KeyValue> self_;
  std::size_t pos_ = 0;
};

}  // namespace

std::unique_ptr<DecoderSession> BaseModel::start_session(const EncoderOutput& enc) const {
  return std::make_unique<BaseSession>(*this, enc);
}

Tensor base_forward(const BaseModel& model, const TokenSeq& src, const TokenSeq& tgt) {
  TokenSeq tgt_in{kBosId};
  tgt_in.insert(tgt_in.end(), tgt.begin(), tgt.end());
  Tensor logits = model.forward_logits({src}, {tgt_in});
  return reshape(log_softmax(logits), {tgt_in.size(), model.config().tgt_vocab});
}

// ---------------------------------------------------------------------------
// Base representations for CADec

namespace {

Tensor row_block(const Tensor& batched, std::size_t row, std::size_t len) {
  // [B, L, d] -> rows [len, d] of batch entry `row`
  const std::size_t l = batched.size(1);
  const std::size_t d = batched.size(2);
  auto src = batched.data().subspan(row * l * d, len * d);
  return Tensor::from_data({len, d}, std::vector<double>(src.begin(), src.end()));
}

}  // namespace

std::vector<Tensor> base_decoder_representations(const BaseModel& base, const std::vector<TokenSeq>& src,
                                                 const std::vector<TokenSeq>& tgt) {
  NoGradGuard ng;
  if (src.size() != tgt.size()) throw std::invalid_argument("source/target count mismatch");
  if (src.empty()) return {};
  const EncoderOutput enc = base.encode(src);
  std::vector<TokenSeq> tgt_in;
  for (const auto& t : tgt) {
    TokenSeq in{kBosId};
    in.insert(in.end(), t.begin(), t.end());
    tgt_in.push_back(std::move(in));
  }
  const Tensor states = base.decode_states(enc, tgt_in);
  const std::size_t d = base.config().d_model;
  const auto emb = base.target_embedding().data();
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < tgt_in.size(); ++i) {
    const std::size_t len = tgt_in[i].size();
    const Tensor st = row_block(states, i, len);
    std::vector<double> rep(len * 2 * d);
    for (std::size_t t = 0; t < len; ++t) {
      std::copy_n(st.data().data() + t * d, d, rep.data() + t * 2 * d);
      std::copy_n(emb.data() + static_cast<std::size_t>(tgt_in[i][t]) * d, d, rep.data() + t * 2 * d + d);
    }
    out.push_back(Tensor::from_data({len, 2 * d}, std::move(rep)));
  }
  return out;
}

Tensor BaseRepresentationCache::encoder_states(const TokenSeq& src) {
  prefetch_encoder({src});
  return enc_.at(src);
}

Tensor BaseRepresentationCache::decoder_states(const TokenSeq& src, const TokenSeq& tgt) {
  prefetch_decoder({{src, tgt}});
  return dec_.at({src, tgt});
}

void BaseRepresentationCache::prefetch_encoder(const std::vector<TokenSeq>& srcs) {
  std::vector<TokenSeq> missing;
  for (const auto& s : srcs)
    if (!enc_.count(s) && std::find(missing.begin(), missing.end(), s) == missing.end()) missing.push_back(s);
  if (missing.empty()) return;
  NoGradGuard ng;
  const EncoderOutput enc = base_->encode(missing);
  for (std::size_t i = 0; i < missing.size(); ++i) enc_[missing[i]] = row_block(enc.states, i, missing[i].size());
}

void BaseRepresentationCache::prefetch_decoder(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs) {
  std::vector<TokenSeq> src;
  std::vector<TokenSeq> tgt;
  for (const auto& p : pairs) {
    if (dec_.count(p)) continue;
    bool dup = false;
    for (std::size_t i = 0; i < src.size() && !dup; ++i) dup = src[i] == p.first && tgt[i] == p.second;
    if (dup) continue;
    src.push_back(p.first);
    tgt.push_back(p.second);
  }
  if (src.empty()) return;
  auto reps = base_decoder_representations(*base_, src, tgt);
  for (std::size_t i = 0; i < src.size(); ++i) dec_[{src[i], tgt[i]}] = std::move(reps[i]);
}

void BaseRepresentationCache::clear() {
  enc_.clear();
  dec_.clear();
}

namespace {

// Concatenates [len, width] blocks with a distance one-hot appended to every
// row, padded to the longest example. Returns [B, M, width + C + 1].
Tensor pack_memory(const std::vector<std::vector<std::pair<Tensor, std::size_t>>>& blocks, std::size_t width,
                   std::size_t distance_dims, std::vector<std::size_t>& lengths) {
  lengths.clear();
  std::size_t max_rows = 0;
  for (const auto& ex : blocks) {
    std::size_t rows = 0;
    for (const auto& [t, dist] : ex) rows += t.size(0);
    lengths.push_back(rows);
    max_rows = std::max(max_rows, rows);
  }
  const std::size_t full = width + distance_dims;
  std::vector<double> data(blocks.size() * max_rows * full, 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::size_t row = 0;
    for (const auto& [t, dist] : blocks[b]) {
      const auto src = t.data();
      for (std::size_t r = 0; r < t.size(0); ++r, ++row) {
        double* dst = data.data() + (b * max_rows + row) * full;
        std::copy_n(src.data() + r * width, width, dst);
        dst[width + dist] = 1.0;
      }
    }
  }
  return Tensor::from_data({blocks.size(), max_rows, full}, std::move(data));
}

}  // namespace

CadecMemory build_cadec_memory(const BaseModel& base, BaseRepresentationCache& cache,
                               const std::vector<CadecInput>& inputs, bool cache_first_pass) {
  const auto& c = base.config();
  std::vector<TokenSeq> all_src;
  std::vector<std::pair<TokenSeq, TokenSeq>> ctx_pairs;
  std::vector<TokenSeq> fp_src;
  std::vector<TokenSeq> fp_tgt;
  for (const auto& in : inputs) {
    if (in.ctx_src.size() != in.ctx_tgt.size()) throw std::invalid_argument("context sources and translations differ in count");
    if (in.ctx_src.size() > c.max_context) {
      throw std::invalid_argument("context of " + std::to_string(in.ctx_src.size()) +
                                  " sentences exceeds max_context " + std::to_string(c.max_context));
    }
    all_src.push_back(in.src);
    for (std::size_t i = 0; i < in.ctx_src.size(); ++i) {
      all_src.push_back(in.ctx_src[i]);
      ctx_pairs.emplace_back(in.ctx_src[i], in.ctx_tgt[i]);
    }
    if (cache_first_pass) {
      ctx_pairs.emplace_back(in.src, in.first_pass);
    } else {
      fp_src.push_back(in.src);
      fp_tgt.push_back(in.first_pass);
    }
  }
  cache.prefetch_encoder(all_src);
  cache.prefetch_decoder(ctx_pairs);
  const auto fresh = base_decoder_representations(base, fp_src, fp_tgt);

  std::vector<std::vector<std::pair<Tensor, std::size_t>>> enc_blocks;
  std::vector<std::vector<std::pair<Tensor, std::size_t>>> dec_blocks;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const auto& in = inputs[b];
    const std::size_t k = in.ctx_src.size();
    std::vector<std::pair<Tensor, std::size_t>> enc{{cache.encoder_states(in.src), 0}};
    std::vector<std::pair<Tensor, std::size_t>> dec{
        {cache_first_pass ? cache.decoder_states(in.src, in.first_pass) : fresh[b], 0}};
    for (std::size_t i = 0; i < k; ++i) {
      enc.emplace_back(cache.encoder_states(in.ctx_src[i]), k - i);
      dec.emplace_back(cache.decoder_states(in.ctx_src[i], in.ctx_tgt[i]), k - i);
    }
    enc_blocks.push_back(std::move(enc));
    dec_blocks.push_back(std::move(dec));
  }
  CadecMemory mem;
  mem.enc = pack_memory(enc_blocks, c.d_model, c.distance_dims(), mem.enc_lengths);
  mem.dec = pack_memory(dec_blocks, 2 * c.d_model, c.distance_dims(), mem.dec_lengths);
  return mem;
}

// ---------------------------------------------------------------------------
// CadecModel

CadecModel::CadecModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), params_(cadec_parameters(config, seed)) {}

CadecModel::CadecModel(const ModelConfig& config, ParameterSet params) : config_(config) {
  check_params(cadec_parameters(config, 0), params);
  params_ = std::move(params);
}

Tensor CadecModel::forward_logits(const CadecMemory& memory, const std::vector<TokenSeq>& tgt_in,
                                  const ForwardOptions& opt) const {
  const PaddedBatch batch = pad_batch(tgt_in);
  check_ids(batch, config_.tgt_vocab, config_.max_len, "target");
  const std::size_t b = batch.batch;
  if (memory.enc.size(0) != b || memory.dec.size(0) != b) throw ShapeError("memory batch size mismatch");
  const std::size_t h = config_.n_heads;
  const std::size_t l = batch.length;
  Tensor x = maybe_dropout(embed(params_.at("cadec.emb"), batch.ids, b, l), config_.dropout, opt);
  const auto self_mask = key_mask(b, l, l, batch.lengths, true);
  const auto enc_mask = key_mask(b, l, memory.enc.size(1), memory.enc_lengths, false);
  const auto dec_mask = key_mask(b, l, memory.dec.size(1), memory.dec_lengths, false);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string n = layer_name("cadec", i);
    Tensor hn = norm(x, params_, n + ".ln1");
    x = add(x, maybe_dropout(attend(params_, n + ".self", hn, project_kv(params_, n + ".self", hn, h), self_mask, h, opt),
                             config_.dropout, opt));
    hn = norm(x, params_, n + ".ln2");
    x = add(x, maybe_dropout(attend(params_, n + ".src", hn, project_kv(params_, n + ".src", memory.enc, h), enc_mask,
                                    h, opt),
                             config_.dropout, opt));
    hn = norm(x, params_, n + ".ln3");
    x = add(x, maybe_dropout(attend(params_, n + ".base", hn, project_kv(params_, n + ".base", memory.dec, h),
                                    dec_mask, h, opt),
                             config_.dropout, opt));
    x = add(x, maybe_dropout(ffn(norm(x, params_, n + ".ln4"), params_, n + ".ff"), config_.dropout, opt));
  }
  return linear(norm(x, params_, "cadec.ln"), params_, "cadec.out.w", "cadec.out.b");
}

namespace {

class CadecSession final : public DecoderSession {
 public:
  CadecSession(const CadecModel& model, const CadecMemory& memory)
      : model_(model), enc_lengths_(memory.enc_lengths), dec_lengths_(memory.dec_lengths) {
    NoGradGuard ng;
    const auto& p = model_.params();
    const std::size_t h = model_.config().n_heads;
    for (std::size_t i = 0; i < model_.config().n_layers; ++i) {
      const std::string n = layer_name("cadec", i);
      src_.push_back(project_kv(p, n + ".src", memory.enc, h));
      base_.push_back(project_kv(p, n + ".base", memory.dec, h));
    }
    self_.resize(model_.config().n_layers);
  }

  Tensor step(const std::vector<int>& tokens) override {
    NoGradGuard ng;
    const auto& c = model_.config();
    const auto& p = model_.params();
    const std::size_t b = tokens.size();
    if (b != enc_lengths_.size()) throw ShapeError("session row count mismatch");
    for (int t : tokens)
      if (t < 0 || static_cast<std::size_t>(t) >= c.tgt_vocab) throw std::out_of_range("token outside vocabulary");
    Tensor x = embed(p.at("cadec.emb"), tokens, b, 1, pos_);
    const std::vector<std::size_t> self_len(b, pos_ + 1);
    const auto self_mask = key_mask(b, 1, pos_ + 1, self_len, false);
    const auto enc_mask = key_mask(b, 1, src_[0].k.size(2), enc_lengths_, false);
    const auto dec_mask = key_mask(b, 1, base_[0].k.size(2), dec_lengths_, false);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
      const std::string n = layer_name("cadec", i);
      Tensor hn = norm(x, p, n + ".ln1");
      KeyValue fresh = project_kv(p, n + ".self", hn, c.n_heads);
      if (self_[i].k.defined()) {
        const Tensor ks[] = {self_[i].k, fresh.k};
        const Tensor vs[] = {self_[i].v, fresh.v};
        self_[i] = {concat(ks, 2), concat(vs, 2)};
      } else {
        self_[i] = fresh;
      }
      x = add(x, attend(p, n + ".self", hn, self_[i], self_mask, c.n_heads, {}));
      x = add(x, attend(p, n + ".src", norm(x, p, n + ".ln2"), src_[i], enc_mask, c.n_heads, {}));
      x = add(x, attend(p, n + ".base", norm(x, p, n + ".ln3"), base_[i], dec_mask, c.n_heads, {}));
      x = add(x, ffn(norm(x, p, n + ".ln4"), p, n + ".ff"));
    }
    ++pos_;
    return rows_to_batch(log_softmax(linear(norm(x, p, "cadec.ln"), p, "cadec.out.w", "cadec.out.b")));
  }

  void reorder(const std::vector<std::size_t>& rows) override {
    NoGradGuard ng;
    auto pick = [&rows](KeyValue& kv) {
      if (kv.k.defined()) kv = {index_select(kv.k, 0, rows), index_select(kv.v, 0, rows)};
    };
    for (auto& kv : src_) pick(kv);
    for (auto& kv : base_) pick(kv);
    for (auto& kv : self_) pick(kv);
    std::vector<std::size_t> enc_len;
    std::vector<std::size_t> dec_len;
    for (std::size_t r : rows) {
      enc_len.push_back(enc_lengths_.at(r));
      dec_len.push_back(dec_lengths_.at(r));
    }
    enc_lengths_ = std::move(enc_len);
    dec_lengths_ = std::move(dec_len);
  }

  std::size_t rows() const override { return enc_lengths_.size(); }

 private:
  const CadecModel& model_;
  std::vector<std::size_t> enc_lengths_;
  std::vector<std::size_t> dec_lengths_;
  std::vector<KeyValue> src_;
  std::vector<KeyValue> base_;
  std::vector<KeyValue> self_;
  std::size_t pos_ = 0;
};

}  // namespace

std::unique_ptr<DecoderSession> CadecModel::start_session(const CadecMemory& memory) const {
  return std::make_unique<CadecSession>(*this, memory);
}

Tensor cadec_forward(const BaseModel& base, const CadecModel& cadec, const CadecInput& input, const TokenSeq& tgt,
                     BaseRepresentationCache* cache) {
  BaseRepresentationCache local(base);
  BaseRepresentationCache& c = cache ? *cache : local;
  const CadecMemory memory = build_cadec_memory(base, c, {input});
  TokenSeq tgt_in{kBosId};
  tgt_in.insert(tgt_in.end(), tgt.begin(), tgt.end());
  Tensor logits = cadec.forward_logits(memory, {tgt_in});
  return reshape(log_softmax(logits), {tgt_in.size(), cadec.config().tgt_vocab});
}

// ---------------------------------------------------------------------------
// Sampling

int sample_from_log_probs(std::span<const double> log_probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t j = 0; j < log_probs.size(); ++j) {
    const double p = std::exp(log_probs[j]);
    if (p > 0.0) last_positive = static_cast<int>(j);
    acc += p;
    if (u < acc) return static_cast<int>(j);
  }
  return last_positive;
}

std::vector<TokenSeq> sample_translations(const BaseModel& base, const std::vector<TokenSeq>& src,
                                          std::vector<std::mt19937_64>& rngs, std::size_t max_len) {
  if (rngs.size() != src.size()) throw std::invalid_argument("one rng per source sentence required");
  NoGradGuard ng;
  const EncoderOutput enc = base.encode(src);
  auto session = base.start_session(enc);
  const std::size_t b = src.size();
  const std::size_t v = base.config().tgt_vocab;
  std::vector<TokenSeq> out(b);
  std::vector<bool> done(b, false);
  std::vector<int> feed(b, kBosId);
  for (std::size_t t = 0; t < max_len; ++t) {
    const Tensor lp = session->step(feed);
    bool all_done = true;
    for (std::size_t i = 0; i < b; ++i) {
      if (done[i]) {
        feed[i] = kEosId;
        continue;
      }
      const int tok = sample_from_log_probs(lp.data().subspan(i * v, v), rngs[i]);
      if (tok == kEosId) {
        done[i] = true;
      } else {
        out[i].push_back(tok);
        all_done = false;
      }
      feed[i] = tok;
    }
    if (all_done) break;
  }
  return out;
}

TokenSeq sample_translation(const BaseModel& base, const TokenSeq& src, std::mt19937_64& rng, std::size_t max_len) {
  std::vector<std::mt19937_64> rngs{rng};
  auto out = sample_translations(base, {src}, rngs, max_len);
  rng = rngs[0];
  return out[0];
}

}  // namespace docnmt
