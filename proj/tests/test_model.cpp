#include <doctest.h>

#include <cmath>

#include "docnmt/bpe.hpp"
#include "docnmt/model.hpp"
#include "test_util.hpp"

using namespace docnmt;

namespace {

ModelConfig small_config(std::size_t layers = 2, std::size_t d = 16) {
  ModelConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_model = d;
  c.d_ff = 2 * d;
  c.max_context = 3;
  c.src_vocab = 12;
  c.tgt_vocab = 10;
  c.max_len = 10;
  return c;
}

TokenSeq random_seq(std::mt19937_64& rng, std::size_t len, std::size_t vocab) {
  std::uniform_int_distribution<int> tok(kNumSpecials, static_cast<int>(vocab) - 1);
  TokenSeq s(len);
  for (int& t : s) t = tok(rng);
  return s;
}

CadecInput random_input(std::mt19937_64& rng, const ModelConfig& c, std::size_t n_ctx) {
  CadecInput in;
  in.src = random_seq(rng, 4, c.src_vocab);
  in.first_pass = random_seq(rng, 3, c.tgt_vocab);
  for (std::size_t i = 0; i < n_ctx; ++i) {
    in.ctx_src.push_back(random_seq(rng, 2 + i, c.src_vocab));
    in.ctx_tgt.push_back(random_seq(rng, 3 + i % 2, c.tgt_vocab));
  }
  return in;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Copies rows [from, to) of a [1, L, d] tensor.
std::vector<double> rows_of(const Tensor& t, std::size_t from, std::size_t to) {
  const std::size_t w = t.size(2);
  return {t.data().begin() + static_cast<std::ptrdiff_t>(from * w), t.data().begin() + static_cast<std::ptrdiff_t>(to * w)};
}

}  // namespace

TEST_CASE("model config validation and text round trip") {
  ModelConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  CHECK(ModelConfig::from_text(c.to_text()) == c);
  ModelConfig bad = c;
  bad.n_heads = 3;
  CHECK_THROWS(bad.validate());
  const ModelConfig big = ModelConfig::transformer_base();
  CHECK(big.n_layers == 6);
  CHECK(big.n_heads == 8);
  CHECK(big.d_model == 512);
  CHECK(big.d_ff == 2048);
  CHECK_THROWS(ModelConfig::from_text("bogus=1\n"));
}

TEST_CASE("base_forward: causal mask and normalization") {
  const ModelConfig c = small_config();
  BaseModel m(c, 3);
  std::mt19937_64 rng(1);
  const TokenSeq src = random_seq(rng, 5, c.src_vocab);
  TokenSeq tgt = random_seq(rng, 6, c.tgt_vocab);
  const Tensor a = base_forward(m, src, tgt);
  REQUIRE(a.shape() == Shape{7, c.tgt_vocab});
  for (std::size_t t = 0; t < 7; ++t) {
    double z = 0.0;
    for (std::size_t v = 0; v < c.tgt_vocab; ++v) z += std::exp(a.data()[t * c.tgt_vocab + v]);
    CHECK(std::abs(z - 1.0) <= 1e-6);
  }
  // Position t predicts tgt[t] from tgt[<t]; changing tgt[3..] leaves rows 0..3 unchanged.
  tgt[3] = tgt[3] == 5 ? 6 : 5;
  tgt[5] = tgt[5] == 7 ? 8 : 7;
  const Tensor b = base_forward(m, src, tgt);
  for (std::size_t i = 0; i < 4 * c.tgt_vocab; ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
  CHECK(max_abs_diff(a, b) > 1e-6);
}

TEST_CASE("zero output layer gives the uniform distribution") {
  const ModelConfig c = small_config();
  BaseModel m(c, 4);
  for (double& w : m.params().at("out.w").mutable_data()) w = 0.0;
  for (double& w : m.params().at("out.b").mutable_data()) w = 0.0;
  const Tensor lp = base_forward(m, {5, 6, 7}, {8, 9});
  for (double v : lp.data()) CHECK(v == doctest::Approx(-std::log(static_cast<double>(c.tgt_vocab))).epsilon(1e-12));
}

TEST_CASE("ids outside the vocabulary are rejected") {
  const ModelConfig c = small_config();
  BaseModel m(c, 4);
  CHECK_THROWS_AS(base_forward(m, {5, 99}, {6}), std::out_of_range);
  CHECK_THROWS_AS(base_forward(m, {5}, {static_cast<int>(c.tgt_vocab)}), std::out_of_range);
  CHECK_THROWS(base_forward(m, {5}, TokenSeq(c.max_len + 1, 6)));
}

TEST_CASE("padding does not change a row's log-probabilities") {
  const ModelConfig c = small_config();
  BaseModel m(c, 8);
  const Tensor alone = m.forward_logits({{5, 6}}, {{kBosId, 7}});
  const Tensor batched = m.forward_logits({{5, 6}, {7, 8, 9, 10, 11}}, {{kBosId, 7}, {kBosId, 5, 6, 7}});
  // batched row 0 has shape [4, V]; its first two positions must match.
  for (std::size_t i = 0; i < 2 * c.tgt_vocab; ++i) CHECK(alone.data()[i] == doctest::Approx(batched.data()[i]).epsilon(1e-10));
}

TEST_CASE("incremental base session equals the full forward pass") {
  const ModelConfig c = small_config();
  BaseModel m(c, 5);
  std::mt19937_64 rng(2);
  const std::vector<TokenSeq> src{random_seq(rng, 4, c.src_vocab), random_seq(rng, 6, c.src_vocab)};
  const std::vector<TokenSeq> tgt_in{{kBosId, 5, 6, 7}, {kBosId, 8, 9, 5}};
  const Tensor full = log_softmax(m.forward_logits(src, tgt_in));
  auto session = m.start_session(m.encode(src));
  for (std::size_t t = 0; t < 4; ++t) {
    const Tensor lp = session->step({tgt_in[0][t], tgt_in[1][t]});
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t v = 0; v < c.tgt_vocab; ++v)
        CHECK(lp.data()[r * c.tgt_vocab + v] ==
              doctest::Approx(full.data()[(r * 4 + t) * c.tgt_vocab + v]).epsilon(1e-10));
  }
}

TEST_CASE("session reorder duplicates and drops rows consistently") {
  const ModelConfig c = small_config();
  BaseModel m(c, 6);
  std::mt19937_64 rng(3);
  const std::vector<TokenSeq> src{random_seq(rng, 3, c.src_vocab), random_seq(rng, 5, c.src_vocab)};
  auto session = m.start_session(m.encode(src));
  session->step({kBosId, kBosId});
  session->step({5, 6});
  session->reorder({1, 1, 0});
  CHECK(session->rows() == 3);
  const Tensor lp = session->step({7, 7, 8});

  auto single = m.start_session(m.encode({src[1]}));
  single->step({kBosId});
  single->step({6});
  const Tensor ref = single->step({7});
  for (std::size_t v = 0; v < c.tgt_vocab; ++v) {
    CHECK(lp.data()[v] == doctest::Approx(ref.data()[v]).epsilon(1e-10));
    CHECK(lp.data()[c.tgt_vocab + v] == doctest::Approx(ref.data()[v]).epsilon(1e-10));
  }
}

TEST_CASE("CADec memory layout: widths and distance codes") {
  const ModelConfig c = small_config();
  BaseModel base(c, 7);
  BaseRepresentationCache cache(base);
  std::mt19937_64 rng(4);

  const CadecInput none = random_input(rng, c, 0);
  const CadecMemory m0 = build_cadec_memory(base, cache, {none});
  CHECK(m0.enc.size(2) == c.d_model + c.max_context + 1);
  CHECK(m0.dec.size(2) == 2 * c.d_model + c.max_context + 1);
  CHECK(m0.enc_lengths[0] == none.src.size());
  CHECK(m0.dec_lengths[0] == none.first_pass.size() + 1);
  for (std::size_t r = 0; r < m0.enc_lengths[0]; ++r) {
    const auto row = m0.enc.data().subspan(r * m0.enc.size(2), m0.enc.size(2));
    CHECK(row[c.d_model] == 1.0);
    for (std::size_t j = 1; j <= c.max_context; ++j) CHECK(row[c.d_model + j] == 0.0);
  }

  const CadecInput three = random_input(rng, c, 3);
  const CadecMemory m3 = build_cadec_memory(base, cache, {three});
  // Oldest context sentence sits at distance 3.
  const std::size_t w = m3.enc.size(2);
  const std::size_t oldest_row = three.src.size();
  CHECK(m3.enc.data()[oldest_row * w + c.d_model + 3] == 1.0);
  const std::size_t newest_row = m3.enc_lengths[0] - 1;
  CHECK(m3.enc.data()[newest_row * w + c.d_model + 1] == 1.0);

  // Decoder side: embedding half of each row is the base target embedding of the input token.
  const std::size_t wd = m3.dec.size(2);
  const auto emb = base.target_embedding().data();
  for (std::size_t t = 0; t <= three.first_pass.size(); ++t) {
    const int tok = t == 0 ? kBosId : three.first_pass[t - 1];
    for (std::size_t j = 0; j < c.d_model; ++j)
      CHECK(m3.dec.data()[t * wd + c.d_model + j] == emb[static_cast<std::size_t>(tok) * c.d_model + j]);
  }
}

TEST_CASE("CADec rejects more than C context sentences") {
  ModelConfig c = small_config();
  BaseModel base(c, 7);
  BaseRepresentationCache cache(base);
  std::mt19937_64 rng(5);
  CHECK_THROWS(build_cadec_memory(base, cache, {random_input(rng, c, 4)}));
  CadecInput mismatched = random_input(rng, c, 2);
  mismatched.ctx_tgt.pop_back();
  CHECK_THROWS(build_cadec_memory(base, cache, {mismatched}));
}

TEST_CASE("CADec output: normalization and causal mask") {
  const ModelConfig c = small_config();
  BaseModel base(c, 9);
  CadecModel cadec(c, 10);
  std::mt19937_64 rng(6);
  const CadecInput in = random_input(rng, c, 2);
  TokenSeq tgt{5, 6, 7, 8};
  const Tensor a = cadec_forward(base, cadec, in, tgt);
  for (std::size_t t = 0; t < 5; ++t) {
    double z = 0.0;
    for (std::size_t v = 0; v < c.tgt_vocab; ++v) z += std::exp(a.data()[t * c.tgt_vocab + v]);
    CHECK(std::abs(z - 1.0) <= 1e-6);
  }
  tgt[2] = 9;
  const Tensor b = cadec_forward(base, cadec, in, tgt);
  for (std::size_t i = 0; i < 3 * c.tgt_vocab; ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("CADec ignores the order of memory rows but not their distance codes") {
  const ModelConfig c = small_config();
  BaseModel base(c, 11);
  CadecModel cadec(c, 12);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const CadecInput in = random_input(rng, c, 3);
    BaseRepresentationCache cache(base);
    const CadecMemory mem = build_cadec_memory(base, cache, {in});
    const std::vector<TokenSeq> tgt_in{{kBosId, 5, 6, 7}};
    const Tensor ref = cadec.forward_logits(mem, tgt_in);

    // Move the current sentence block to the end: context blocks come first, distance codes stay attached.
    CadecMemory permuted = mem;
    {
      const std::size_t cur_enc = in.src.size();
      auto tail = rows_of(mem.enc, cur_enc, mem.enc_lengths[0]);
      auto head = rows_of(mem.enc, 0, cur_enc);
      tail.insert(tail.end(), head.begin(), head.end());
      permuted.enc = Tensor::from_data(mem.enc.shape(), tail);
      const std::size_t cur_dec = in.first_pass.size() + 1;
      auto dtail = rows_of(mem.dec, cur_dec, mem.dec_lengths[0]);
      auto dhead = rows_of(mem.dec, 0, cur_dec);
      dtail.insert(dtail.end(), dhead.begin(), dhead.end());
      permuted.dec = Tensor::from_data(mem.dec.shape(), dtail);
    }
    CHECK(max_abs_diff(cadec.forward_logits(permuted, tgt_in), ref) <= 1e-10);

    // Same rows, distance codes reassigned (oldest and newest context swap labels).
    CadecInput reversed = in;
    std::reverse(reversed.ctx_src.begin(), reversed.ctx_src.end());
    std::reverse(reversed.ctx_tgt.begin(), reversed.ctx_tgt.end());
    const Tensor other = cadec.forward_logits(build_cadec_memory(base, cache, {reversed}), tgt_in);
    CHECK(max_abs_diff(other, ref) > 1e-8);
  }
}

TEST_CASE("every attention row sums to one") {
  const ModelConfig c = small_config();
  BaseModel base(c, 13);
  CadecModel cadec(c, 14);
  std::mt19937_64 rng(7);
  std::vector<Tensor> log;
  ForwardOptions opt;
  opt.attention_log = &log;
  base.forward_logits({random_seq(rng, 3, c.src_vocab), random_seq(rng, 6, c.src_vocab)},
                      {{kBosId, 5}, {kBosId, 6, 7, 8}}, opt);
  BaseRepresentationCache cache(base);
  const CadecMemory mem = build_cadec_memory(base, cache, {random_input(rng, c, 1), random_input(rng, c, 3)});
  cadec.forward_logits(mem, {{kBosId, 5, 6}, {kBosId}}, opt);
  CHECK(log.size() == 2 * c.n_layers + c.n_layers + 3 * c.n_layers);
  for (const Tensor& w : log) {
    const std::size_t lk = w.size(3);
    for (std::size_t r = 0; r < w.numel() / lk; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < lk; ++k) s += w.data()[r * lk + k];
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("incremental CADec session equals the full forward pass") {
  const ModelConfig c = small_config();
  BaseModel base(c, 15);
  CadecModel cadec(c, 16);
  std::mt19937_64 rng(8);
  BaseRepresentationCache cache(base);
  const CadecMemory mem = build_cadec_memory(base, cache, {random_input(rng, c, 2), random_input(rng, c, 0)});
  const std::vector<TokenSeq> tgt_in{{kBosId, 5, 6}, {kBosId, 7, 8}};
  const Tensor full = log_softmax(cadec.forward_logits(mem, tgt_in));
  auto session = cadec.start_session(mem);
  for (std::size_t t = 0; t < 3; ++t) {
    const Tensor lp = session->step({tgt_in[0][t], tgt_in[1][t]});
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t v = 0; v < c.tgt_vocab; ++v)
        CHECK(lp.data()[r * c.tgt_vocab + v] ==
              doctest::Approx(full.data()[(r * 3 + t) * c.tgt_vocab + v]).epsilon(1e-10));
  }
}

TEST_CASE("CADec micro-model gradients match finite differences; the base model gets none") {
  ModelConfig c = small_config(1, 8);
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    BaseModel base(c, seed);
    CadecModel cadec(c, seed + 50);
    std::mt19937_64 rng(seed);
    BaseRepresentationCache cache(base);
    const CadecMemory mem = build_cadec_memory(base, cache, {random_input(rng, c, 2)});
    const std::vector<TokenSeq> tgt_in{{kBosId, 5, 6}};
    const std::vector<int> targets{5, 6, kEosId};
    auto loss = [&] {
      Tensor lg = cadec.forward_logits(mem, tgt_in);
      return cross_entropy(reshape(lg, {3, c.tgt_vocab}), targets);
    };
    std::vector<Tensor> params;
    for (const auto& [name, t] : cadec.params()) params.push_back(t);
    CHECK(docnmt::testing::gradient_check(loss, params) <= 1e-4);
    for (const auto& [name, t] : base.params()) CHECK(t.grad().empty());
  }
}

TEST_CASE("sampling is deterministic given the rng") {
  const ModelConfig c = small_config();
  BaseModel m(c, 17);
  std::mt19937_64 r1(42), r2(42);
  CHECK(sample_translation(m, {5, 6, 7}, r1, 8) == sample_translation(m, {5, 6, 7}, r2, 8));
}

TEST_CASE("sampling a delta distribution equals greedy decoding") {
  const ModelConfig c = small_config();
  BaseModel m(c, 18);
  for (double& w : m.params().at("out.w").mutable_data()) w = 0.0;
  auto b = m.params().at("out.b").mutable_data();
  for (double& w : b) w = -1e4;
  b[7] = 0.0;
  std::mt19937_64 rng(1);
  const TokenSeq sampled = sample_translation(m, {5, 6}, rng, 6);

  auto session = m.start_session(m.encode({{5, 6}}));
  TokenSeq greedy;
  int feed = kBosId;
  for (std::size_t t = 0; t < 6; ++t) {
    const Tensor lp = session->step({feed});
    feed = static_cast<int>(std::max_element(lp.data().begin(), lp.data().end()) - lp.data().begin());
    if (feed == kEosId) break;
    greedy.push_back(feed);
  }
  CHECK(sampled == greedy);
  CHECK(sampled == TokenSeq(6, 7));
}

TEST_CASE("first-token sample frequencies match model probabilities within 3 sigma") {
  const ModelConfig c = small_config();
  BaseModel m(c, 19);
  // Sharpen nothing; use the untrained model's own first-step distribution.
  const TokenSeq src{5, 6, 7};
  const Tensor lp = base_forward(m, src, {});
  const std::size_t n = 10000;
  std::vector<std::mt19937_64> rngs;
  for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(1000 + i);
  const auto samples = sample_translations(m, std::vector<TokenSeq>(n, src), rngs, 1);
  std::vector<double> counts(c.tgt_vocab, 0.0);
  for (const auto& s : samples) ++counts[s.empty() ? kEosId : static_cast<std::size_t>(s[0])];
  for (std::size_t v = 0; v < c.tgt_vocab; ++v) {
    const double p = std::exp(lp.data()[v]);
    const double sigma = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(counts[v] - n * p) <= 3.0 * sigma + 1e-9);
  }
}

TEST_CASE("parameter sets are checked against the config") {
  const ModelConfig c = small_config();
  BaseModel m(c, 20);
  ModelConfig other = c;
  other.d_model = 8;
  CHECK_THROWS_AS(BaseModel(other, m.params()), CheckpointError);
  CHECK_NOTHROW(BaseModel(c, m.params().clone()));
}
