// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Arguments restrict the run to the listed
// criterion numbers (criteria 4 and 10 share the training runs of 5).

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "docnmt/experiment.hpp"
#include "docnmt/morphology.hpp"
#include "docnmt/testset_builder.hpp"
#include "test_util.hpp"
#include "toy_session.hpp"

using namespace docnmt;
using docnmt::testing::gradient_check;
using docnmt::testing::project_to_scalar;
using docnmt::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

std::string pct(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * x << "%";
  return s.str();
}

TokenSeq random_seq(std::mt19937_64& rng, std::size_t len, std::size_t vocab) {
  std::uniform_int_distribution<int> tok(kNumSpecials, static_cast<int>(vocab) - 1);
  TokenSeq s(len);
  for (int& t : s) t = tok(rng);
  return s;
}

// ---- 1 ----------------------------------------------------------------------

ModelConfig micro_config() {
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 16;
  c.max_context = 3;
  c.src_vocab = 11;
  c.tgt_vocab = 10;
  c.max_len = 8;
  return c;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
    const double e = gradient_check(f, std::move(inputs));
    if (e > worst || std::isnan(e)) {
      worst = std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
      worst_name = name;
    }
  };
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng), bt = random_tensor({2, 4}, rng);
    check("matmul", [&] { return project_to_scalar(matmul(a, b)); }, {a, b});
    check("matmul^T", [&] { return project_to_scalar(matmul(a, bt, true)); }, {a, bt});
    Tensor ba = random_tensor({2, 2, 3, 4}, rng), bb = random_tensor({2, 2, 4, 3}, rng);
    check("batched matmul", [&] { return project_to_scalar(matmul(ba, bb)); }, {ba, bb});
    Tensor s = random_tensor({3, 5}, rng);
    check("softmax", [&] { return project_to_scalar(softmax(s, 1)); }, {s});
    check("log_softmax", [&] { return project_to_scalar(log_softmax(s)); }, {s});
    std::vector<std::uint8_t> mask(15, 0);
    mask[1] = mask[7] = mask[13] = 1;
    check("masked softmax", [&] { return project_to_scalar(softmax(masked_fill(s, mask, -1e9), 1)); }, {s});
    Tensor x = random_tensor({4, 6}, rng, 2.0), g = random_tensor({6}, rng), be = random_tensor({6}, rng);
    check("layer_norm", [&] { return project_to_scalar(layer_norm(x, g, be)); }, {x, g, be});
    Tensor table = random_tensor({7, 3}, rng);
    const std::vector<int> ids{1, 4, 4, 0, 6};
    check("embedding", [&] { return project_to_scalar(embedding(table, ids, {5})); }, {table});
    Tensor logits = random_tensor({5, 7}, rng);
    const std::vector<int> targets{2, 0, -1, 6, 3};
    check("cross_entropy", [&] { return cross_entropy(logits, targets, -1); }, {logits});
    Tensor p = random_tensor({2, 3, 4}, rng), q = random_tensor({2, 2, 4}, rng), bias = random_tensor({4}, rng);
    check("permute", [&] { return project_to_scalar(permute(p, {2, 0, 1})); }, {p});
    check("reshape", [&] { return project_to_scalar(reshape(p, {6, 4})); }, {p});
    check("slice", [&] { return project_to_scalar(slice(p, 1, 1, 3)); }, {p});
    const std::vector<std::size_t> picks{1, 0, 1};
    check("index_select", [&] { return project_to_scalar(index_select(p, 0, picks)); }, {p});
    check("concat", [&] {
      const Tensor parts[] = {p, q};
      return project_to_scalar(concat(parts, 1));
    }, {p, q});
    check("add_bias", [&] { return project_to_scalar(add_bias(p, bias)); }, {p, bias});
    Tensor r = Tensor::from_data({4}, {-1.0, 0.5, 2.0, -0.3}, true);
    check("relu", [&] { return project_to_scalar(relu(r)); }, {r});

    // Full micro-models: base (N=1, d_model=8) and CADec over it.
    const ModelConfig c = micro_config();
    BaseModel base(c, seed);
    CadecModel cadec(c, seed + 100);
    const std::vector<TokenSeq> src{random_seq(rng, 4, c.src_vocab)};
    const std::vector<TokenSeq> tgt_in{{kBosId, 5, 6}};
    const std::vector<int> tgt_out{5, 6, kEosId};
    std::vector<Tensor> base_params;
    for (const auto& [n, t] : base.params()) base_params.push_back(t);
    check("base model", [&] {
      return cross_entropy(reshape(base.forward_logits(src, tgt_in), {3, c.tgt_vocab}), tgt_out);
    }, base_params);
    CadecInput in;
    in.src = src[0];
    in.first_pass = random_seq(rng, 3, c.tgt_vocab);
    for (int k = 0; k < 2; ++k) {
      in.ctx_src.push_back(random_seq(rng, 3, c.src_vocab));
      in.ctx_tgt.push_back(random_seq(rng, 2, c.tgt_vocab));
    }
    BaseRepresentationCache cache(base);
    const CadecMemory mem = build_cadec_memory(base, cache, {in});
    std::vector<Tensor> cadec_params;
    for (const auto& [n, t] : cadec.params()) cadec_params.push_back(t);
    check("CADec model", [&] {
      return cross_entropy(reshape(cadec.forward_logits(mem, tgt_in), {3, c.tgt_vocab}), tgt_out);
    }, cadec_params);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 120.0,
          "max relative error " + fmt(worst, 3) + " (" + worst_name + ") over 5 seeds, " + fmt(secs, 3) + " s"};
}

// ---- 2 ----------------------------------------------------------------------

Outcome beam_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t agree = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    docnmt::testing::TableSession model(seed, 4, 1), session(seed, 4, 1);
    const Hypothesis got = beam_search(session, 256, 4).front();
    const Hypothesis want = docnmt::testing::exhaustive(model, 4, 4);
    agree += got.tokens == want.tokens && std::abs(got.score - want.score) <= 1e-12;
  }
  const double secs = seconds_since(t0);
  return {agree == 100 && secs < 10.0, std::to_string(agree) + "/100 models agree, " + fmt(secs, 3) + " s"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome bleu_oracle() {
  const std::vector<std::string> ref{"the cat sat on the mat", "a dog barks at night"};
  const double same = bleu(ref, ref);
  const double none = bleu(std::vector<std::string>{"x y z w v u", "q r s t p"}, ref);
  // "the the the cat" vs "the cat sat": unigrams the(clipped to 1)+cat = 2/4,
  // bigrams "the cat" = 1/3, trigrams 0/2; hypothesis longer, BP = 1.
  const BleuStats s = bleu_stats(std::vector<std::string>{"the the the cat"}, std::vector<std::string>{"the cat sat"});
  const bool hand = std::abs(s.precision[0] - 0.5) <= 1e-4 && std::abs(s.precision[1] - 1.0 / 3) <= 1e-4 &&
                    s.precision[2] == 0.0 && s.brevity_penalty == 1.0 && s.score == 0.0;
  // A nonzero case: a b c d e vs a b c d f g.
  const BleuStats t = bleu_stats(std::vector<std::string>{"a b c d e"}, std::vector<std::string>{"a b c d f g"});
  const double expect = 100.0 * std::exp(1.0 - 6.0 / 5.0) * std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
  const bool hand2 = std::abs(t.score - expect) <= 1e-4;
  return {same == 100.0 && none == 0.0 && hand && hand2,
          "identical " + fmt(same, 6) + ", disjoint " + fmt(none) + ", clipped precisions " + fmt(s.precision[0]) +
              "/" + fmt(s.precision[1]) + ", worked example " + fmt(t.score, 8) + " vs " + fmt(expect, 8)};
}

// ---- 5, 4, 10 ---------------------------------------------------------------

SynthConfig experiment_corpus(std::uint64_t seed) {
  SynthConfig c;  // generator defaults
  c.seed = seed;
  return c;
}

ExperimentConfig experiment_config(std::uint64_t seed) {
  ExperimentConfig c = ExperimentConfig::desk();
  c.base_train.seed = seed;
  c.cadec_train.seed = seed + 100;
  return c;
}

struct SeedRun {
  std::uint64_t seed = 0;
  double base_bleu = 0, cadec_bleu = 0;
  double base_acc = 0, cadec_acc = 0;
  double cadec_deixis = 0, cadec_cohesion = 0;
  double p0_cohesion = 0;
  double train_seconds = 0;
  bool untrained_half = false, trained_half = false, builder_half = false;
  std::string problem;
};

std::vector<ContrastiveInstance> interleaved(const std::vector<ContrastiveInstance>& a,
                                             const std::vector<ContrastiveInstance>& b) {
  std::vector<ContrastiveInstance> out;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); i += 2)
    for (const auto* s : {&a, &b})
      for (std::size_t k = i; k < std::min(i + 2, s->size()); ++k) out.push_back((*s)[k]);
  return out;
}

double pooled(const ConsistencyReport& a, const ConsistencyReport& b) {
  return static_cast<double>(a.total.correct + b.total.correct) / static_cast<double>(a.total.count + b.total.count);
}

SeedRun run_seed(std::uint64_t seed) {
  SeedRun r;
  r.seed = seed;
  const SynthCorpus corpus = gen_synthetic_corpus(experiment_corpus(seed));
  const ExperimentConfig cfg = experiment_config(seed);
  const PreparedData data = prepare_data(corpus.train, corpus.dev, cfg.prepare);
  const auto dev_sets = interleaved(corpus.deixis_dev, corpus.cohesion_dev);

  // Builder-emitted deixis set over the first training runs. Every run opens
  // with a register marker, so the marker blocklist is dropped.
  const std::vector<SubtitlePair> head(corpus.train.begin(),
                                       corpus.train.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                                                  corpus.train.size(), 20000)));
  DeixisOptions opt;
  opt.blocklist.clear();
  const auto built = build_deixis_instances(group_and_fragment(filter_pairs(head), {}), LexiconMorphology::toy(), opt);

  {
    BaseModel untrained(sized_config(cfg.model, data), seed + 7);
    r.untrained_half = contrastive_report(untrained, nullptr, data, corpus.deixis_test).accuracy() == 0.5 &&
                       contrastive_report(untrained, nullptr, data, built).accuracy() == 0.5;
  }
  MetricLog base_log, log_half, log_zero;
  TrainResult tr;
  const BaseModel base = train_base_model(data, cfg, base_log, &tr);
  r.train_seconds += tr.seconds;
  auto t0 = std::chrono::steady_clock::now();
  const auto base_deixis = contrastive_report(base, nullptr, data, corpus.deixis_test, cfg.translate);
  const auto base_cohesion = contrastive_report(base, nullptr, data, corpus.cohesion_test, cfg.translate);
  r.trained_half = base_deixis.accuracy() == 0.5;
  r.builder_half = !built.empty() && contrastive_report(base, nullptr, data, built).accuracy() == 0.5;
  r.base_acc = pooled(base_deixis, base_cohesion);
  r.base_bleu = document_bleu(base, nullptr, data, cfg.translate);
  std::cerr << "  seed " << seed << ": base evaluated in " << fmt(seconds_since(t0), 4) << " s\n";

  const CadecModel cadec = train_cadec_model(base, data, dev_sets, cfg, log_half, &tr);
  r.train_seconds += tr.seconds;
  t0 = std::chrono::steady_clock::now();
  r.cadec_bleu = document_bleu(base, &cadec, data, cfg.translate);
  const auto deixis = contrastive_report(base, &cadec, data, corpus.deixis_test, cfg.translate);
  const auto cohesion = contrastive_report(base, &cadec, data, corpus.cohesion_test, cfg.translate);
  r.cadec_deixis = deixis.accuracy();
  r.cadec_cohesion = cohesion.accuracy();
  r.cadec_acc = pooled(deixis, cohesion);
  std::cerr << "  seed " << seed << ": CADec evaluated in " << fmt(seconds_since(t0), 4) << " s\n";

  ExperimentConfig zero = cfg;
  zero.cadec_train.mix.p = 0.0;
  const CadecModel cadec0 = train_cadec_model(base, data, dev_sets, zero, log_zero, &tr);
  r.p0_cohesion = contrastive_report(base, &cadec0, data, corpus.cohesion_test, cfg.translate).accuracy();

  std::cerr << "  seed " << seed << ": base BLEU " << fmt(r.base_bleu) << ", CADec BLEU " << fmt(r.cadec_bleu)
            << ", base acc " << pct(r.base_acc) << ", CADec acc " << pct(r.cadec_acc) << " (deixis "
            << pct(r.cadec_deixis) << ", cohesion " << pct(r.cadec_cohesion) << "), p=0 cohesion "
            << pct(r.p0_cohesion) << ", training " << fmt(r.train_seconds, 4) << " s\n";
  return r;
}

// ---- 6-9 --------------------------------------------------------------------

Outcome corruption_contract() {
  std::mt19937_64 rng(1);
  bool counts = true, never_same = true;
  for (std::size_t n = 1; n <= 50; ++n) {
    const std::size_t expect = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n) + 0.5));
    for (int rep = 0; rep < 50; ++rep) {
      const TokenSeq ref = random_seq(rng, n, 60);
      const TokenSeq out = corrupt_reference(ref, 0.2, 60, rng);
      std::size_t changed = 0;
      for (std::size_t i = 0; i < n; ++i) changed += out[i] != ref[i];
      counts &= changed == expect && corruption_count(n, 0.2) == expect;
    }
  }
  // Positions: n = 10 (2 replaced), 10k draws, 9 degrees of freedom,
  // chi-square upper 1% point 21.666.
  const std::size_t n = 10, draws = 10000;
  std::vector<double> hits(n, 0.0);
  for (std::size_t d = 0; d < draws; ++d) {
    const TokenSeq ref = random_seq(rng, n, 60);
    const TokenSeq out = corrupt_reference(ref, 0.2, 60, rng);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      hits[i] += out[i] != ref[i];
      changed += out[i] != ref[i];
    }
    // Exactly two positions are rewritten; fewer differences would mean a
    // replacement equal to the original.
    never_same &= changed == 2;
  }
  const double expected = static_cast<double>(draws) * 2.0 / static_cast<double>(n);
  double chi2 = 0.0;
  for (double h : hits) chi2 += (h - expected) * (h - expected) / expected;
  const bool uniform = chi2 < 21.666;
  return {counts && never_same && uniform, std::string("counts ") + (counts ? "exact" : "WRONG") +
                                                " for n=1..50, replacements " +
                                                (never_same ? "always differ" : "sometimes equal the original") +
                                                ", position chi-square " + fmt(chi2) + " (df 9, 1% point 21.666)"};
}

Outcome mixing_contract() {
  bool ok = true;
  std::ostringstream d;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(p * 100) + 3);
    const double n = 10000;
    double hits = 0;
    for (int i = 0; i < 10000; ++i) hits += draw_corrupted_branch(p, rng);
    const double sigma = std::sqrt(n * p * (1 - p));
    const bool in = std::abs(hits - n * p) <= 3 * sigma;
    ok &= in;
    d << "p=" << p << ": " << hits << (in ? "" : " (out)") << "; ";
  }
  return {ok, d.str() + "of 10000 draws"};
}

Outcome schedule_contract() {
  bool exact = true;
  double worst = 0.0;
  for (std::size_t w : {1, 300, 4000, 16000}) {
    for (double scale : {1.0, 4.0}) {
      const double got = lr_at(w, w, scale);
      const double want = scale / std::sqrt(static_cast<double>(w));
      const double rel = std::abs(got - want) / want;
      worst = std::max(worst, rel);
      exact &= rel <= 4 * std::numeric_limits<double>::epsilon();
    }
  }
  bool shape = true;
  const std::size_t w = 16000;
  for (std::size_t s = 1; s < w; s += 37) shape &= lr_at(s + 1, w, 1.0) > lr_at(s, w, 1.0);
  shape &= lr_at(w, w, 1.0) > lr_at(w - 1, w, 1.0) && lr_at(w, w, 1.0) > lr_at(w + 1, w, 1.0);
  for (std::size_t s = w + 1; s < 10 * w; s += 41) shape &= lr_at(s + 1, w, 1.0) < lr_at(s, w, 1.0);
  return {exact && shape, "peak relative error " + fmt(worst, 3) + ", " +
                              (shape ? "rises to the warmup step then falls" : "NOT unimodal")};
}

Outcome averaging_contract() {
  std::mt19937_64 rng(9);
  std::vector<ParameterSet> cps;
  for (int i = 0; i < 5; ++i) {
    ParameterSet p;
    p.add("w", random_tensor({4, 5}, rng));
    p.add("b", random_tensor({5}, rng));
    cps.push_back(std::move(p));
  }
  const ParameterSet avg = average_checkpoints(cps);
  double worst = 0.0;
  for (const auto& [name, t] : avg)
    for (std::size_t i = 0; i < t.numel(); ++i) {
      long double s = 0;
      for (const auto& c : cps) s += c.at(name).data()[i];
      worst = std::max(worst, std::abs(t.data()[i] - static_cast<double>(s / 5)));
    }
  std::vector<ParameterSet> same;
  for (int i = 0; i < 5; ++i) same.push_back(cps[2].clone());
  const ParameterSet id = average_checkpoints(same);
  bool identity = true;
  for (const auto& [name, t] : id)
    for (std::size_t i = 0; i < t.numel(); ++i) identity &= t.data()[i] == cps[2].at(name).data()[i];
  return {worst <= 1e-12 && identity,
          "max deviation from the elementwise mean " + fmt(worst, 3) + ", identical inputs " +
              (identity ? "unchanged" : "CHANGED")};
}

// ---- 11 ---------------------------------------------------------------------

Outcome builder_contracts() {
  const auto& morph = LexiconMorphology::toy();
  // Deixis symmetry over builder output on synthetic fragments.
  SynthConfig sc;
  sc.n_fragments = 400;
  sc.you_rate = 0.3;
  const SynthCorpus corpus = gen_synthetic_corpus(sc);
  DeixisOptions opt;
  opt.blocklist.clear();
  const auto inst = build_deixis_instances(group_and_fragment(filter_pairs(corpus.train), {}), morph, opt);
  bool symmetric = !inst.empty() && inst.size() % 2 == 0;
  for (std::size_t i = 0; symmetric && i + 1 < inst.size(); i += 2) {
    const auto& a = inst[i];
    const auto& b = inst[i + 1];
    symmetric = a.src == b.src && a.contrastive.size() == 1 && b.contrastive.size() == 1 &&
                a.contrastive[0].back() == b.true_tgt.back() && b.contrastive[0].back() == a.true_tgt.back();
  }
  // Lemma mass: 0.5 + 0.4 on one lemma, 0.08 on another.
  LexicalTable t;
  t.add("w", "t1", 0.5);
  t.add("w", "t2", 0.4);
  t.add("w", "t3", 0.08);
  const auto alts = alternative_translations(
      t, "w", [](const std::string& s) { return s == "t3" ? std::string("B") : std::string("A"); });
  const bool mass = alts.size() == 1 && alts[0].lemma == "A" && std::abs(alts[0].mass - 0.9) <= 1e-12;
  // VP ellipsis: every contrastive verb has the true verb's tags.
  const auto vp = build_vp_ellipsis_instances(corpus.ellipsis_seeds, corpus.lexical_table, lemmatizer_from(morph),
                                              morph);
  bool tags = !vp.empty();
  std::size_t checked = 0;
  for (std::size_t i = 0; i < vp.size() && tags; ++i) {
    const auto& seed = corpus.ellipsis_seeds[i];
    const auto true_verb = tokens_of(seed.tgt[seed.verb_sentence])[seed.verb_token];
    const auto want = morph.analyze(true_verb);
    for (const auto& g : vp[i].contrastive) {
      const auto got = morph.analyze(tokens_of(g[seed.verb_sentence])[seed.verb_token]);
      tags &= !got.empty() && !want.empty() && got.front().tags == want.front().tags &&
              got.front().lemma != want.front().lemma;
      ++checked;
    }
  }
  return {symmetric && mass && tags && vp.size() == corpus.ellipsis_seeds.size(),
          std::to_string(inst.size()) + " deixis instances " + (symmetric ? "mirrored" : "NOT mirrored") +
              ", lemma mass " + (alts.empty() ? "none" : fmt(alts[0].mass, 6)) + ", " + std::to_string(checked) +
              " ellipsis verbs " + (tags ? "share the true tags" : "with mismatched tags")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };
  std::map<int, Outcome> results;
  auto run = [&](int n, const std::function<Outcome()>& f) {
    if (!wanted(n)) return;
    try {
      results[n] = f();
    } catch (const std::exception& e) {
      results[n] = {false, std::string("exception: ") + e.what()};
    }
    std::cerr << "criterion " << n << " evaluated\n";
  };
  run(1, gradients);
  run(2, beam_oracle);
  run(3, bleu_oracle);
  run(6, corruption_contract);
  run(7, mixing_contract);
  run(8, schedule_contract);
  run(9, averaging_contract);
  run(11, builder_contracts);

  if (wanted(4) || wanted(5) || wanted(10)) {
    std::vector<SeedRun> runs;
    std::string failure;
    try {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) runs.push_back(run_seed(seed));
    } catch (const std::exception& e) {
      failure = std::string("exception: ") + e.what();
    }
    if (!failure.empty()) {
      for (int n : {4, 5, 10})
        if (wanted(n)) results[n] = {false, failure};
    } else {
      if (wanted(4)) {
        bool ok = true;
        for (const auto& r : runs) ok &= r.untrained_half && r.trained_half && r.builder_half;
        results[4] = {ok, std::string("untrained and trained base models on synthetic and builder deixis sets: ") +
                              (ok ? "exactly 50.0% in every case" : "NOT always 50.0%")};
      }
      if (wanted(5)) {
        std::size_t good = 0;
        std::ostringstream d;
        for (const auto& r : runs) {
          const bool a = r.cadec_acc >= 0.85 && r.base_acc <= 0.60;
          const bool b = std::abs(r.cadec_bleu - r.base_bleu) <= 0.5;
          const bool t = r.train_seconds <= 1800.0;
          good += a && b && t;
          d << "seed " << r.seed << ": acc " << pct(r.base_acc) << " -> " << pct(r.cadec_acc) << ", BLEU "
            << fmt(r.base_bleu) << " -> " << fmt(r.cadec_bleu) << ", " << fmt(r.train_seconds, 4) << " s"
            << (a && b && t ? " ok" : " FAIL") << "; ";
        }
        results[5] = {good >= 2, d.str() + std::to_string(good) + "/3 seeds pass"};
      }
      if (wanted(10)) {
        std::size_t good = 0;
        std::ostringstream d;
        for (const auto& r : runs) {
          good += r.cadec_cohesion >= r.p0_cohesion;
          d << "seed " << r.seed << ": p=0.5 " << pct(r.cadec_cohesion) << " vs p=0 " << pct(r.p0_cohesion) << "; ";
        }
        results[10] = {good >= 2, d.str() + std::to_string(good) + "/3 seeds with p=0.5 >= p=0"};
      }
    }
  }

  bool all = true;
  std::ostringstream report;
  for (const auto& [n, o] : results) {
    report << "criterion " << std::setw(2) << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "\n";
    all &= o.pass;
  }
  std::cout << report.str();
  std::ofstream("acceptance_report.txt") << report.str();
  return all ? 0 : 1;
}
