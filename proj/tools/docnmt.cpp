// Command-line driver: corpus preparation, training, translation, evaluation,
// contrastive test-set building and the corrupted-reference ablation.

#include <CLI11.hpp>

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "docnmt/experiment.hpp"
#include "docnmt/morphology.hpp"
#include "docnmt/testset_builder.hpp"

namespace fs = std::filesystem;
using namespace docnmt;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Blank-line separated groups of sentences.
std::vector<std::vector<std::string>> read_groups(const std::string& path) {
  std::vector<std::vector<std::string>> out(1);
  for (const auto& line : read_lines(path)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      if (!out.back().empty()) out.emplace_back();
    } else {
      out.back().push_back(line);
    }
  }
  if (out.back().empty()) out.pop_back();
  return out;
}

std::string groups_text(const std::vector<std::vector<std::string>>& groups) {
  std::ostringstream out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) out << '\n';
    for (const auto& s : groups[g]) out << s << '\n';
  }
  return out.str();
}

struct Run {
  std::string command;
  std::vector<std::string> argv;
  fs::path out;
};

Run g_run;

void prepare_out_dir(const std::string& dir) {
  g_run.out = dir;
  fs::create_directories(g_run.out);
}

// Manifest: command, argv, seed and configuration, plus the metric log name.
void write_manifest(const std::string& config_text, std::uint64_t seed, const std::string& metric_log = "") {
  std::ostringstream m;
  m << "command=" << g_run.command << "\n";
  m << "argv=";
  for (std::size_t i = 0; i < g_run.argv.size(); ++i) m << (i ? " " : "") << std::quoted(g_run.argv[i]);
  m << "\nseed=" << seed << "\n";
  if (!metric_log.empty()) m << "metric_log=" << metric_log << "\n";
  m << "[config]\n" << config_text;
  write_file(g_run.out / "manifest.txt", m.str());
}

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--config", file, "Experiment config (section.key=value lines) over the desk defaults")
        ->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override one config value, e.g. --set base.max_steps=500");
    app->add_option("--seed", seed, "Seed for both training stages");
  }

  ExperimentConfig build() const {
    ExperimentConfig c = ExperimentConfig::desk();
    if (!file.empty()) c.apply_text(read_file(file));
    for (const auto& s : sets) c.apply_text(s);
    if (seed) {
      c.base_train.seed = *seed;
      c.cadec_train.seed = *seed + 1;
    }
    return c;
  }
};

void save_model_checkpoint(const fs::path& path, const std::string& kind, const ModelConfig& config,
                           const ParameterSet& params) {
  Checkpoint cp;
  cp.metadata["kind"] = kind;
  cp.metadata["config"] = config.to_text();
  cp.params = params.clone();
  save_checkpoint(path.string(), cp);
}

ModelConfig checkpoint_config(const Checkpoint& cp, const std::string& kind, const std::string& path) {
  auto it = cp.metadata.find("kind");
  if (it == cp.metadata.end() || it->second != kind)
    throw std::runtime_error(path + " is not a " + kind + " checkpoint");
  return ModelConfig::from_text(cp.metadata.at("config"));
}

struct BaseBundle {
  BpeModel src_bpe, tgt_bpe;
  std::unique_ptr<BaseModel> model;
  ExperimentConfig config;
};

BaseBundle load_base(const std::string& dir) {
  BaseBundle b;
  const fs::path d(dir);
  b.src_bpe = BpeModel::load((d / "src.bpe").string());
  b.tgt_bpe = BpeModel::load((d / "tgt.bpe").string());
  Checkpoint cp = load_checkpoint((d / "base.ckpt").string());
  b.model = std::make_unique<BaseModel>(checkpoint_config(cp, "base", dir), std::move(cp.params));
  b.config = ExperimentConfig::desk();
  b.config.apply_text(read_file((d / "experiment.conf").string()));
  return b;
}

std::unique_ptr<CadecModel> load_cadec(const std::string& dir, const BaseModel& base) {
  Checkpoint cp = load_checkpoint((fs::path(dir) / "cadec.ckpt").string());
  const ModelConfig cfg = checkpoint_config(cp, "cadec", dir);
  if (!(cfg == base.config())) throw std::runtime_error("CADec checkpoint does not match the base model's config");
  return std::make_unique<CadecModel>(cfg, std::move(cp.params));
}

std::vector<ContrastiveInstance> load_sets(const std::vector<std::string>& paths) {
  std::vector<ContrastiveInstance> out;
  for (const auto& p : paths) {
    auto s = load_testset(p);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

// Interleaves instance pairs of several sets so any prefix mixes phenomena.
std::vector<ContrastiveInstance> interleave_pairs(const std::vector<std::vector<ContrastiveInstance>>& sets) {
  std::vector<ContrastiveInstance> out;
  std::size_t longest = 0;
  for (const auto& s : sets) longest = std::max(longest, s.size());
  for (std::size_t i = 0; i < longest; i += 2)
    for (const auto& s : sets)
      for (std::size_t k = i; k < std::min(i + 2, s.size()); ++k) out.push_back(s[k]);
  return out;
}

// Per-phenomenon reports in first-seen order.
std::vector<ConsistencyReport> reports_by_phenomenon(const BaseModel& base, const CadecModel* cadec,
                                                     const BpeModel& src_bpe, const BpeModel& tgt_bpe,
                                                     const std::vector<ContrastiveInstance>& instances,
                                                     const TranslateOptions& options) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<ContrastiveInstance>> by;
  for (const auto& inst : instances) {
    const std::string p = to_string(inst.phenomenon);
    if (!by.count(p)) order.push_back(p);
    by[p].push_back(inst);
  }
  ModelScorer scorer(base, cadec, src_bpe, tgt_bpe, options);
  std::vector<ConsistencyReport> out;
  for (const auto& p : order) out.push_back(consistency_report(by[p], scorer.score_all(by[p])));
  return out;
}

// ---- commands --------------------------------------------------------------

struct GenSynthArgs {
  std::string out;
  std::string config;
  std::uint64_t seed = 1;
  std::optional<std::size_t> fragments, dev, test;
};

int cmd_gen_synth(const GenSynthArgs& a) {
  prepare_out_dir(a.out);
  SynthConfig cfg = a.config.empty() ? SynthConfig{} : SynthConfig::from_text(read_file(a.config));
  cfg.seed = a.seed;
  if (a.fragments) cfg.n_fragments = *a.fragments;
  if (a.dev) cfg.n_dev = *a.dev;
  if (a.test) cfg.n_test = *a.test;
  const SynthCorpus c = gen_synthetic_corpus(cfg);
  const fs::path d = g_run.out;
  save_corpus((d / "train.tsv").string(), c.train);
  save_corpus((d / "dev.tsv").string(), c.dev);
  save_corpus((d / "test.tsv").string(), c.test);
  std::ostringstream ta, da;
  for (const auto& l : c.train_alignments) ta << l << '\n';
  for (const auto& l : c.dev_alignments) da << l << '\n';
  write_file(d / "train.align", ta.str());
  write_file(d / "dev.align", da.str());
  std::vector<std::vector<std::string>> dev_src, dev_ref;
  for (const auto& run : split_runs(filter_pairs(c.dev), FragmentOptions{}.max_gap_seconds)) {
    dev_src.emplace_back();
    dev_ref.emplace_back();
    for (const auto& p : run) {
      dev_src.back().push_back(p.src);
      dev_ref.back().push_back(p.tgt);
    }
  }
  write_file(d / "dev.src.txt", groups_text(dev_src));
  write_file(d / "dev.ref.txt", groups_text(dev_ref));
  save_testset((d / "deixis_dev.txt").string(), c.deixis_dev);
  save_testset((d / "lex_cohesion_dev.txt").string(), c.cohesion_dev);
  save_testset((d / "deixis_test.txt").string(), c.deixis_test);
  save_testset((d / "lex_cohesion_test.txt").string(), c.cohesion_test);
  std::ofstream seeds(d / "ellipsis_seeds.txt");
  write_ellipsis_seeds(seeds, c.ellipsis_seeds);
  c.lexical_table.save((d / "lexical_table.tsv").string());
  std::ostringstream freq;
  for (const auto& w : c.frequency_list) freq << w << '\n';
  write_file(d / "frequency.txt", freq.str());
  write_file(d / "synth.conf", cfg.to_text());
  write_manifest(cfg.to_text(), cfg.seed);
  std::cout << "train pairs " << c.train.size() << ", dev pairs " << c.dev.size() << ", deixis test "
            << c.deixis_test.size() << ", cohesion test " << c.cohesion_test.size() << "\n";
  return 0;
}

struct CorpusArgs {
  std::string train, dev, out;
  ConfigFlags cfg;
};

int cmd_prepare_data(const CorpusArgs& a) {
  prepare_out_dir(a.out);
  const ExperimentConfig cfg = a.cfg.build();
  const auto train = load_corpus(a.train);
  const auto dev = load_corpus(a.dev);
  const PreparedData d = prepare_data(train, dev, cfg.prepare);
  d.src_bpe.save((g_run.out / "src.bpe").string());
  d.tgt_bpe.save((g_run.out / "tgt.bpe").string());
  std::ostringstream stats;
  stats << "input_pairs\t" << train.size() << "\nclean_pairs\t" << d.base_train.size() << "\ncadec_examples\t"
        << d.cadec_train.size() << "\ndev_documents\t" << d.dev_src.size() << "\nsrc_vocab\t"
        << d.src_bpe.vocab_size() << "\ntgt_vocab\t" << d.tgt_bpe.vocab_size() << "\n";
  write_file(g_run.out / "stats.tsv", stats.str());
  write_manifest(cfg.to_text(), cfg.base_train.seed);
  std::cout << stats.str();
  return 0;
}

int cmd_train_base(const CorpusArgs& a) {
  prepare_out_dir(a.out);
  const ExperimentConfig cfg = a.cfg.build();
  const PreparedData d = prepare_data(load_corpus(a.train), load_corpus(a.dev), cfg.prepare);
  d.src_bpe.save((g_run.out / "src.bpe").string());
  d.tgt_bpe.save((g_run.out / "tgt.bpe").string());
  write_file(g_run.out / "experiment.conf", cfg.to_text());
  write_manifest(cfg.to_text(), cfg.base_train.seed, "metrics.tsv");
  MetricLog log((g_run.out / "metrics.tsv").string());
  TrainResult r;
  const BaseModel base = train_base_model(d, cfg, log, &r);
  save_model_checkpoint(g_run.out / "base.ckpt", "base", base.config(), base.params());
  const double b = document_bleu(base, nullptr, d, cfg.translate);
  log.add(r.steps, "final_dev_bleu", b);
  std::cout << "steps " << r.steps << (r.stopped_early ? " (early stop)" : "") << ", " << std::fixed
            << std::setprecision(1) << r.seconds << " s, dev BLEU " << std::setprecision(2) << b << "\n";
  return 0;
}

struct CadecArgs {
  std::string base, train, dev, out;
  std::vector<std::string> dev_sets;
  ConfigFlags cfg;
  std::optional<double> p;
};

int cmd_train_cadec(const CadecArgs& a) {
  prepare_out_dir(a.out);
  BaseBundle b = load_base(a.base);
  ExperimentConfig cfg = b.config;
  if (!a.cfg.file.empty()) cfg.apply_text(read_file(a.cfg.file));
  for (const auto& s : a.cfg.sets) cfg.apply_text(s);
  if (a.cfg.seed) cfg.cadec_train.seed = *a.cfg.seed;
  if (a.p) cfg.cadec_train.mix.p = *a.p;
  cfg.cadec_train.mix.validate();
  const PreparedData d = prepare_data(load_corpus(a.train), load_corpus(a.dev), cfg.prepare, &b.src_bpe, &b.tgt_bpe);
  std::vector<std::vector<ContrastiveInstance>> sets;
  for (const auto& p : a.dev_sets) sets.push_back(load_testset(p));
  const auto dev_sets = interleave_pairs(sets);
  write_file(g_run.out / "experiment.conf", cfg.to_text());
  write_manifest("base_dir=" + fs::absolute(a.base).string() + "\n" + cfg.to_text(), cfg.cadec_train.seed,
                 "metrics.tsv");
  MetricLog log((g_run.out / "metrics.tsv").string());
  TrainResult r;
  const CadecModel cadec = train_cadec_model(*b.model, d, dev_sets, cfg, log, &r);
  save_model_checkpoint(g_run.out / "cadec.ckpt", "cadec", cadec.config(), cadec.params());
  const double bl = document_bleu(*b.model, &cadec, d, cfg.translate);
  log.add(r.steps, "final_dev_bleu", bl);
  std::cout << "steps " << r.steps << (r.stopped_early ? " (early stop)" : "") << ", " << std::fixed
            << std::setprecision(1) << r.seconds << " s, dev BLEU " << std::setprecision(2) << bl << "\n";
  return 0;
}

struct TranslateArgs {
  std::string base, cadec, input, out;
  std::size_t beam = 4;
};

int cmd_translate(const TranslateArgs& a) {
  prepare_out_dir(a.out);
  BaseBundle b = load_base(a.base);
  std::unique_ptr<CadecModel> cadec = a.cadec.empty() ? nullptr : load_cadec(a.cadec, *b.model);
  TranslateOptions opt = b.config.translate;
  opt.beam_size = a.beam;
  const auto docs = read_groups(a.input);
  const auto out = translate_text_documents(*b.model, cadec.get(), b.src_bpe, b.tgt_bpe, docs, opt);
  write_file(g_run.out / "translation.txt", groups_text(out));
  write_manifest(b.config.to_text(), b.config.base_train.seed);
  std::cout << groups_text(out);
  return 0;
}

struct BleuArgs {
  std::string hyp, ref, out;
  bool cased = false;
};

int cmd_bleu(const BleuArgs& a) {
  prepare_out_dir(a.out);
  // Line-parallel files; blank document separators pair up with each other.
  const auto hyp = read_lines(a.hyp);
  const auto ref = read_lines(a.ref);
  const BleuStats s = bleu_stats(hyp, ref, !a.cased);
  std::ostringstream r;
  r << std::fixed << std::setprecision(2) << "BLEU = " << s.score << ", " << std::setprecision(1)
    << 100 * s.precision[0] << "/" << 100 * s.precision[1] << "/" << 100 * s.precision[2] << "/"
    << 100 * s.precision[3] << " (BP=" << std::setprecision(3) << s.brevity_penalty << ", hyp_len=" << s.hyp_length
    << ", ref_len=" << s.ref_length << ")\n";
  write_file(g_run.out / "bleu.txt", r.str());
  write_manifest(std::string("lowercase=") + (a.cased ? "0" : "1") + "\nhyp=" + a.hyp + "\nref=" + a.ref + "\n", 0);
  std::cout << r.str();
  return 0;
}

struct BuildArgs {
  std::string phenomenon, corpus, alignments, table, frequency, seeds, lexicon, out;
  std::size_t frequent_cutoff = 5000;
  std::size_t k = 10;
  std::vector<std::string> blocklist;
};

int cmd_build_testset(const BuildArgs& a) {
  prepare_out_dir(a.out);
  std::unique_ptr<LexiconMorphology> own;
  if (!a.lexicon.empty()) own = std::make_unique<LexiconMorphology>(LexiconMorphology::load(a.lexicon));
  const MorphologyProvider& morph = own ? static_cast<const MorphologyProvider&>(*own) : LexiconMorphology::toy();
  std::vector<ContrastiveInstance> out;
  std::ostringstream log;
  auto need = [](const std::string& v, const char* flag) {
    if (v.empty()) throw CLI::ValidationError(std::string(flag) + " is required for this phenomenon");
  };
  auto stats_text = [&log](const BuildStats& s) {
    log << "considered\t" << s.considered << "\nemitted\t" << s.emitted << "\n";
    for (const auto& [reason, n] : s.skipped) log << "skipped: " << reason << "\t" << n << "\n";
  };
  const Phenomenon ph = phenomenon_from_string(a.phenomenon);
  if (ph == Phenomenon::deixis) {
    need(a.corpus, "--corpus");
    const auto frags = group_and_fragment(filter_pairs(load_corpus(a.corpus)), {});
    DeixisOptions opt;
    if (!a.blocklist.empty()) {
      // --blocklist "" disables the filter.
      opt.blocklist.clear();
      for (const auto& b : a.blocklist)
        if (!b.empty()) opt.blocklist.push_back(b);
    }
    BuildStats st;
    out = build_deixis_instances(frags, morph, opt, &st);
    stats_text(st);
  } else if (ph == Phenomenon::lex_cohesion) {
    need(a.corpus, "--corpus");
    need(a.alignments, "--alignments");
    need(a.table, "--lexical-table");
    need(a.frequency, "--frequency");
    const auto pairs = load_corpus(a.corpus);
    const auto links = read_lines(a.alignments);
    if (links.size() != pairs.size())
      throw std::runtime_error("alignment file has " + std::to_string(links.size()) + " lines for " +
                               std::to_string(pairs.size()) + " corpus pairs");
    // Keep alignments attached through the overlap filter.
    std::vector<SubtitlePair> kept;
    std::vector<Alignment> kept_links;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (pairs[i].overlap < 0.9) continue;
      kept.push_back(pairs[i]);
      kept_links.push_back(parse_alignment(links[i]));
    }
    std::vector<AlignedFragment> frags;
    for (auto& f : group_and_fragment(kept, {})) {
      AlignedFragment af;
      for (std::size_t idx : f.source_index) af.alignments.push_back(kept_links[idx]);
      af.fragment = std::move(f);
      frags.push_back(std::move(af));
    }
    const auto table = LexicalTable::load(a.table);
    const auto freq = read_lines(a.frequency);
    CohesionOptions opt;
    opt.frequent_cutoff = a.frequent_cutoff;
    BuildStats st;
    out = build_cohesion_instances(frags, table, lemmatizer_from(morph), freq, morph, opt, &st);
    stats_text(st);
  } else if (ph == Phenomenon::ellipsis_vp) {
    need(a.seeds, "--seeds");
    need(a.table, "--lexical-table");
    std::ifstream in(a.seeds);
    if (!in) throw std::runtime_error("cannot read " + a.seeds);
    const auto seeds = read_ellipsis_seeds(in, a.seeds);
    VpEllipsisOptions opt;
    opt.k = a.k;
    std::vector<std::string> warnings;
    out = build_vp_ellipsis_instances(seeds, LexicalTable::load(a.table), lemmatizer_from(morph), morph, opt,
                                      &warnings);
    log << "seeds\t" << seeds.size() << "\nemitted\t" << out.size() << "\n";
    for (const auto& w : warnings) log << "warning: " << w << "\n";
  } else {
    throw CLI::ValidationError("no builder for phenomenon " + a.phenomenon);
  }
  save_testset((g_run.out / (a.phenomenon + ".txt")).string(), out);
  write_file(g_run.out / "build.log", log.str());
  write_manifest("phenomenon=" + a.phenomenon + "\nfrequent_cutoff=" + std::to_string(a.frequent_cutoff) +
                     "\nk=" + std::to_string(a.k) + "\n",
                 0);
  std::cout << log.str();
  return 0;
}

struct EvalArgs {
  std::string base, cadec, out;
  std::vector<std::string> sets;
};

int cmd_eval_consistency(const EvalArgs& a) {
  prepare_out_dir(a.out);
  BaseBundle b = load_base(a.base);
  std::unique_ptr<CadecModel> cadec = a.cadec.empty() ? nullptr : load_cadec(a.cadec, *b.model);
  const auto instances = load_sets(a.sets);
  const auto reports = reports_by_phenomenon(*b.model, cadec.get(), b.src_bpe, b.tgt_bpe, instances, b.config.translate);
  std::ofstream tsv(g_run.out / "consistency.tsv");
  for (const auto& r : reports) {
    tsv << "# " << r.phenomenon << "\n";
    r.write_tsv(tsv);
  }
  const std::string table = consistency_table(reports);
  write_file(g_run.out / "consistency.txt", table);
  write_manifest(b.config.to_text(), b.config.base_train.seed);
  std::cout << table;
  return 0;
}

struct AblateArgs {
  std::string base, train, dev, out;
  std::vector<double> ps;
  std::vector<std::string> dev_sets, test_sets;
  ConfigFlags cfg;
};

int cmd_ablate_p(const AblateArgs& a) {
  prepare_out_dir(a.out);
  BaseBundle b = load_base(a.base);
  ExperimentConfig cfg = b.config;
  if (!a.cfg.file.empty()) cfg.apply_text(read_file(a.cfg.file));
  for (const auto& s : a.cfg.sets) cfg.apply_text(s);
  if (a.cfg.seed) cfg.cadec_train.seed = *a.cfg.seed;
  const PreparedData d = prepare_data(load_corpus(a.train), load_corpus(a.dev), cfg.prepare, &b.src_bpe, &b.tgt_bpe);
  std::vector<std::vector<ContrastiveInstance>> sets;
  for (const auto& p : a.dev_sets) sets.push_back(load_testset(p));
  const auto dev_sets = interleave_pairs(sets);
  const auto test = load_sets(a.test_sets);
  write_manifest(cfg.to_text(), cfg.cadec_train.seed, "p_*/metrics.tsv");

  std::vector<std::string> phenomena;
  std::vector<std::vector<std::string>> rows;
  for (double p : a.ps) {
    ExperimentConfig c = cfg;
    c.cadec_train.mix.p = p;
    c.cadec_train.mix.validate();
    std::ostringstream name;
    name << "p_" << p;
    const fs::path leg = g_run.out / name.str();
    fs::create_directories(leg);
    write_file(leg / "experiment.conf", c.to_text());
    MetricLog log((leg / "metrics.tsv").string());
    const CadecModel cadec = train_cadec_model(*b.model, d, dev_sets, c, log, nullptr);
    save_model_checkpoint(leg / "cadec.ckpt", "cadec", cadec.config(), cadec.params());
    std::ostringstream bl;
    bl << std::fixed << std::setprecision(2) << document_bleu(*b.model, &cadec, d, c.translate);
    std::vector<std::string> row{[&] {
                                   std::ostringstream s;
                                   s << p;
                                   return s.str();
                                 }(),
                                 bl.str()};
    const auto reports = reports_by_phenomenon(*b.model, &cadec, b.src_bpe, b.tgt_bpe, test, c.translate);
    if (phenomena.empty())
      for (const auto& r : reports) phenomena.push_back(r.phenomenon);
    for (const auto& r : reports) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(1) << 100.0 * r.accuracy();
      row.push_back(s.str());
    }
    rows.push_back(row);
    std::cerr << "p=" << p << " done\n";
  }
  std::ostringstream tsv, table;
  tsv << "p\tbleu";
  table << std::left << std::setw(8) << "p" << std::right << std::setw(8) << "BLEU";
  for (const auto& ph : phenomena) {
    tsv << '\t' << ph;
    table << std::setw(14) << ph;
  }
  tsv << '\n';
  table << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) tsv << (i ? "\t" : "") << row[i];
    tsv << '\n';
    table << std::left << std::setw(8) << row[0] << std::right << std::setw(8) << row[1];
    for (std::size_t i = 2; i < row.size(); ++i) table << std::setw(14) << row[i];
    table << '\n';
  }
  write_file(g_run.out / "ablation.tsv", tsv.str());
  write_file(g_run.out / "ablation.txt", table.str());
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware document translation toolkit"};
  app.require_subcommand(1);
  g_run.argv.assign(argv, argv + argc);

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "Generate the synthetic corpus, contrastive sets and builder inputs");
  gen->add_option("--out", gs.out, "Output directory")->required();
  gen->add_option("--seed", gs.seed, "Generator seed");
  gen->add_option("--synth-config", gs.config, "Generator config (key=value lines)")->check(CLI::ExistingFile);
  gen->add_option("--fragments", gs.fragments, "Training runs");
  gen->add_option("--dev-runs", gs.dev, "Dev runs");
  gen->add_option("--test-runs", gs.test, "Test runs and contrastive pairs per phenomenon");

  CorpusArgs prep;
  auto* pd = app.add_subcommand("prepare-data", "Filter, fragment and learn BPE; writes BPE models and counts");
  pd->add_option("--train", prep.train, "Training corpus TSV")->required()->check(CLI::ExistingFile);
  pd->add_option("--dev", prep.dev, "Dev corpus TSV")->required()->check(CLI::ExistingFile);
  pd->add_option("--out", prep.out, "Output directory")->required();
  prep.cfg.add_to(pd);

  CorpusArgs tb;
  auto* trb = app.add_subcommand("train-base", "Train the context-agnostic model");
  trb->add_option("--train", tb.train, "Training corpus TSV")->required()->check(CLI::ExistingFile);
  trb->add_option("--dev", tb.dev, "Dev corpus TSV")->required()->check(CLI::ExistingFile);
  trb->add_option("--out", tb.out, "Model directory")->required();
  tb.cfg.add_to(trb);

  CadecArgs tc;
  auto* trc = app.add_subcommand("train-cadec", "Train the context-aware decoder over a frozen base model");
  trc->add_option("--base", tc.base, "Base model directory")->required()->check(CLI::ExistingDirectory);
  trc->add_option("--train", tc.train, "Training corpus TSV")->required()->check(CLI::ExistingFile);
  trc->add_option("--dev", tc.dev, "Dev corpus TSV")->required()->check(CLI::ExistingFile);
  trc->add_option("--dev-testset", tc.dev_sets, "Contrastive dev sets for the consistency stopping criterion")
      ->check(CLI::ExistingFile);
  trc->add_option("--p", tc.p, "Probability of the corrupted-reference branch");
  trc->add_option("--out", tc.out, "Model directory")->required();
  tc.cfg.add_to(trc);

  TranslateArgs tr;
  auto* trn = app.add_subcommand("translate", "Translate blank-line separated documents");
  trn->add_option("--base", tr.base, "Base model directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--cadec", tr.cadec, "CADec model directory (two-pass decoding)")->check(CLI::ExistingDirectory);
  trn->add_option("--input", tr.input, "Source text")->required()->check(CLI::ExistingFile);
  trn->add_option("--beam", tr.beam, "Beam size")->check(CLI::PositiveNumber);
  trn->add_option("--out", tr.out, "Output directory")->required();

  BleuArgs bl;
  auto* ble = app.add_subcommand("bleu", "Corpus BLEU of a hypothesis file against a reference file");
  ble->add_option("--hyp", bl.hyp, "Hypotheses")->required()->check(CLI::ExistingFile);
  ble->add_option("--ref", bl.ref, "References")->required()->check(CLI::ExistingFile);
  ble->add_flag("--cased", bl.cased, "Do not lowercase");
  ble->add_option("--out", bl.out, "Output directory")->required();

  BuildArgs bt;
  auto* bld = app.add_subcommand("build-testset", "Build a contrastive test set");
  bld->add_option("phenomenon", bt.phenomenon, "deixis, lex_cohesion or ellipsis_vp")
      ->required()
      ->check(CLI::IsMember({"deixis", "lex_cohesion", "ellipsis_vp"}));
  bld->add_option("--corpus", bt.corpus, "Corpus TSV (deixis, lex_cohesion)")->check(CLI::ExistingFile);
  bld->add_option("--alignments", bt.alignments, "Pharaoh alignments, one line per corpus pair")
      ->check(CLI::ExistingFile);
  bld->add_option("--lexical-table", bt.table, "src<TAB>tgt<TAB>prob lines")->check(CLI::ExistingFile);
  bld->add_option("--frequency", bt.frequency, "Source words, most frequent first")->check(CLI::ExistingFile);
  bld->add_option("--seeds", bt.seeds, "Ellipsis seeds")->check(CLI::ExistingFile);
  bld->add_option("--lexicon", bt.lexicon, "Morphology lexicon (default: bundled toy lexicon)")
      ->check(CLI::ExistingFile);
  bld->add_option("--frequent-cutoff", bt.frequent_cutoff, "Most frequent words excluded as entities");
  bld->add_option("--k", bt.k, "Top translations of 'do' considered");
  bld->add_option("--blocklist", bt.blocklist, "Politeness marker phrases that disqualify a fragment");
  bld->add_option("--out", bt.out, "Output directory")->required();

  EvalArgs ev;
  auto* evc = app.add_subcommand("eval-consistency", "Contrastive accuracy by phenomenon and context distance");
  evc->add_option("--base", ev.base, "Base model directory")->required()->check(CLI::ExistingDirectory);
  evc->add_option("--cadec", ev.cadec, "CADec model directory")->check(CLI::ExistingDirectory);
  evc->add_option("--testset", ev.sets, "Contrastive test sets")->required()->check(CLI::ExistingFile);
  evc->add_option("--out", ev.out, "Output directory")->required();

  AblateArgs ab;
  auto* abl = app.add_subcommand("ablate-p", "Train CADec for each p and report BLEU and accuracies");
  abl->add_option("ps", ab.ps, "Comma-separated p values")->required()->delimiter(',')->check(CLI::Range(0.0, 1.0));
  abl->add_option("--base", ab.base, "Base model directory")->required()->check(CLI::ExistingDirectory);
  abl->add_option("--train", ab.train, "Training corpus TSV")->required()->check(CLI::ExistingFile);
  abl->add_option("--dev", ab.dev, "Dev corpus TSV")->required()->check(CLI::ExistingFile);
  abl->add_option("--dev-testset", ab.dev_sets, "Contrastive dev sets")->check(CLI::ExistingFile);
  abl->add_option("--testset", ab.test_sets, "Contrastive test sets")->required()->check(CLI::ExistingFile);
  abl->add_option("--out", ab.out, "Output directory")->required();
  ab.cfg.add_to(abl);

  CLI11_PARSE(app, argc, argv);
  try {
    const auto* sub = app.get_subcommands().front();
    g_run.command = sub->get_name();
    if (sub == gen) return cmd_gen_synth(gs);
    if (sub == pd) return cmd_prepare_data(prep);
    if (sub == trb) return cmd_train_base(tb);
    if (sub == trc) return cmd_train_cadec(tc);
    if (sub == trn) return cmd_translate(tr);
    if (sub == ble) return cmd_bleu(bl);
    if (sub == bld) return cmd_build_testset(bt);
    if (sub == evc) return cmd_eval_consistency(ev);
    if (sub == abl) return cmd_ablate_p(ab);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
