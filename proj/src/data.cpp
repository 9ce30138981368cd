#include "docnmt/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "docnmt/bpe.hpp"

namespace docnmt {

std::vector<SubtitlePair> filter_pairs(std::span<const SubtitlePair> pairs, double min_overlap) {
  if (min_overlap < 0.0 || min_overlap > 1.0) throw std::invalid_argument("min_overlap must be in [0, 1]");
  std::vector<SubtitlePair> out;
  for (const auto& p : pairs)
    if (p.overlap >= min_overlap) out.push_back(p);
  return out;
}

std::vector<std::vector<SubtitlePair>> split_runs(std::span<const SubtitlePair> pairs, double max_gap_seconds) {
  std::vector<std::vector<SubtitlePair>> runs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0 && pairs[i].start_time < pairs[i - 1].start_time) {
      throw DataError("pairs are not in temporal order at index " + std::to_string(i) + " (start " +
                      std::to_string(pairs[i].start_time) + " < " + std::to_string(pairs[i - 1].start_time) + ")");
    }
    if (i == 0 || pairs[i].start_time - pairs[i - 1].start_time > max_gap_seconds) runs.emplace_back();
    runs.back().push_back(pairs[i]);
  }
  return runs;
}

std::vector<Fragment> group_and_fragment(std::span<const SubtitlePair> pairs, const FragmentOptions& options) {
  if (options.window < 2) throw std::invalid_argument("fragment window must be at least 2");
  std::vector<Fragment> out;
  std::size_t offset = 0;
  auto emit = [&out, &offset](const std::vector<SubtitlePair>& run, std::size_t begin, std::size_t end) {
    Fragment f;
    for (std::size_t i = begin; i < end; ++i) f.source_index.push_back(offset + i);
    f.context.assign(run.begin() + static_cast<std::ptrdiff_t>(begin), run.begin() + static_cast<std::ptrdiff_t>(end - 1));
    f.current = run[end - 1];
    out.push_back(std::move(f));
  };
  for (const auto& run : split_runs(pairs, options.max_gap_seconds)) {
    if (options.include_short_prefixes)
      for (std::size_t len = 2; len < options.window && len <= run.size(); ++len) emit(run, 0, len);
    for (std::size_t start = 0; start + options.window <= run.size(); ++start) emit(run, start, start + options.window);
    offset += run.size();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus TSV

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + s + "'");
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::vector<SubtitlePair> read_corpus(std::istream& in, const std::string& name) {
  std::vector<SubtitlePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto f = split_tabs(line);
    if (f.size() != 5) throw DataError(where + ": expected 5 tab-separated fields, got " + std::to_string(f.size()));
    SubtitlePair p{f[0], f[1], parse_double(f[2], where), parse_double(f[3], where), parse_double(f[4], where)};
    if (p.overlap < 0.0 || p.overlap > 1.0) throw DataError(where + ": overlap outside [0, 1]");
    if (p.end_time < p.start_time) throw DataError(where + ": end time precedes start time");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_corpus(std::ostream& out, std::span<const SubtitlePair> pairs) {
  char buf[64];
  auto num = [&buf](double v) {
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  for (const auto& p : pairs) {
    if (p.src.find_first_of("\t\n") != std::string::npos || p.tgt.find_first_of("\t\n") != std::string::npos)
      throw DataError("sentence contains a tab or newline: " + p.src);
    out << p.src << '\t' << p.tgt << '\t' << num(p.start_time) << '\t' << num(p.end_time) << '\t' << num(p.overlap)
        << '\n';
  }
}

std::vector<SubtitlePair> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path);
  return read_corpus(in, path);
}

void save_corpus(const std::string& path, std::span<const SubtitlePair> pairs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus: " + path);
  write_corpus(out, pairs);
}

// ---------------------------------------------------------------------------
// Test sets

std::string to_string(Phenomenon p) {
  switch (p) {
    case Phenomenon::deixis: return "deixis";
    case Phenomenon::lex_cohesion: return "lex_cohesion";
    case Phenomenon::ellipsis_infl: return "ellipsis_infl";
    case Phenomenon::ellipsis_vp: return "ellipsis_vp";
  }
  return "?";
}

Phenomenon phenomenon_from_string(const std::string& s) {
  if (s == "deixis") return Phenomenon::deixis;
  if (s == "lex_cohesion") return Phenomenon::lex_cohesion;
  if (s == "ellipsis_infl") return Phenomenon::ellipsis_infl;
  if (s == "ellipsis_vp") return Phenomenon::ellipsis_vp;
  throw std::invalid_argument("unknown phenomenon '" + s + "'");
}

std::string instance_problem(const ContrastiveInstance& inst) {
  if (inst.src.empty() || inst.src.size() > 4) return "needs 1-4 source sentences";
  if (inst.true_tgt.size() != inst.src.size()) return "true translation has a different sentence count than the source";
  if (inst.contrastive.empty()) return "no contrastive translations";
  for (std::size_t k = 0; k < inst.contrastive.size(); ++k) {
    if (inst.contrastive[k].size() != inst.true_tgt.size())
      return "contrastive group " + std::to_string(k + 1) + " has a different sentence count than the true group";
    if (inst.contrastive[k] == inst.true_tgt)
      return "contrastive group " + std::to_string(k + 1) + " equals the true group";
  }
  if (inst.distance && (*inst.distance < 1 || *inst.distance > 3)) return "distance must be 1-3 or n/a";
  return {};
}

namespace {

struct RawBlock {
  std::size_t first_line = 0;
  std::map<std::string, std::string> header;
  std::map<std::size_t, std::string> s;
  std::map<std::size_t, std::string> t;
  std::map<std::size_t, std::map<std::size_t, std::string>> c;
};

std::size_t parse_index(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v == 0) throw DataError(where + ": bad index '" + s + "'");
  return v;
}

std::vector<RawBlock> read_blocks(std::istream& in, const std::string& name) {
  std::vector<RawBlock> blocks;
  bool open = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    const std::string where = name + ":" + std::to_string(lineno);
    if (line.find_first_not_of(" \t") == std::string::npos) {
      open = false;
      continue;
    }
    if (line[0] == '#') {
      if (open) throw DataError(where + ": header inside a block (missing blank line?)");
      blocks.emplace_back();
      blocks.back().first_line = lineno;
      open = true;
      std::istringstream hs(line.substr(1));
      std::string kv;
      while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError(where + ": header field without '=': " + kv);
        blocks.back().header[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    if (!open) throw DataError(where + ": record outside a block (missing '# phenomenon=' header)");
    const auto sp = line.find(' ');
    const std::string tag = line.substr(0, sp);
    const std::string text = sp == std::string::npos ? std::string() : line.substr(sp + 1);
    RawBlock& b = blocks.back();
    auto put = [&](std::map<std::size_t, std::string>& m, std::size_t idx) {
      if (!m.emplace(idx, text).second) throw DataError(where + ": duplicate record " + tag);
    };
    if (tag.size() >= 2 && tag[0] == 'S') {
      put(b.s, parse_index(tag.substr(1), where));
    } else if (tag.size() >= 2 && tag[0] == 'T') {
      put(b.t, parse_index(tag.substr(1), where));
    } else if (tag.size() >= 4 && tag[0] == 'C' && tag.find('.') != std::string::npos) {
      const auto dot = tag.find('.');
      put(b.c[parse_index(tag.substr(1, dot - 1), where)], parse_index(tag.substr(dot + 1), where));
    } else {
      throw DataError(where + ": unknown record type '" + tag + "'");
    }
  }
  return blocks;
}

std::vector<std::string> dense(const std::map<std::size_t, std::string>& m, const std::string& what,
                               const std::string& where) {
  std::vector<std::string> out;
  std::size_t expect = 1;
  for (const auto& [idx, text] : m) {
    if (idx != expect) throw DataError(where + ": " + what + " indices must run 1..n without gaps");
    out.push_back(text);
    ++expect;
  }
  return out;
}

std::optional<int> parse_distance(const std::map<std::string, std::string>& header, const std::string& where) {
  auto it = header.find("distance");
  if (it == header.end() || it->second == "n/a") return std::nullopt;
  const int d = static_cast<int>(parse_index(it->second, where));
  return d;
}

std::string distance_text(const std::optional<int>& d) { return d ? std::to_string(*d) : "n/a"; }

}  // namespace

std::vector<ContrastiveInstance> read_testset(std::istream& in, const std::string& name) {
  std::vector<ContrastiveInstance> out;
  for (const auto& b : read_blocks(in, name)) {
    const std::string where = name + ":" + std::to_string(b.first_line);
    ContrastiveInstance inst;
    auto ph = b.header.find("phenomenon");
    if (ph == b.header.end()) throw DataError(where + ": header lacks phenomenon=");
    try {
      inst.phenomenon = phenomenon_from_string(ph->second);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    inst.distance = parse_distance(b.header, where);
    inst.src = dense(b.s, "S", where);
    inst.true_tgt = dense(b.t, "T", where);
    std::size_t expect = 1;
    for (const auto& [k, group] : b.c) {
      if (k != expect++) throw DataError(where + ": contrastive group numbers must run 1..n without gaps");
      inst.contrastive.push_back(dense(group, "C" + std::to_string(k), where));
    }
    if (auto problem = instance_problem(inst); !problem.empty())
      throw DataError(where + ": rejected instance #" + std::to_string(out.size() + 1) + ": " + problem);
    out.push_back(std::move(inst));
  }
  return out;
}

void write_testset(std::ostream& out, std::span<const ContrastiveInstance> instances) {
  bool first = true;
  for (const auto& inst : instances) {
    if (auto problem = instance_problem(inst); !problem.empty()) throw DataError("cannot save invalid instance: " + problem);
    if (!first) out << '\n';
    first = false;
    out << "# phenomenon=" << to_string(inst.phenomenon) << " distance=" << distance_text(inst.distance) << '\n';
    for (std::size_t i = 0; i < inst.src.size(); ++i) out << 'S' << i + 1 << ' ' << inst.src[i] << '\n';
    for (std::size_t i = 0; i < inst.true_tgt.size(); ++i) out << 'T' << i + 1 << ' ' << inst.true_tgt[i] << '\n';
    for (std::size_t k = 0; k < inst.contrastive.size(); ++k)
      for (std::size_t i = 0; i < inst.contrastive[k].size(); ++i)
        out << 'C' << k + 1 << '.' << i + 1 << ' ' << inst.contrastive[k][i] << '\n';
  }
}

std::vector<ContrastiveInstance> load_testset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open test set: " + path);
  return read_testset(in, path);
}

void save_testset(const std::string& path, std::span<const ContrastiveInstance> instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write test set: " + path);
  write_testset(out, instances);
}

std::vector<EllipsisSeed> read_ellipsis_seeds(std::istream& in, const std::string& name) {
  std::vector<EllipsisSeed> out;
  for (const auto& b : read_blocks(in, name)) {
    const std::string where = name + ":" + std::to_string(b.first_line);
    EllipsisSeed seed;
    seed.distance = parse_distance(b.header, where);
    seed.src = dense(b.s, "S", where);
    seed.tgt = dense(b.t, "T", where);
    if (!b.c.empty()) throw DataError(where + ": seed examples carry no contrastive groups");
    if (seed.src.empty() || seed.src.size() != seed.tgt.size()) throw DataError(where + ": S and T counts differ");
    auto it = b.header.find("verb");
    if (it == b.header.end()) throw DataError(where + ": header lacks verb=<sentence>.<token>");
    const auto dot = it->second.find('.');
    if (dot == std::string::npos) throw DataError(where + ": verb= must be <sentence>.<token>");
    seed.verb_sentence = parse_index(it->second.substr(0, dot), where) - 1;
    seed.verb_token = parse_index(it->second.substr(dot + 1), where) - 1;
    if (seed.verb_sentence >= seed.tgt.size() || seed.verb_token >= tokens_of(seed.tgt[seed.verb_sentence]).size())
      throw DataError(where + ": verb position outside the translation");
    out.push_back(std::move(seed));
  }
  return out;
}

void write_ellipsis_seeds(std::ostream& out, std::span<const EllipsisSeed> seeds) {
  bool first = true;
  for (const auto& s : seeds) {
    if (!first) out << '\n';
    first = false;
    out << "# phenomenon=ellipsis_vp distance=" << distance_text(s.distance) << " verb=" << s.verb_sentence + 1 << '.'
        << s.verb_token + 1 << '\n';
    for (std::size_t i = 0; i < s.src.size(); ++i) out << 'S' << i + 1 << ' ' << s.src[i] << '\n';
    for (std::size_t i = 0; i < s.tgt.size(); ++i) out << 'T' << i + 1 << ' ' << s.tgt[i] << '\n';
  }
}

std::vector<std::string> tokens_of(const std::string& sentence) { return split_words(sentence); }

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace docnmt
