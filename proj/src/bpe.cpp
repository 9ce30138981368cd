#include "docnmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace docnmt {

namespace {

const char* const kSpecialNames[kNumSpecials] = {"<pad>", "<s>", "</s>", "<unk>", "<sep>"};

std::string merge_key(const std::string& a, const std::string& b) { return a + ' ' + b; }

// UTF-8 code points of `word`; malformed bytes are taken one at a time.
std::vector<std::string> characters(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, word.size() - i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> initial_symbols(std::string_view word) {
  auto chars = characters(word);
  if (!chars.empty()) chars.back() += BpeModel::kEndOfWord;
  return chars;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      out.push_back(left + right);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

void BpeModel::add_symbol(const std::string& s) {
  if (ids_.count(s)) return;
  ids_[s] = static_cast<int>(kNumSpecials + symbols_.size());
  symbols_.push_back(s);
}

BpeModel BpeModel::train(std::span<const std::string> corpus, std::size_t num_merges) {
  std::map<std::string, long> word_counts;
  for (const auto& line : corpus)
    for (auto& w : split_words(line)) ++word_counts[w];
  if (word_counts.empty()) throw std::invalid_argument("cannot train BPE on an empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  std::set<std::string> alphabet;
  for (const auto& [w, c] : word_counts) {
    words.push_back(initial_symbols(w));
    counts.push_back(c);
    alphabet.insert(words.back().begin(), words.back().end());
  }

  BpeModel model;
  for (const auto& s : alphabet) model.add_symbol(s);
  model.num_characters_ = alphabet.size();

  for (std::size_t m = 0; m < num_merges; ++m) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i) pair_counts[{words[w][i], words[w][i + 1]}] += counts[w];
    if (pair_counts.empty()) break;
    // std::map iterates in lexicographic order, so strict > keeps the smallest tied pair.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    for (auto& w : words) apply_merge(w, left, right);
    model.merge_rank_[merge_key(left, right)] = model.merges_.size();
    model.merges_.emplace_back(left, right);
    model.add_symbol(left + right);
  }
  return model;
}

std::vector<std::string> BpeModel::word_symbols(std::string_view word) const {
  auto symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find(merge_key(symbols[i], symbols[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    apply_merge(symbols, merges_[best_rank].first, merges_[best_rank].second);
  }
  return symbols;
}

std::vector<int> BpeModel::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& word : split_words(text)) {
    for (const auto& s : word_symbols(word)) {
      auto it = ids_.find(s);
      ids.push_back(it == ids_.end() ? kUnkId : it->second);
    }
  }
  return ids;
}

std::string BpeModel::decode(std::span<const int> ids) const {
  std::string text;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
      throw std::out_of_range("unknown token id " + std::to_string(id));
    }
    if (id == kUnkId) {
      text += kUnkMarker;
    } else if (id == kSepId) {
      text += "<sep> ";
    } else if (!is_special(id)) {
      const std::string& s = symbols_[static_cast<std::size_t>(id - kNumSpecials)];
      if (s.size() >= kEndOfWord.size() && s.compare(s.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
        text.append(s, 0, s.size() - kEndOfWord.size());
        text += ' ';
      } else {
        text += s;
      }
    }
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

std::string BpeModel::to_subword_text(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ' ';
    std::string s = symbol(id);
    if (!is_special(id)) {
      if (s.ends_with(kEndOfWord)) s.resize(s.size() - kEndOfWord.size());
      else s += "@@";
    }
    out += s;
  }
  return out;
}

int BpeModel::id_of(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? -1 : it->second;
}

std::string BpeModel::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) throw std::out_of_range("unknown token id");
  if (is_special(id)) return kSpecialNames[id];
  return symbols_[static_cast<std::size_t>(id - kNumSpecials)];
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write BPE model: " + path);
  out << "#bpe version=1 merges=" << merges_.size() << " vocab=" << vocab_size()
      << " characters=" << num_characters_ << " end_of_word=" << kEndOfWord << " continuation=@@\n";
  for (const auto& [a, b] : merges_) out << a << ' ' << b << '\n';
  for (std::size_t id = 0; id < vocab_size(); ++id) out << symbol(static_cast<int>(id)) << '\t' << id << '\n';
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open BPE model: " + path);
  std::string header;
  std::getline(in, header);
  std::size_t n_merges = 0, n_vocab = 0, n_chars = 0;
  {
    std::istringstream hs(header);
    std::string tok;
    hs >> tok;
    if (tok != "#bpe") throw std::runtime_error("not a BPE model file: " + path);
    while (hs >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "merges") n_merges = std::stoul(val);
      else if (key == "vocab") n_vocab = std::stoul(val);
      else if (key == "characters") n_chars = std::stoul(val);
    }
  }
  BpeModel model;
  model.num_characters_ = n_chars;
  std::string line;
  for (std::size_t i = 0; i < n_merges; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated BPE merges in " + path);
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw std::runtime_error("bad merge line " + std::to_string(i + 2));
    model.merge_rank_[line] = i;
    model.merges_.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  for (std::size_t i = 0; i < n_vocab; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated BPE vocabulary in " + path);
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw std::runtime_error("bad vocabulary line in " + path);
    const auto id = std::stoul(line.substr(tab + 1));
    if (id != i) throw std::runtime_error("vocabulary ids must be dense and ordered in " + path);
    if (id >= static_cast<std::size_t>(kNumSpecials)) model.add_symbol(line.substr(0, tab));
  }
  return model;
}

}  // namespace docnmt
