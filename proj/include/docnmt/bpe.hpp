#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace docnmt {

// Reserved ids shared by every vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kSepId = 4;
inline constexpr int kNumSpecials = 5;

inline bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

/// Byte-pair encoding over whitespace-separated words.
///
/// Symbols that end a word carry the suffix "</w>" (the end-of-word marker);
/// every other symbol is a word-internal continuation, rendered "piece@@" in
/// subword text. Merges never cross word boundaries. Special symbols live in
/// ids [0, kNumSpecials) and are never produced by a merge.
class BpeModel {
 public:
  static constexpr std::string_view kEndOfWord = "</w>";
  static constexpr std::string_view kUnkMarker = "<unk>";

  /// Greedy merges of the most frequent adjacent pair; ties go to the
  /// lexicographically smallest pair. Stops early when no pair remains.
  static BpeModel train(std::span<const std::string> corpus, std::size_t num_merges);

  std::vector<int> encode(std::string_view text) const;
  /// Inverse of encode for whitespace-normalized text. BOS/EOS/PAD are
  /// dropped, UNK renders as "<unk>", SEP as a "<sep>" word.
  std::string decode(std::span<const int> ids) const;
  /// "@@ "-joined subword rendering of an encoded line.
  std::string to_subword_text(std::span<const int> ids) const;

  std::size_t vocab_size() const { return kNumSpecials + symbols_.size(); }
  std::size_t num_characters() const { return num_characters_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  /// -1 when absent.
  int id_of(const std::string& symbol) const;
  std::string symbol(int id) const;

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

 private:
  std::vector<std::string> word_symbols(std::string_view word) const;
  void add_symbol(const std::string& s);

  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, std::size_t> merge_rank_;  // "left right" -> priority
  std::vector<std::string> symbols_;                         // id - kNumSpecials -> symbol
  std::unordered_map<std::string, int> ids_;
  std::size_t num_characters_ = 0;
};

/// Splits on ASCII whitespace.
std::vector<std::string> split_words(std::string_view text);

}  // namespace docnmt
