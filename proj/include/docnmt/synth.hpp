#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "docnmt/data.hpp"
#include "docnmt/testset_builder.hpp"

namespace docnmt {

/// Knobs of the toy English -> romanized Russian corpus.
///
/// Every run is 4 sentences. The first source sentence opens with a register
/// marker ("sir" or "buddy") followed by a second-person clause; its target
/// uses the matching V or T forms. Later sentences carry second-person forms
/// with probability `you_rate` (rendered in the run's register, which their own
/// source does not reveal) and person names with probability `name_rate`.
/// Each name has two target renderings; a run sticks to one per name.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_fragments = 5000;  // training runs
  std::size_t n_dev = 2000;        // dev runs
  std::size_t n_test = 200;        // test runs (also: pairs of contrastive instances per phenomenon)
  double you_rate = 0.01;
  double name_rate = 0.5;
  double name_repeat = 0.9;  // chance a later name mention reuses an earlier name of the run
  double adverb_rate = 0.3;
  double noise_rate = 0.02;  // isolated low-overlap pairs in the training stream
  std::size_t n_ellipsis = 60;

  std::string to_text() const;
  static SynthConfig from_text(const std::string& text);
};

struct SynthCorpus {
  std::vector<SubtitlePair> train;
  std::vector<std::string> train_alignments;  // Pharaoh, parallel to train
  std::vector<SubtitlePair> dev;
  std::vector<std::string> dev_alignments;
  std::vector<SubtitlePair> test;
  std::vector<ContrastiveInstance> deixis_dev;
  std::vector<ContrastiveInstance> cohesion_dev;
  std::vector<ContrastiveInstance> deixis_test;
  std::vector<ContrastiveInstance> cohesion_test;
  std::vector<EllipsisSeed> ellipsis_seeds;
  LexicalTable lexical_table;               // relative frequencies of aligned training links
  std::vector<std::string> frequency_list;  // training source tokens, most frequent first
};

SynthCorpus gen_synthetic_corpus(const SynthConfig& config);

/// Register markers of the generator.
inline constexpr const char* kPoliteMarker = "sir";
inline constexpr const char* kFamiliarMarker = "buddy";

/// Register announced by the marker of a fragment's first source sentence.
Politeness synth_marker_register(const std::string& first_src);

/// Empty when a run obeys the generator's rules: marker only in the first
/// source sentence, and every target sentence either register-free or in the
/// marker's register.
std::string synth_run_problem(std::span<const SubtitlePair> run);

}  // namespace docnmt
