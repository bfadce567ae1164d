// csasr/subword.h

// Copyright 2026 The csasr Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CSASR_SUBWORD_H_
#define CSASR_SUBWORD_H_

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csasr/corpus.h"

namespace csasr {

// Appended to the last symbol of every word.
inline constexpr std::string_view kEndOfWord = "</w>";

class MergeTable {
 public:
  using Pair = std::pair<std::string, std::string>;

  void Append(const std::string& left, const std::string& right);
  std::size_t size() const { return merges_.size(); }
  const Pair& at(std::size_t rank) const { return merges_.at(rank); }
  const std::vector<Pair>& merges() const { return merges_; }
  // Rank of a pair, or -1.
  int Rank(const std::string& left, const std::string& right) const;
  // The first n merges.
  MergeTable Prefix(std::size_t n) const;

  // "rank\tleft\tright" per line, ranks 0, 1, 2, ...
  void Save(const std::string& path) const;
  static MergeTable Load(const std::string& path);

  bool operator==(const MergeTable& o) const { return merges_ == o.merges_; }

 private:
  std::vector<Pair> merges_;
  std::map<Pair, int> rank_;
};

// Initial segmentation: one symbol per character, kEndOfWord on the last.
std::vector<std::string> WordSymbols(std::string_view word);

// Repeatedly merges the most frequent adjacent pair (count weighted by word
// frequency); ties go to the lexicographically smallest (left, right). Stops
// early when no pair is left.
MergeTable TrainBpe(const std::map<std::string, long>& word_counts, int num_merges);

// Applies merges lowest rank first, each to all its occurrences.
std::vector<std::string> ApplyBpe(std::string_view word, const MergeTable& table);
// Concatenates subwords of one word and drops the end-of-word marker.
std::string JoinSubwords(const std::vector<std::string>& units);

// Every symbol BPE can emit for the words: initial symbols plus merge results.
std::vector<std::string> BpeInventory(const std::map<std::string, long>& word_counts,
                                      const MergeTable& table);

// Smallest merge prefix whose inventory has exactly n symbols. Throws
// std::invalid_argument naming the attainable range when n is out of reach.
MergeTable MergesForInventory(const std::map<std::string, long>& word_counts,
                              const MergeTable& table, std::size_t n);

inline constexpr std::string_view kBlank = "<blank>";
inline constexpr std::string_view kSosEos = "<sos/eos>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kSpace = "<space>";

class MixedVocab {
 public:
  static constexpr int kBlankId = 0;
  static constexpr int kSosEosId = 1;
  static constexpr int kUnkId = 2;

  // All six specials: <blank>, <sos/eos>, <unk>, <space>, <dispar>, <nlsyms>.
  MixedVocab();
  // Only <blank>, <sos/eos> and <unk>; for very small test vocabularies.
  static MixedVocab Minimal();

  // Returns the existing id if present; a class conflict throws.
  int Add(const std::string& unit, LangClass cls);
  int Id(std::string_view unit) const;  // -1 if absent
  bool Contains(std::string_view unit) const { return Id(unit) >= 0; }
  const std::string& Unit(int id) const { return units_.at(id); }
  LangClass Class(int id) const { return classes_.at(id); }
  std::size_t size() const { return units_.size(); }
  std::size_t CountClass(LangClass c) const;
  // Column -> class index, for the class-factored output layer.
  std::vector<int> ClassOfEachUnit() const;

  // "unit\tCLASS" per line in id order.
  void Save(const std::string& path) const;
  static MixedVocab Load(const std::string& path);

  bool operator==(const MixedVocab& o) const {
    return units_ == o.units_ && classes_ == o.classes_;
  }

 private:
  explicit MixedVocab(bool all_specials);
  std::vector<std::string> units_;
  std::vector<LangClass> classes_;
  std::unordered_map<std::string, int> index_;
};

enum class VocabMode { kChar, kSubword };

struct BuildVocabOptions {
  VocabMode mode = VocabMode::kChar;
  // Subword mode: English inventory size n; 0 keeps every merge in `merges`.
  std::size_t num_subwords = 0;
};

// Encoder/decoder between transcripts and unit ids.
class UnitCodec {
 public:
  UnitCodec(MixedVocab vocab, VocabMode mode, MergeTable merges, Lexicon lexicon);

  // Unknown units map to <unk>; `unk_count`, if given, receives how many.
  std::vector<int> Encode(std::string_view text, std::size_t* unk_count = nullptr) const;
  // Surface text with tokens separated by single spaces.
  std::string Decode(const std::vector<int>& ids) const;
  // Units as strings, before id lookup.
  std::vector<std::string> Segment(std::string_view text) const;

  const MixedVocab& vocab() const { return vocab_; }
  VocabMode mode() const { return mode_; }
  const MergeTable& merges() const { return merges_; }
  const Lexicon& lexicon() const { return lexicon_; }

 private:
  MixedVocab vocab_;
  VocabMode mode_;
  MergeTable merges_;
  Lexicon lexicon_;
};

// English word counts over the transcripts.
std::map<std::string, long> EnglishWordCounts(const std::vector<std::string>& texts,
                                              const Lexicon& lexicon);

// Vocabulary over the transcripts. Mandarin characters are MANDARIN, English
// characters / subwords ENGLISH, everything else NEUTRAL; units are sorted
// within each class. In subword mode `merges` is trimmed to the prefix that
// yields exactly `num_subwords` English units.
UnitCodec BuildCodec(const std::vector<std::string>& texts, const Lexicon& lexicon,
                     const BuildVocabOptions& opts, const MergeTable& merges = {});

}  // namespace csasr

#endif  // CSASR_SUBWORD_H_
