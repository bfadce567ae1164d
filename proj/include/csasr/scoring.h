// csasr/scoring.h

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

#ifndef CSASR_SCORING_H_
#define CSASR_SCORING_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csasr/corpus.h"

namespace csasr {

enum class UnitClass { kEnglish, kMandarin, kSpecial };

struct ScoreUnit {
  std::string surface;
  UnitClass cls;
  bool operator==(const ScoreUnit&) const = default;
};

// One unit per Mandarin character and per other whitespace word (English
// lower-cased). Particles and nonlinguistic markers, merged or not, are
// special units; `strip_specials` drops them.
std::vector<ScoreUnit> TokenizeMixed(std::string_view text, bool strip_specials,
                                     const Lexicon& lexicon = Lexicon::Default());

enum class EditOp { kMatch, kSub, kDel, kIns };

struct EditCounts {
  long sub = 0, del = 0, ins = 0;
  long ref = 0;  // reference length N

  long errors() const { return sub + del + ins; }
  // 100 (S + D + I) / N; 0 when both sides are empty.
  double Mer() const;
  EditCounts& operator+=(const EditCounts& o);
  bool operator==(const EditCounts&) const = default;
};

struct AlignStep {
  EditOp op;
  int ref = -1;  // index, -1 for insertions
  int hyp = -1;  // index, -1 for deletions
};

struct Alignment {
  EditCounts counts;
  std::vector<AlignStep> steps;
};

// Levenshtein with unit costs. Among minimum-cost alignments the one with the
// fewest insertions (hence fewest deletions) wins; remaining ties prefer
// substitution, then deletion, then insertion at each backtrace step.
Alignment EditDistance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
Alignment EditDistance(const std::vector<ScoreUnit>& ref, const std::vector<ScoreUnit>& hyp);

struct SwitchStats {
  long points = 0;  // adjacent reference Mandarin/English pairs
  long errors = 0;  // of which a flank is not aligned as a match
  double Rate() const { return points ? 100.0 * errors / points : 0.0; }
  SwitchStats& operator+=(const SwitchStats& o) {
    points += o.points;
    errors += o.errors;
    return *this;
  }
};

SwitchStats SwitchPointStats(const std::vector<ScoreUnit>& ref, const Alignment& alignment);

struct ScoredUtterance {
  std::string id;
  std::optional<UttClass> utt_class;
  EditCounts counts;
  SwitchStats switches;
  bool missing = false;
};

struct ScoreReport {
  bool stripped = false;
  EditCounts total;
  std::map<std::string, EditCounts> by_class;  // "CS", "MAN", "ENG", "OTHER"
  SwitchStats switches;
  std::vector<std::string> missing;  // reference ids without a hypothesis
  std::vector<ScoredUtterance> utterances;
};

struct RefEntry {
  std::string id;
  std::string text;
};

// Pooled MER. Throws std::invalid_argument if a hypothesis id has no
// reference. Missing hypotheses count as empty and are listed.
ScoreReport ScoreCorpus(const std::vector<RefEntry>& refs,
                        const std::map<std::string, std::string>& hyps, bool strip_specials,
                        const Lexicon& lexicon = Lexicon::Default());

// Aligned-column table, one row per class.
std::string FormatScoreTable(const ScoreReport& with, const ScoreReport& without);
// One JSON object per line.
std::string ScoreReportJsonLines(const ScoreReport& r);

}  // namespace csasr

#endif  // CSASR_SCORING_H_
