// csasr/corpus.h

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

#ifndef CSASR_CORPUS_H_
#define CSASR_CORPUS_H_

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace csasr {

inline constexpr std::string_view kDispar = "<dispar>";
inline constexpr std::string_view kNlsyms = "<nlsyms>";

enum class TokenKind {
  kMandarinChar,
  kEnglishWord,
  kDiscourseParticle,
  kNonlinguistic,
  kOtherLanguage,
};

enum class LangClass { kMandarin = 0, kEnglish = 1, kNeutral = 2 };
inline constexpr int kNumLangClasses = 3;

enum class UttClass { kCS, kMAN, kENG };

std::string_view LangClassName(LangClass c);
std::string_view UttClassName(UttClass c);

// Discourse particles / hesitations and nonlinguistic signal markers.
// Anything written in parentheses or square brackets, e.g. "(laughing)" or
// "[noise]", also counts as nonlinguistic.
struct Lexicon {
  std::set<std::string> particles;
  std::set<std::string> nonlinguistic;

  bool IsParticle(std::string_view s) const;
  bool IsNonlinguistic(std::string_view s) const;

  // Text format: one entry per line, "<kind>\t<form>" with kind in
  // {particle, nonlinguistic}; '#' starts a comment line.
  static Lexicon Load(const std::string& path);
  void Save(const std::string& path) const;
  static Lexicon Default();
};

struct Token {
  std::string surface;
  TokenKind kind;
  bool operator==(const Token&) const = default;
};

struct Transcript {
  std::vector<Token> tokens;

  // Tokens joined by single spaces.
  std::string Text() const;
  bool operator==(const Transcript&) const = default;
};

// Whitespace-separated words; runs of CJK characters inside a word become one
// mandarin-char token per character.
Transcript ParseTranscript(std::string_view text, const Lexicon& lexicon);
TokenKind ClassifyToken(std::string_view surface, const Lexicon& lexicon);

// Label-2 conversion: particles become <dispar>, nonlinguistic markers become
// <nlsyms>. Token count is preserved.
Transcript MergeNonlinguistic(const Transcript& t, const Lexicon& lexicon);

std::vector<LangClass> TagLanguages(const Transcript& t);
LangClass LangClassOf(TokenKind kind);

// Empty if the transcript has neither mandarin nor english tokens.
std::optional<UttClass> ClassifyUtterance(const Transcript& t);

struct ManifestEntry {
  std::string id;
  std::string audio_path;
  std::string speaker;
  std::string transcript;
};

struct Manifest {
  std::string split;
  std::vector<ManifestEntry> entries;
};

// TSV: id, audio path, speaker, transcript. Audio paths are stored as written;
// relative paths are resolved against the manifest's directory on read.
Manifest ReadManifest(const std::string& path, const std::string& split);
void WriteManifest(const std::string& path, const Manifest& manifest);
// Throws on duplicate ids.
void ValidateManifest(const Manifest& manifest);

struct CorpusStats {
  std::size_t utterances = 0;
  std::size_t speakers = 0;
  double hours = 0.0;
  double cs_pct = 0.0, man_pct = 0.0, eng_pct = 0.0;
  std::size_t counted_pairs = 0;
  std::size_t switches_m2e = 0, switches_e2m = 0;
  double switch_ratio = 0.0;
  double m2e_ratio = 0.0, e2m_ratio = 0.0;
};

// Switch points are adjacent MANDARIN/ENGLISH token pairs of differing
// class; NEUTRAL tokens are skipped, so they neither count as pairs nor break
// one. `durations_sec`, if non-empty, is parallel to the manifest entries.
CorpusStats ComputeCorpusStats(const Manifest& manifest, const Lexicon& lexicon,
                               const std::vector<double>& durations_sec = {});

// Aligned text table with the columns of a corpus statistics table:
// set, #spk, #utt, #hrs, CS%, MAN%, ENG%, switch%.
std::string FormatStatsTable(
    const std::vector<std::pair<std::string, CorpusStats>>& rows);

}  // namespace csasr

#endif  // CSASR_CORPUS_H_
