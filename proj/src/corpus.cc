// src/corpus.cc

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

#include "csasr/corpus.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "csasr/text.h"

namespace csasr {

std::string_view LangClassName(LangClass c) {
  switch (c) {
    case LangClass::kMandarin: return "MANDARIN";
    case LangClass::kEnglish: return "ENGLISH";
    case LangClass::kNeutral: return "NEUTRAL";
  }
  return "?";
}

std::string_view UttClassName(UttClass c) {
  switch (c) {
    case UttClass::kCS: return "CS";
    case UttClass::kMAN: return "MAN";
    case UttClass::kENG: return "ENG";
  }
  return "?";
}

bool Lexicon::IsParticle(std::string_view s) const {
  return s == kDispar || particles.count(ToLowerAscii(s)) > 0;
}

bool Lexicon::IsNonlinguistic(std::string_view s) const {
  if (s == kNlsyms || nonlinguistic.count(std::string(s)) > 0) return true;
  if (s.size() >= 2 && ((s.front() == '(' && s.back() == ')') ||
                        (s.front() == '[' && s.back() == ']')))
    return true;
  return false;
}

Lexicon Lexicon::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read lexicon " + path);
  Lexicon lex;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto f = SplitString(line, '\t');
    if (f.size() != 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected <kind>\\t<form>");
    if (f[0] == "particle") {
      lex.particles.insert(ToLowerAscii(f[1]));
    } else if (f[0] == "nonlinguistic") {
      lex.nonlinguistic.insert(f[1]);
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown kind " + f[0]);
    }
  }
  return lex;
}

void Lexicon::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& p : particles) out << "particle\t" << p << "\n";
  for (const auto& n : nonlinguistic) out << "nonlinguistic\t" << n << "\n";
}

Lexicon Lexicon::Default() {
  Lexicon lex;
  lex.particles = {"lah", "hmm", "leh", "lor", "meh", "ah", "uh", "um", "orh", "mah"};
  lex.nonlinguistic = {"(laughing)", "(breath)", "(cough)", "[noise]"};
  return lex;
}

std::string Transcript::Text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

TokenKind ClassifyToken(std::string_view surface, const Lexicon& lexicon) {
  if (lexicon.IsNonlinguistic(surface)) return TokenKind::kNonlinguistic;
  if (lexicon.IsParticle(surface)) return TokenKind::kDiscourseParticle;
  if (IsCjkChar(surface)) return TokenKind::kMandarinChar;
  if (IsEnglishWord(surface)) return TokenKind::kEnglishWord;
  return TokenKind::kOtherLanguage;
}

Transcript ParseTranscript(std::string_view text, const Lexicon& lexicon) {
  Transcript t;
  for (const std::string& word : SplitWhitespace(text)) {
    if (lexicon.IsNonlinguistic(word) || lexicon.IsParticle(word)) {
      t.tokens.push_back({word, ClassifyToken(word, lexicon)});
      continue;
    }
    std::string run;
    auto flush = [&]() {
      if (run.empty()) return;
      t.tokens.push_back({run, ClassifyToken(run, lexicon)});
      run.clear();
    };
    for (const std::string& ch : Utf8Chars(word)) {
      if (IsCjkChar(ch)) {
        flush();
        t.tokens.push_back({ch, TokenKind::kMandarinChar});
      } else {
        run += ch;
      }
    }
    flush();
  }
  return t;
}

Transcript MergeNonlinguistic(const Transcript& t, const Lexicon& lexicon) {
  Transcript out;
  out.tokens.reserve(t.tokens.size());
  for (const Token& tok : t.tokens) {
    TokenKind kind = tok.kind;
    if (kind != TokenKind::kDiscourseParticle && kind != TokenKind::kNonlinguistic)
      kind = ClassifyToken(tok.surface, lexicon);
    switch (kind) {
      case TokenKind::kDiscourseParticle:
        out.tokens.push_back({std::string(kDispar), TokenKind::kDiscourseParticle});
        break;
      case TokenKind::kNonlinguistic:
        out.tokens.push_back({std::string(kNlsyms), TokenKind::kNonlinguistic});
        break;
      default:
        out.tokens.push_back(tok);
    }
  }
  return out;
}

LangClass LangClassOf(TokenKind kind) {
  switch (kind) {
    case TokenKind::kMandarinChar: return LangClass::kMandarin;
    case TokenKind::kEnglishWord: return LangClass::kEnglish;
    default: return LangClass::kNeutral;
  }
}

std::vector<LangClass> TagLanguages(const Transcript& t) {
  std::vector<LangClass> tags;
  tags.reserve(t.tokens.size());
  for (const Token& tok : t.tokens) tags.push_back(LangClassOf(tok.kind));
  return tags;
}

std::optional<UttClass> ClassifyUtterance(const Transcript& t) {
  bool man = false, eng = false;
  for (const Token& tok : t.tokens) {
    man = man || tok.kind == TokenKind::kMandarinChar;
    eng = eng || tok.kind == TokenKind::kEnglishWord;
  }
  if (man && eng) return UttClass::kCS;
  if (man) return UttClass::kMAN;
  if (eng) return UttClass::kENG;
  return std::nullopt;
}

Manifest ReadManifest(const std::string& path, const std::string& split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path);
  Manifest m;
  m.split = split;
  std::filesystem::path base =
      std::filesystem::absolute(std::filesystem::path(path)).parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = SplitString(line, '\t');
    if (f.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 4 tab-separated fields, got " +
                               std::to_string(f.size()));
    ManifestEntry e{f[0], f[1], f[2], f[3]};
    if (!e.audio_path.empty() && std::filesystem::path(e.audio_path).is_relative())
      e.audio_path = (base / e.audio_path).lexically_normal().string();
    m.entries.push_back(std::move(e));
  }
  ValidateManifest(m);
  return m;
}

void WriteManifest(const std::string& path, const Manifest& manifest) {
  ValidateManifest(manifest);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::filesystem::path base =
      std::filesystem::absolute(std::filesystem::path(path)).parent_path();
  for (const auto& e : manifest.entries) {
    std::string audio = e.audio_path;
    if (!audio.empty() && std::filesystem::path(audio).is_absolute()) {
      auto rel = std::filesystem::path(audio).lexically_relative(base);
      if (!rel.empty()) audio = rel.string();
    }
    out << e.id << '\t' << audio << '\t' << e.speaker << '\t' << e.transcript << '\n';
  }
}

void ValidateManifest(const Manifest& manifest) {
  std::unordered_set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (e.id.empty()) throw std::runtime_error("manifest entry with empty id");
    if (!seen.insert(e.id).second)
      throw std::runtime_error("duplicate utterance id in " + manifest.split +
                               ": " + e.id);
    for (const std::string* f : {&e.id, &e.audio_path, &e.speaker, &e.transcript})
      if (f->find('\t') != std::string::npos || f->find('\n') != std::string::npos)
        throw std::runtime_error("manifest field contains a tab or newline: " + e.id);
  }
}

CorpusStats ComputeCorpusStats(const Manifest& manifest, const Lexicon& lexicon,
                               const std::vector<double>& durations_sec) {
  if (manifest.entries.empty())
    throw std::invalid_argument("corpus statistics of an empty manifest");
  if (!durations_sec.empty() && durations_sec.size() != manifest.entries.size())
    throw std::invalid_argument("durations do not match manifest entries");
  CorpusStats s;
  std::set<std::string> speakers;
  std::size_t cs = 0, man = 0, eng = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    speakers.insert(e.speaker);
    Transcript t = ParseTranscript(e.transcript, lexicon);
    if (auto c = ClassifyUtterance(t)) {
      cs += *c == UttClass::kCS;
      man += *c == UttClass::kMAN;
      eng += *c == UttClass::kENG;
    }
    std::optional<LangClass> prev;
    for (LangClass c : TagLanguages(t)) {
      if (c == LangClass::kNeutral) continue;
      if (prev) {
        ++s.counted_pairs;
        if (*prev == LangClass::kMandarin && c == LangClass::kEnglish) ++s.switches_m2e;
        if (*prev == LangClass::kEnglish && c == LangClass::kMandarin) ++s.switches_e2m;
      }
      prev = c;
    }
    if (!durations_sec.empty()) s.hours += durations_sec[i] / 3600.0;
  }
  s.utterances = manifest.entries.size();
  s.speakers = speakers.size();
  double n = static_cast<double>(s.utterances);
  s.cs_pct = 100.0 * cs / n;
  s.man_pct = 100.0 * man / n;
  s.eng_pct = 100.0 * eng / n;
  if (s.counted_pairs > 0) {
    double p = static_cast<double>(s.counted_pairs);
    s.m2e_ratio = s.switches_m2e / p;
    s.e2m_ratio = s.switches_e2m / p;
    s.switch_ratio = (s.switches_m2e + s.switches_e2m) / p;
  }
  return s;
}

std::string FormatStatsTable(
    const std::vector<std::pair<std::string, CorpusStats>>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %6s %7s %8s %7s %7s %7s %8s %8s %8s\n", "Sets",
                "#spk", "#utt", "#hrs", "CS", "MAN", "ENG", "switch", "M->E", "E->M");
  out << buf;
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%-10s %6zu %7zu %8.4f %7.2f %7.2f %7.2f %8.2f %8.2f %8.2f\n",
                  name.c_str(), s.speakers, s.utterances, s.hours, s.cs_pct,
                  s.man_pct, s.eng_pct, 100.0 * s.switch_ratio, 100.0 * s.m2e_ratio,
                  100.0 * s.e2m_ratio);
    out << buf;
  }
  return out.str();
}

}  // namespace csasr
