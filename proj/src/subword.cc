// src/subword.cc

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

#include "csasr/subword.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "csasr/text.h"

namespace csasr {

void MergeTable::Append(const std::string& left, const std::string& right) {
  Pair p{left, right};
  if (rank_.count(p)) throw std::invalid_argument("duplicate merge " + left + " " + right);
  rank_[p] = static_cast<int>(merges_.size());
  merges_.push_back(std::move(p));
}

int MergeTable::Rank(const std::string& left, const std::string& right) const {
  auto it = rank_.find(Pair{left, right});
  return it == rank_.end() ? -1 : it->second;
}

MergeTable MergeTable::Prefix(std::size_t n) const {
  MergeTable t;
  for (std::size_t i = 0; i < std::min(n, merges_.size()); ++i)
    t.Append(merges_[i].first, merges_[i].second);
  return t;
}

void MergeTable::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < merges_.size(); ++i)
    out << i << '\t' << merges_[i].first << '\t' << merges_[i].second << '\n';
}

MergeTable MergeTable::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read merge table " + path);
  MergeTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = SplitString(line, '\t');
    if (f.size() != 3 || f[0] != std::to_string(t.size()))
      throw std::runtime_error(path + ": bad merge line '" + line + "'");
    t.Append(f[1], f[2]);
  }
  return t;
}

std::vector<std::string> WordSymbols(std::string_view word) {
  std::vector<std::string> s = Utf8Chars(word);
  if (!s.empty()) s.back() += kEndOfWord;
  return s;
}

namespace {

void MergeInPlace(std::vector<std::string>& s, const std::string& left,
                  const std::string& right) {
  std::vector<std::string> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
      out.push_back(left + right);
      ++i;
    } else {
      out.push_back(std::move(s[i]));
    }
  }
  s = std::move(out);
}

}  // namespace

MergeTable TrainBpe(const std::map<std::string, long>& word_counts, int num_merges) {
  if (num_merges < 0) throw std::invalid_argument("num_merges must be >= 0");
  if (word_counts.empty() && num_merges > 0)
    throw std::invalid_argument("BPE training on an empty corpus");
  std::vector<std::pair<std::vector<std::string>, long>> words;
  for (const auto& [w, c] : word_counts)
    if (!w.empty() && c > 0) words.emplace_back(WordSymbols(w), c);
  MergeTable table;
  for (int m = 0; m < num_merges; ++m) {
    std::map<MergeTable::Pair, long> counts;
    for (const auto& [sym, c] : words)
      for (std::size_t i = 0; i + 1 < sym.size(); ++i) counts[{sym[i], sym[i + 1]}] += c;
    if (counts.empty()) break;
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
      if (it->second > best->second) best = it;
    table.Append(best->first.first, best->first.second);
    for (auto& [sym, c] : words) MergeInPlace(sym, best->first.first, best->first.second);
  }
  return table;
}

std::vector<std::string> ApplyBpe(std::string_view word, const MergeTable& table) {
  std::vector<std::string> s = WordSymbols(word);
  while (s.size() > 1) {
    int best = -1;
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      int r = table.Rank(s[i], s[i + 1]);
      if (r >= 0 && (best < 0 || r < best)) {
        best = r;
        at = i;
      }
    }
    if (best < 0) break;
    std::string left = s[at], right = s[at + 1];
    MergeInPlace(s, left, right);
  }
  return s;
}

std::string JoinSubwords(const std::vector<std::string>& units) {
  std::string out;
  for (const auto& u : units) out += u;
  if (out.size() >= kEndOfWord.size() &&
      out.compare(out.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0)
    out.resize(out.size() - kEndOfWord.size());
  return out;
}

std::vector<std::string> BpeInventory(const std::map<std::string, long>& word_counts,
                                      const MergeTable& table) {
  std::set<std::string> inv;
  for (const auto& [w, c] : word_counts)
    for (auto& s : WordSymbols(w)) inv.insert(std::move(s));
  for (const auto& [l, r] : table.merges()) inv.insert(l + r);
  return {inv.begin(), inv.end()};
}

MergeTable MergesForInventory(const std::map<std::string, long>& word_counts,
                              const MergeTable& table, std::size_t n) {
  std::set<std::string> inv;
  for (const auto& [w, c] : word_counts)
    for (auto& s : WordSymbols(w)) inv.insert(std::move(s));
  const std::size_t base = inv.size();
  if (n < base)
    throw std::invalid_argument("subword inventory of " + std::to_string(n) +
                                " is below the " + std::to_string(base) +
                                " initial symbols");
  for (std::size_t k = 0;; ++k) {
    if (inv.size() == n) return table.Prefix(k);
    if (k == table.size()) break;
    inv.insert(table.at(k).first + table.at(k).second);
  }
  throw std::invalid_argument("subword inventory of " + std::to_string(n) +
                              " is not attainable; the merges reach " +
                              std::to_string(inv.size()) + " units");
}

MixedVocab::MixedVocab() : MixedVocab(true) {}

MixedVocab::MixedVocab(bool all_specials) {
  Add(std::string(kBlank), LangClass::kNeutral);
  Add(std::string(kSosEos), LangClass::kNeutral);
  Add(std::string(kUnk), LangClass::kNeutral);
  if (all_specials) {
    Add(std::string(kSpace), LangClass::kNeutral);
    Add(std::string(kDispar), LangClass::kNeutral);
    Add(std::string(kNlsyms), LangClass::kNeutral);
  }
}

MixedVocab MixedVocab::Minimal() { return MixedVocab(false); }

int MixedVocab::Add(const std::string& unit, LangClass cls) {
  if (unit.empty()) throw std::invalid_argument("empty vocabulary unit");
  if (unit.find_first_of("\t\n") != std::string::npos)
    throw std::invalid_argument("vocabulary unit contains a tab or newline");
  auto it = index_.find(unit);
  if (it != index_.end()) {
    if (classes_[it->second] != cls)
      throw std::invalid_argument("unit '" + unit + "' already has class " +
                                  std::string(LangClassName(classes_[it->second])));
    return it->second;
  }
  int id = static_cast<int>(units_.size());
  units_.push_back(unit);
  classes_.push_back(cls);
  index_[unit] = id;
  return id;
}

int MixedVocab::Id(std::string_view unit) const {
  auto it = index_.find(std::string(unit));
  return it == index_.end() ? -1 : it->second;
}

std::size_t MixedVocab::CountClass(LangClass c) const {
  return static_cast<std::size_t>(std::count(classes_.begin(), classes_.end(), c));
}

std::vector<int> MixedVocab::ClassOfEachUnit() const {
  std::vector<int> out;
  out.reserve(classes_.size());
  for (LangClass c : classes_) out.push_back(static_cast<int>(c));
  return out;
}

void MixedVocab::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < units_.size(); ++i)
    out << units_[i] << '\t' << LangClassName(classes_[i]) << '\n';
}

MixedVocab MixedVocab::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocabulary " + path);
  MixedVocab v(false);
  v.units_.clear();
  v.classes_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = SplitString(line, '\t');
    if (f.size() != 2) throw std::runtime_error(path + ": bad vocabulary line '" + line + "'");
    LangClass c;
    if (f[1] == "MANDARIN") c = LangClass::kMandarin;
    else if (f[1] == "ENGLISH") c = LangClass::kEnglish;
    else if (f[1] == "NEUTRAL") c = LangClass::kNeutral;
    else throw std::runtime_error(path + ": unknown class " + f[1]);
    if (v.Contains(f[0])) throw std::runtime_error(path + ": duplicate unit " + f[0]);
    v.Add(f[0], c);
  }
  if (v.size() < 3 || v.Unit(kBlankId) != kBlank || v.Unit(kSosEosId) != kSosEos ||
      v.Unit(kUnkId) != kUnk)
    throw std::runtime_error(path + ": vocabulary must start with <blank>, <sos/eos>, <unk>");
  return v;
}

UnitCodec::UnitCodec(MixedVocab vocab, VocabMode mode, MergeTable merges, Lexicon lexicon)
    : vocab_(std::move(vocab)),
      mode_(mode),
      merges_(std::move(merges)),
      lexicon_(std::move(lexicon)) {}

std::vector<std::string> UnitCodec::Segment(std::string_view text) const {
  std::vector<std::string> units;
  Transcript t = ParseTranscript(text, lexicon_);
  bool prev_english = false;
  for (const Token& tok : t.tokens) {
    bool english = tok.kind == TokenKind::kEnglishWord;
    if (english && mode_ == VocabMode::kChar) {
      if (prev_english) units.emplace_back(kSpace);
      for (auto& c : Utf8Chars(tok.surface)) units.push_back(std::move(c));
    } else if (english) {
      for (auto& s : ApplyBpe(tok.surface, merges_)) units.push_back(std::move(s));
    } else {
      units.push_back(tok.surface);
    }
    prev_english = english;
  }
  return units;
}

std::vector<int> UnitCodec::Encode(std::string_view text, std::size_t* unk_count) const {
  std::vector<int> ids;
  std::size_t unk = 0;
  for (const std::string& u : Segment(text)) {
    int id = vocab_.Id(u);
    if (id < 0 || id == MixedVocab::kBlankId || id == MixedVocab::kSosEosId) {
      id = MixedVocab::kUnkId;
      ++unk;
    }
    ids.push_back(id);
  }
  if (unk_count) *unk_count = unk;
  return ids;
}

std::string UnitCodec::Decode(const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size())
      throw std::invalid_argument("unit id " + std::to_string(id) + " outside vocabulary");
    const std::string& u = vocab_.Unit(id);
    if (id == MixedVocab::kBlankId || id == MixedVocab::kSosEosId) continue;
    if (u == kSpace) {
      flush();
      continue;
    }
    if (vocab_.Class(id) == LangClass::kEnglish) {
      if (mode_ == VocabMode::kSubword && u.size() >= kEndOfWord.size() &&
          u.compare(u.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
        word += u.substr(0, u.size() - kEndOfWord.size());
        flush();
      } else {
        word += u;
      }
      continue;
    }
    flush();
    tokens.push_back(u);
  }
  flush();
  return Join(tokens, " ");
}

std::map<std::string, long> EnglishWordCounts(const std::vector<std::string>& texts,
                                              const Lexicon& lexicon) {
  std::map<std::string, long> counts;
  for (const auto& text : texts)
    for (const Token& tok : ParseTranscript(text, lexicon).tokens)
      if (tok.kind == TokenKind::kEnglishWord) ++counts[tok.surface];
  return counts;
}

UnitCodec BuildCodec(const std::vector<std::string>& texts, const Lexicon& lexicon,
                     const BuildVocabOptions& opts, const MergeTable& merges) {
  std::set<std::string> mandarin, english, neutral;
  for (const auto& text : texts)
    for (const Token& tok : ParseTranscript(text, lexicon).tokens) {
      switch (tok.kind) {
        case TokenKind::kMandarinChar: mandarin.insert(tok.surface); break;
        case TokenKind::kEnglishWord:
          if (opts.mode == VocabMode::kChar)
            for (auto& c : Utf8Chars(tok.surface)) english.insert(std::move(c));
          break;
        default: neutral.insert(tok.surface);
      }
    }
  MergeTable used;
  if (opts.mode == VocabMode::kSubword) {
    auto counts = EnglishWordCounts(texts, lexicon);
    used = opts.num_subwords == 0 ? merges
                                  : MergesForInventory(counts, merges, opts.num_subwords);
    for (auto& s : BpeInventory(counts, used)) english.insert(std::move(s));
  }
  MixedVocab vocab;
  for (const auto& u : mandarin) vocab.Add(u, LangClass::kMandarin);
  for (const auto& u : english) vocab.Add(u, LangClass::kEnglish);
  for (const auto& u : neutral)
    if (!vocab.Contains(u)) vocab.Add(u, LangClass::kNeutral);
  return UnitCodec(std::move(vocab), opts.mode, std::move(used), lexicon);
}

}  // namespace csasr
