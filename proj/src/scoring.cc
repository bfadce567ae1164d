// src/scoring.cc

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

#include "csasr/scoring.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "csasr/text.h"

namespace csasr {

std::vector<ScoreUnit> TokenizeMixed(std::string_view text, bool strip_specials,
                                     const Lexicon& lexicon) {
  std::vector<ScoreUnit> out;
  for (const Token& t : ParseTranscript(text, lexicon).tokens) {
    switch (t.kind) {
      case TokenKind::kMandarinChar:
        out.push_back({t.surface, UnitClass::kMandarin});
        break;
      case TokenKind::kEnglishWord:
        out.push_back({ToLowerAscii(t.surface), UnitClass::kEnglish});
        break;
      case TokenKind::kOtherLanguage:
        out.push_back({t.surface, UnitClass::kEnglish});
        break;
      case TokenKind::kDiscourseParticle:
      case TokenKind::kNonlinguistic:
        if (!strip_specials) out.push_back({ToLowerAscii(t.surface), UnitClass::kSpecial});
        break;
    }
  }
  return out;
}

double EditCounts::Mer() const {
  if (ref == 0) return errors() == 0 ? 0.0 : 100.0;
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref);
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  sub += o.sub;
  del += o.del;
  ins += o.ins;
  ref += o.ref;
  return *this;
}

Alignment EditDistance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // Cost = (edits, insertions), compared lexicographically.
  struct Cost {
    long edits, ins;
    bool operator<(const Cost& o) const { return edits != o.edits ? edits < o.edits : ins < o.ins; }
    bool operator==(const Cost& o) const = default;
  };
  std::vector<Cost> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cost& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = {static_cast<long>(i), 0};
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = {static_cast<long>(j), static_cast<long>(j)};
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      Cost diag = at(i - 1, j - 1);
      if (ref[i - 1] != hyp[j - 1]) ++diag.edits;
      Cost del{at(i - 1, j).edits + 1, at(i - 1, j).ins};
      Cost ins{at(i, j - 1).edits + 1, at(i, j - 1).ins + 1};
      Cost best = diag;
      if (del < best) best = del;
      if (ins < best) best = ins;
      at(i, j) = best;
    }
  Alignment a;
  a.counts.ref = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const Cost here = at(i, j);
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cost diag = at(i - 1, j - 1);
      if (!same) ++diag.edits;
      if (diag == here) {
        a.steps.push_back({same ? EditOp::kMatch : EditOp::kSub, static_cast<int>(i - 1),
                           static_cast<int>(j - 1)});
        if (!same) ++a.counts.sub;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && Cost{at(i - 1, j).edits + 1, at(i - 1, j).ins} == here) {
      a.steps.push_back({EditOp::kDel, static_cast<int>(i - 1), -1});
      ++a.counts.del;
      --i;
      continue;
    }
    a.steps.push_back({EditOp::kIns, -1, static_cast<int>(j - 1)});
    ++a.counts.ins;
    --j;
  }
  std::reverse(a.steps.begin(), a.steps.end());
  return a;
}

Alignment EditDistance(const std::vector<ScoreUnit>& ref, const std::vector<ScoreUnit>& hyp) {
  std::vector<std::string> r, h;
  for (const auto& u : ref) r.push_back(u.surface);
  for (const auto& u : hyp) h.push_back(u.surface);
  return EditDistance(r, h);
}

SwitchStats SwitchPointStats(const std::vector<ScoreUnit>& ref, const Alignment& alignment) {
  std::vector<bool> matched(ref.size(), false);
  for (const auto& s : alignment.steps)
    if (s.op == EditOp::kMatch) matched.at(s.ref) = true;
  SwitchStats st;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
    const UnitClass a = ref[i].cls, b = ref[i + 1].cls;
    if (a == UnitClass::kSpecial || b == UnitClass::kSpecial || a == b) continue;
    ++st.points;
    if (!matched[i] || !matched[i + 1]) ++st.errors;
  }
  return st;
}

ScoreReport ScoreCorpus(const std::vector<RefEntry>& refs,
                        const std::map<std::string, std::string>& hyps, bool strip_specials,
                        const Lexicon& lexicon) {
  std::set<std::string> ref_ids;
  for (const auto& r : refs)
    if (!ref_ids.insert(r.id).second)
      throw std::invalid_argument("duplicate reference id '" + r.id + "'");
  for (const auto& [id, text] : hyps)
    if (!ref_ids.count(id))
      throw std::invalid_argument("hypothesis '" + id + "' has no reference");
  ScoreReport rep;
  rep.stripped = strip_specials;
  for (const char* c : {"CS", "MAN", "ENG"}) rep.by_class[c];
  for (const auto& r : refs) {
    ScoredUtterance u;
    u.id = r.id;
    u.utt_class = ClassifyUtterance(ParseTranscript(r.text, lexicon));
    auto it = hyps.find(r.id);
    u.missing = it == hyps.end();
    auto ref_units = TokenizeMixed(r.text, strip_specials, lexicon);
    auto hyp_units =
        u.missing ? std::vector<ScoreUnit>{} : TokenizeMixed(it->second, strip_specials, lexicon);
    Alignment a = EditDistance(ref_units, hyp_units);
    u.counts = a.counts;
    u.switches = SwitchPointStats(ref_units, a);
    rep.total += u.counts;
    rep.switches += u.switches;
    rep.by_class[u.utt_class ? std::string(UttClassName(*u.utt_class)) : "OTHER"] += u.counts;
    if (u.missing) rep.missing.push_back(r.id);
    rep.utterances.push_back(std::move(u));
  }
  return rep;
}

namespace {

std::string Row(const std::string& name, const EditCounts& w, const EditCounts& wo) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-6s %7ld %6ld %6ld %6ld %8.2f %7ld %8.2f\n", name.c_str(),
                w.ref, w.sub, w.del, w.ins, w.Mer(), wo.ref, wo.Mer());
  return buf;
}

}  // namespace

std::string FormatScoreTable(const ScoreReport& with, const ScoreReport& without) {
  std::string out = "class        N      S      D      I      MER   N(nn) MER(nn)\n";
  out += Row("ALL", with.total, without.total);
  for (const char* c : {"CS", "MAN", "ENG", "OTHER"}) {
    auto a = with.by_class.find(c);
    if (a == with.by_class.end()) continue;
    if (std::string(c) == "OTHER" && a->second.ref == 0) continue;
    auto b = without.by_class.find(c);
    out += Row(c, a->second, b == without.by_class.end() ? EditCounts{} : b->second);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "switch points %ld, errors %ld, rate %.2f%%\n",
                with.switches.points, with.switches.errors, with.switches.Rate());
  out += buf;
  if (!with.missing.empty())
    out += "missing hypotheses: " + std::to_string(with.missing.size()) + "\n";
  return out;
}

std::string ScoreReportJsonLines(const ScoreReport& r) {
  auto row = [&](const std::string& name, const EditCounts& c) {
    nlohmann::ordered_json j;
    j["nlsyms"] = r.stripped ? "stripped" : "kept";
    j["class"] = name;
    j["n"] = c.ref;
    j["sub"] = c.sub;
    j["del"] = c.del;
    j["ins"] = c.ins;
    j["mer"] = c.Mer();
    return j.dump() + "\n";
  };
  std::string out = row("ALL", r.total);
  for (const auto& [name, c] : r.by_class)
    if (name != "OTHER" || c.ref > 0) out += row(name, c);
  nlohmann::ordered_json s;
  s["nlsyms"] = r.stripped ? "stripped" : "kept";
  s["switch_points"] = r.switches.points;
  s["switch_errors"] = r.switches.errors;
  s["switch_error_rate"] = r.switches.Rate();
  s["missing"] = r.missing;
  out += s.dump() + "\n";
  return out;
}

}  // namespace csasr
