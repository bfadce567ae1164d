// src/decode.cc

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

#include "csasr/decode.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "csasr/text.h"

namespace csasr {

namespace {

constexpr int kBlank = 0;
constexpr int kEos = 1;

std::vector<double> RowOf(const Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

std::string FormatDouble(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double ParseDouble(const std::string& s) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("n-best: bad number '" + s + "'");
  return v;
}

// Higher score first; ties go to the lexicographically smaller unit sequence.
bool Better(double sa, const std::vector<int>& ua, double sb, const std::vector<int>& ub) {
  if (sa != sb) return sa > sb;
  return ua < ub;
}

bool HypBetter(const Hypothesis& a, const Hypothesis& b) {
  return Better(a.score, a.units, b.score, b.units);
}

struct Live {
  Hypothesis hyp;
  StepScorer::StatePtr att_state, lm_state;
  CtcPrefixScorer::State ctc;
};

struct Setup {
  bool use_ctc = false;
  bool use_lm = false;
  double beta = 0.0;
  std::optional<CtcPrefixScorer> ctc;
  int vocab = 0;
};

Setup Prepare(const SearchInputs& in, const DecodeConfig& config) {
  config.Validate();
  if (!in.att) throw std::invalid_argument("search: no attention scorer");
  if (in.max_len < 0) throw std::invalid_argument("search: negative max_len");
  Setup s;
  s.vocab = in.att->vocab_size();
  if (s.vocab < 2) throw std::invalid_argument("search: vocabulary needs blank and <sos/eos>");
  s.use_ctc = config.ctc_weight > 0.0;
  if (s.use_ctc) {
    if (in.ctc_logprobs.size() == 0)
      throw std::invalid_argument("search: ctc_weight > 0 but no CTC posteriors");
    if (static_cast<int>(in.ctc_logprobs.cols()) != s.vocab)
      throw std::invalid_argument("search: CTC posteriors and decoder disagree on vocabulary");
    s.ctc.emplace(in.ctc_logprobs, kBlank);
  }
  if (config.fusion == FusionMode::kShallow) {
    if (!in.lm) throw std::invalid_argument("search: shallow fusion needs a language model");
    if (in.lm->vocab_size() != s.vocab)
      throw std::invalid_argument("search: language model vocabulary differs");
    s.use_lm = true;
    s.beta = config.lm_weight;
  }
  return s;
}

double Combine(const Setup& s, const DecodeConfig& c, double att, double ctc, double lm) {
  return CombineScores(att, s.use_ctc ? ctc : 0.0, lm, s.use_ctc ? c.ctc_weight : 0.0, s.beta);
}

}  // namespace

std::string FusionModeName(FusionMode m) {
  switch (m) {
    case FusionMode::kNone: return "none";
    case FusionMode::kShallow: return "shallow";
    case FusionMode::kCold: return "cold";
  }
  return "?";
}

FusionMode ParseFusionMode(const std::string& s) {
  if (s == "none") return FusionMode::kNone;
  if (s == "shallow") return FusionMode::kShallow;
  if (s == "cold") return FusionMode::kCold;
  throw std::invalid_argument("unknown fusion mode '" + s + "' (none, shallow, cold)");
}

void DecodeConfig::Validate() const {
  if (beam < 1) throw std::invalid_argument("beam must be >= 1");
  if (!(ctc_weight >= 0.0 && ctc_weight <= 1.0))
    throw std::invalid_argument("ctc_weight must lie in [0, 1]");
  if (!std::isfinite(lm_weight)) throw std::invalid_argument("lm_weight must be finite");
  if (!(max_len_ratio > 0.0)) throw std::invalid_argument("max_len_ratio must be > 0");
}

double CombineScores(double att, double ctc, double lm, double ctc_weight, double beta) {
  double s = ctc_weight == 0.0 ? att : (1.0 - ctc_weight) * att + ctc_weight * ctc;
  if (ctc_weight == 1.0) s = ctc;
  if (beta != 0.0) s += beta * lm;
  return s;
}

ModelScorer::ModelScorer(const AsrModel& model, const Tensor& feats) : model_(model) {
  Graph g;
  Bound b(g, model.params());
  auto enc = model.Encode(b, g.Constant(feats));
  enc_h_ = enc.h.value();
  enc_proj_ = enc.enc_proj.value();
  ctc_logprobs_ = model.CtcLogProbs(b, enc.h).value();
}

StepScorer::StatePtr ModelScorer::Initial() const {
  Graph g;
  Bound b(g, model_.params());
  AsrModel::Encoded enc{g.Parameter(enc_h_), g.Parameter(enc_proj_)};
  return std::make_shared<AsrModel::StateValues>(model_.ToValues(model_.Initial(b, enc)));
}

std::vector<double> ModelScorer::Next(const StatePtr& state, int unit, StatePtr* next) const {
  Graph g;
  Bound b(g, model_.params());
  AsrModel::Encoded enc{g.Parameter(enc_h_), g.Parameter(enc_proj_)};
  auto s = model_.FromValues(g, *static_cast<const AsrModel::StateValues*>(state.get()));
  AsrModel::State ns;
  auto out = model_.Step(b, enc, s, unit, &ns);
  if (next) *next = std::make_shared<AsrModel::StateValues>(model_.ToValues(ns));
  return RowOf(out.logprobs.value());
}

StepScorer::StatePtr LmScorer::Initial() const {
  Graph g;
  return std::make_shared<RnnLm::Values>(RnnLm::ToValues(lm_.Initial(g)));
}

std::vector<double> LmScorer::Next(const StatePtr& state, int unit, StatePtr* next) const {
  Graph g;
  const auto& v = *static_cast<const RnnLm::Values*>(state.get());
  RnnLm::State s{g.Constant(v.h), g.Constant(v.c)};
  RnnLm::State ns = lm_.Step(g, s, unit);
  if (next) *next = std::make_shared<RnnLm::Values>(RnnLm::ToValues(ns));
  return RowOf(lm_.LogProbs(g, ns).value());
}

DecodeResult BeamSearch(const SearchInputs& in, const DecodeConfig& config) {
  Setup setup = Prepare(in, config);
  const std::size_t beam = static_cast<std::size_t>(config.beam);
  std::vector<Live> live(1);
  live[0].att_state = in.att->Initial();
  if (setup.use_lm) live[0].lm_state = in.lm->Initial();
  if (setup.use_ctc) live[0].ctc = setup.ctc->Initial();
  std::vector<Hypothesis> finals;
  Hypothesis last_best;

  struct Candidate {
    double score;
    std::size_t parent;
    int unit;
    double att, lm;
    CtcPrefixScorer::State ctc;
    std::vector<int> units;
  };

  for (int len = 0; len <= in.max_len && !live.empty(); ++len) {
    last_best = live.front().hyp;
    std::vector<Candidate> cands;
    std::vector<StepScorer::StatePtr> att_next(live.size()), lm_next(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
      const Live& h = live[i];
      const int prev = h.hyp.units.empty() ? kEos : h.hyp.units.back();
      std::vector<double> att = in.att->Next(h.att_state, prev, &att_next[i]);
      std::vector<double> lm;
      if (setup.use_lm) lm = in.lm->Next(h.lm_state, prev, &lm_next[i]);
      // Finished candidate.
      {
        Hypothesis f = h.hyp;
        f.att += att[kEos];
        if (setup.use_lm) f.lm += lm[kEos];
        if (setup.use_ctc) f.ctc = setup.ctc->FinalScore(h.ctc);
        f.score = Combine(setup, config, f.att, f.ctc, f.lm);
        if (std::isfinite(f.score)) finals.push_back(std::move(f));
      }
      if (len == in.max_len) continue;
      for (int c = 0; c < setup.vocab; ++c) {
        if (c == kBlank || c == kEos) continue;
        Candidate cand;
        cand.parent = i;
        cand.unit = c;
        cand.att = h.hyp.att + att[c];
        cand.lm = setup.use_lm ? h.hyp.lm + lm[c] : 0.0;
        double ctc = 0.0;
        if (setup.use_ctc) {
          cand.ctc = setup.ctc->Extend(h.ctc, c);
          ctc = cand.ctc.prefix_score;
        }
        cand.score = Combine(setup, config, cand.att, ctc, cand.lm);
        if (!std::isfinite(cand.score)) continue;
        cand.units = h.hyp.units;
        cand.units.push_back(c);
        cands.push_back(std::move(cand));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return Better(a.score, a.units, b.score, b.units);
    });
    if (cands.size() > beam) cands.resize(beam);
    std::sort(finals.begin(), finals.end(), HypBetter);
    if (config.end_margin > 0.0 && !finals.empty()) {
      const double floor = finals.front().score - config.end_margin;
      while (!cands.empty() && cands.back().score < floor) cands.pop_back();
    }
    std::vector<Live> next;
    next.reserve(cands.size());
    for (auto& c : cands) {
      Live l;
      l.hyp.units = std::move(c.units);
      l.hyp.att = c.att;
      l.hyp.lm = c.lm;
      l.hyp.ctc = setup.use_ctc ? c.ctc.prefix_score : 0.0;
      l.hyp.score = c.score;
      l.att_state = att_next[c.parent];
      if (setup.use_lm) l.lm_state = lm_next[c.parent];
      l.ctc = std::move(c.ctc);
      next.push_back(std::move(l));
    }
    live = std::move(next);
    // Scores never rise as a hypothesis grows, so nothing live can enter the
    // n-best once the beam-th finished score beats the best live one.
    if (finals.size() >= beam && !live.empty() && live.front().hyp.score < finals[beam - 1].score)
      break;
  }

  DecodeResult result;
  std::sort(finals.begin(), finals.end(), HypBetter);
  if (finals.size() > beam) finals.resize(beam);
  result.nbest = std::move(finals);
  if (result.nbest.empty()) {
    result.complete = false;
    result.nbest.push_back(live.empty() ? last_best : live.front().hyp);
  }
  return result;
}

Hypothesis ExhaustiveSearch(const SearchInputs& in, const DecodeConfig& config) {
  Setup setup = Prepare(in, config);
  const double branch = std::max(1, setup.vocab - 2);
  double count = 0.0;
  for (int l = 0; l <= in.max_len; ++l) count += std::pow(branch, l);
  if (count > 1e6)
    throw std::invalid_argument("exhaustive search: " + FormatDouble(count) +
                                " sequences exceed 1e6");
  Hypothesis best;
  bool have = false;
  // Depth-first; partial scores accumulate exactly as in the beam search.
  std::function<void(const Live&)> visit = [&](const Live& h) {
    const int prev = h.hyp.units.empty() ? kEos : h.hyp.units.back();
    StepScorer::StatePtr att_next, lm_next;
    std::vector<double> att = in.att->Next(h.att_state, prev, &att_next);
    std::vector<double> lm;
    if (setup.use_lm) lm = in.lm->Next(h.lm_state, prev, &lm_next);
    Hypothesis f = h.hyp;
    f.att += att[kEos];
    if (setup.use_lm) f.lm += lm[kEos];
    if (setup.use_ctc) f.ctc = setup.ctc->FinalScore(h.ctc);
    f.score = Combine(setup, config, f.att, f.ctc, f.lm);
    if (std::isfinite(f.score) && (!have || HypBetter(f, best))) {
      best = f;
      have = true;
    }
    if (static_cast<int>(h.hyp.units.size()) == in.max_len) return;
    for (int c = 0; c < setup.vocab; ++c) {
      if (c == kBlank || c == kEos) continue;
      Live child;
      child.hyp.units = h.hyp.units;
      child.hyp.units.push_back(c);
      child.hyp.att = h.hyp.att + att[c];
      child.hyp.lm = setup.use_lm ? h.hyp.lm + lm[c] : 0.0;
      if (setup.use_ctc) {
        child.ctc = setup.ctc->Extend(h.ctc, c);
        child.hyp.ctc = child.ctc.prefix_score;
      }
      child.att_state = att_next;
      child.lm_state = lm_next;
      visit(child);
    }
  };
  Live root;
  root.att_state = in.att->Initial();
  if (setup.use_lm) root.lm_state = in.lm->Initial();
  if (setup.use_ctc) root.ctc = setup.ctc->Initial();
  visit(root);
  if (!have) throw std::runtime_error("exhaustive search: every sequence scores -inf");
  return best;
}

DecodeResult DecodeUtterance(const AsrModel& model, const Tensor& feats,
                             const DecodeConfig& config, const RnnLm* lm) {
  config.Validate();
  if (config.fusion == FusionMode::kCold && model.config().mode != OutputMode::kColdFusion)
    throw std::invalid_argument("cold fusion decoding needs a cold-fusion model");
  if (model.config().mode == OutputMode::kColdFusion && !model.lm())
    throw std::invalid_argument("cold-fusion model has no language model attached");
  ModelScorer scorer(model, feats);
  std::optional<LmScorer> lm_scorer;
  SearchInputs in;
  in.att = &scorer;
  if (config.ctc_weight > 0.0) in.ctc_logprobs = scorer.ctc_logprobs();
  if (config.fusion == FusionMode::kShallow) {
    if (!lm) throw std::invalid_argument("shallow fusion needs a language model");
    lm_scorer.emplace(*lm);
    in.lm = &*lm_scorer;
  }
  in.max_len = std::max(
      1, static_cast<int>(std::ceil(config.max_len_ratio *
                                    static_cast<double>(scorer.encoder_frames()))));
  return BeamSearch(in, config);
}

std::string FormatNbestLine(const NbestEntry& e) {
  std::string units = Join(e.unit_strings, " ");
  return e.utt_id + "\t" + std::to_string(e.rank) + "\t" + FormatDouble(e.hyp.score) + "\t" +
         FormatDouble(e.hyp.att) + "\t" + FormatDouble(e.hyp.ctc) + "\t" +
         FormatDouble(e.hyp.lm) + "\t" + units + "\t" + e.text;
}

NbestEntry ParseNbestLine(const std::string& line) {
  auto f = SplitString(line, '\t');
  if (f.size() != 8)
    throw std::invalid_argument("n-best line needs 8 tab-separated fields, got " +
                                std::to_string(f.size()));
  NbestEntry e;
  e.utt_id = f[0];
  e.rank = std::stoi(f[1]);
  e.hyp.score = ParseDouble(f[2]);
  e.hyp.att = ParseDouble(f[3]);
  e.hyp.ctc = ParseDouble(f[4]);
  e.hyp.lm = ParseDouble(f[5]);
  e.unit_strings = SplitWhitespace(f[6]);
  e.text = f[7];
  return e;
}

}  // namespace csasr
