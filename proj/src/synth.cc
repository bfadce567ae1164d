// src/synth.cc

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

#include "csasr/synth.h"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "csasr/text.h"

namespace csasr {

namespace {

const char kCommonChars[] =
    "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年得就那要下以生会"
    "自着去之过家学对可她里后小么心多天而能好都然没日于起还发成事只作当想看文无开"
    "手十用主行方又如前所本见经头面公同三已老从动两长知民样现分将外但身些与高意进"
    "把法此实回二理美点月明其种声全工己话儿者向情部正名定女问力机给等几很业最间新"
    "什打便位因重被走电四第门相次东政海口使教西再平真听世气信北少关并内加化由却代";

constexpr int kMels = 40;
constexpr int kBandA0 = 4, kBandA1 = 17;
constexpr int kBandB0 = 18, kBandB1 = 31;
constexpr int kBandN0 = 32, kBandN1 = 38;

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// k-th combination (in lexicographic order) of `size` bands from [lo, hi].
std::vector<int> NthCombination(int lo, int hi, int size, int k) {
  std::vector<int> idx(size);
  for (int i = 0; i < size; ++i) idx[i] = lo + i;
  for (int step = 0; step < k; ++step) {
    int i = size - 1;
    while (i >= 0 && idx[i] == hi - (size - 1 - i)) --i;
    if (i < 0) return {};
    ++idx[i];
    for (int j = i + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
  }
  return idx;
}

long Choose(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Chord for the k-th token drawn from bands [lo, hi]: pairs first, then
// triples, and so on.
std::vector<double> ChordFor(int lo, int hi, int k, const std::vector<double>& centres) {
  int n = hi - lo + 1;
  for (int size = 2; size <= n; ++size) {
    long count = Choose(n, size);
    if (k < count) {
      std::vector<double> hz;
      for (int b : NthCombination(lo, hi, size, k)) hz.push_back(centres[b]);
      return hz;
    }
    k -= static_cast<int>(count);
  }
  throw std::invalid_argument("synthetic inventory too large for its band range");
}

std::vector<std::string> LanguageBWords(int count, const SynthSpec& spec) {
  static const std::string kCons = "bdfgklmnprstvwz";
  static const std::string kVowels = "aeiou";
  std::mt19937_64 rng(0x5eed);
  std::set<std::string> seen;
  std::vector<std::string> out;
  Lexicon particles = SynthParticleLexicon(spec);
  Lexicon defaults = Lexicon::Default();
  int guard = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++guard > 1000000) throw std::runtime_error("cannot draw enough synthetic words");
    int len = 2 + static_cast<int>(rng() % 3);
    std::string w;
    for (int i = 0; i < len; ++i) {
      const std::string& pool = i % 2 == 0 ? kCons : kVowels;
      w += pool[rng() % pool.size()];
    }
    if (particles.IsParticle(w) || defaults.IsParticle(w)) continue;
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

}  // namespace

void SynthSpec::Validate() const {
  auto bad = [](const std::string& what) {
    throw std::invalid_argument("invalid synthetic spec: " + what);
  };
  if (inventory_a < 1 || inventory_b < 1) bad("inventory sizes must be >= 1");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) bad("switch_prob outside [0, 1]");
  if (!(initial_a_prob >= 0.0 && initial_a_prob <= 1.0)) bad("initial_a_prob outside [0, 1]");
  if (min_tokens < 1 || max_tokens < min_tokens) bad("token length range");
  if (!(min_rate > 0.0 && max_rate >= min_rate)) bad("speaking rate range");
  if (!(particle_prob >= 0.0 && nonling_prob >= 0.0 && particle_prob + nonling_prob < 1.0))
    bad("particle/nonlinguistic probabilities");
  if (particle_prob > 0.0 && particles.empty()) bad("particle_prob > 0 with no particles");
  if (nonling_prob > 0.0 && nonlinguistic.empty())
    bad("nonling_prob > 0 with no nonlinguistic tokens");
  if (num_speakers < 1) bad("num_speakers must be >= 1");
  if (num_utterances < 0) bad("num_utterances must be >= 0");
}

Lexicon SynthParticleLexicon(const SynthSpec& spec) {
  Lexicon lex;
  for (const auto& p : spec.particles) lex.particles.insert(ToLowerAscii(p));
  for (const auto& n : spec.nonlinguistic) lex.nonlinguistic.insert(n);
  return lex;
}

SynthLexicon BuildSynthLexicon(const SynthSpec& spec) {
  spec.Validate();
  const auto centres = MelCenterFrequencies(kMels, 16000);
  SynthLexicon lex;
  std::vector<std::string> common = Utf8Chars(kCommonChars);
  std::set<std::string> used(common.begin(), common.end());
  char32_t next = 0x4e00;
  for (int i = 0; i < spec.inventory_a; ++i) {
    std::string ch;
    if (i < static_cast<int>(common.size())) {
      ch = common[i];
    } else {
      do ch = EncodeUtf8(next++);
      while (used.count(ch));
    }
    lex.lang_a.push_back(ch);
    lex.signatures[ch] = {{ChordFor(kBandA0, kBandA1, i, centres)}, 1.0};
  }
  lex.lang_b = LanguageBWords(spec.inventory_b, spec);
  for (const std::string& w : lex.lang_b) {
    Signature sig;
    for (char c : w) sig.chords.push_back(ChordFor(kBandB0, kBandB1, c - 'a', centres));
    sig.weight = std::max(1.0, w.size() / 2.0);
    lex.signatures[w] = sig;
  }
  int k = 0;
  for (const auto* list : {&spec.particles, &spec.nonlinguistic})
    for (const std::string& t : *list) {
      lex.neutral.push_back(t);
      lex.signatures[t] = {{ChordFor(kBandN0, kBandN1, k++, centres)}, 1.0};
    }
  return lex;
}

std::string SynthUtterance::Text() const { return Join(tokens, " "); }

double SpeakerPitchScale(const std::string& speaker) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : speaker) h = (h ^ c) * 1099511628211ull;
  std::mt19937_64 rng(h);
  return 0.95 + 0.1 * Uniform01(rng);
}

std::vector<SynthUtterance> GenTranscripts(const SynthSpec& spec,
                                           const SynthLexicon& lexicon,
                                           const std::string& prefix) {
  spec.Validate();
  if (lexicon.lang_a.empty() || lexicon.lang_b.empty())
    throw std::invalid_argument("synthetic lexicon has an empty inventory");
  std::mt19937_64 rng(spec.seed);
  std::vector<SynthUtterance> out;
  out.reserve(spec.num_utterances);
  for (int u = 0; u < spec.num_utterances; ++u) {
    SynthUtterance utt;
    utt.id = prefix + "u" + std::to_string(u);
    utt.speaker = prefix + "s" + std::to_string(u % spec.num_speakers);
    int n = spec.min_tokens +
            static_cast<int>(rng() % static_cast<std::uint64_t>(spec.max_tokens -
                                                                 spec.min_tokens + 1));
    bool lang_a = Uniform01(rng) < spec.initial_a_prob;
    bool any_a = false, any_b = false;
    for (int i = 0; i < n; ++i) {
      if (i > 0 && Uniform01(rng) < spec.switch_prob) lang_a = !lang_a;
      double r = Uniform01(rng);
      if (r < spec.particle_prob) {
        utt.tokens.push_back(spec.particles[rng() % spec.particles.size()]);
      } else if (r < spec.particle_prob + spec.nonling_prob) {
        utt.tokens.push_back(spec.nonlinguistic[rng() % spec.nonlinguistic.size()]);
      }
      const auto& inv = lang_a ? lexicon.lang_a : lexicon.lang_b;
      utt.tokens.push_back(inv[rng() % inv.size()]);
      (lang_a ? any_a : any_b) = true;
    }
    utt.utt_class = any_a && any_b ? UttClass::kCS : any_a ? UttClass::kMAN : UttClass::kENG;
    utt.rate = spec.min_rate + (spec.max_rate - spec.min_rate) * Uniform01(rng);
    utt.pitch_scale = SpeakerPitchScale(utt.speaker);
    utt.audio_seed = rng();
    out.push_back(std::move(utt));
  }
  return out;
}

Waveform RenderUtterance(const SynthUtterance& utt, const SynthLexicon& lexicon,
                         const SynthSpec& spec) {
  SynthOptions opts;
  opts.rate = utt.rate;
  opts.snr_db = spec.snr_db;
  opts.pitch_scale = utt.pitch_scale;
  return SynthWaveform(utt.tokens, lexicon.signatures, opts, utt.audio_seed);
}

}  // namespace csasr
