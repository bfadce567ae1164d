// csasr/synth.h

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

#ifndef CSASR_SYNTH_H_
#define CSASR_SYNTH_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csasr/corpus.h"
#include "csasr/signal.h"

namespace csasr {

// Synthetic bilingual corpus. Language A tokens are single CJK characters,
// language B tokens are short lower-case letter strings.
struct SynthSpec {
  int inventory_a = 30;
  int inventory_b = 20;
  double switch_prob = 0.3;     // per language-token boundary
  double initial_a_prob = 0.5;  // language of the first token
  int min_tokens = 3;
  int max_tokens = 8;
  double min_rate = 3.5;  // tokens per second
  double max_rate = 4.5;
  double particle_prob = 0.05;  // per position, inserted before the token
  double nonling_prob = 0.02;
  std::vector<std::string> particles = {"lah", "hmm", "lor"};
  std::vector<std::string> nonlinguistic = {"(laughing)", "[noise]"};
  int num_speakers = 4;
  int num_utterances = 50;
  double snr_db = 25.0;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on out-of-range fields.
  void Validate() const;
};

// Token inventories and spectral signatures. Depends only on the inventory
// sizes and the particle/nonlinguistic lists, never on the seed, so every
// split generated from compatible specs shares one acoustic lexicon.
struct SynthLexicon {
  std::vector<std::string> lang_a;
  std::vector<std::string> lang_b;
  std::vector<std::string> neutral;
  std::map<std::string, Signature> signatures;
};

SynthLexicon BuildSynthLexicon(const SynthSpec& spec);

struct SynthUtterance {
  std::string id;
  std::string speaker;
  std::vector<std::string> tokens;
  UttClass utt_class;
  double rate = 4.0;
  double pitch_scale = 1.0;
  std::uint64_t audio_seed = 0;

  std::string Text() const;
};

// Speaker ids are "<prefix>s<k>" so splits with different prefixes never share
// speakers; utterance ids are "<prefix>u<k>".
std::vector<SynthUtterance> GenTranscripts(const SynthSpec& spec,
                                           const SynthLexicon& lexicon,
                                           const std::string& prefix);

Waveform RenderUtterance(const SynthUtterance& utt, const SynthLexicon& lexicon,
                         const SynthSpec& spec);

// Pitch scale in [0.95, 1.05] derived from the speaker id.
double SpeakerPitchScale(const std::string& speaker);

Lexicon SynthParticleLexicon(const SynthSpec& spec);

}  // namespace csasr

#endif  // CSASR_SYNTH_H_
