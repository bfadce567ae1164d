// csasr/signal.h

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

#ifndef CSASR_SIGNAL_H_
#define CSASR_SIGNAL_H_

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csasr/tensor.h"

namespace csasr {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double DurationSec() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  bool operator==(const Waveform&) const = default;
};

// Plain resampling at read positions i * factor with linear interpolation:
// tempo and pitch both scale by `factor`. Output length is
// round(input_length / factor). factor must lie in [0.5, 2].
Waveform ResampleSpeed(const Waveform& in, double factor);

// An utterance with its audio held in memory.
struct AudioUtterance {
  std::string id;
  std::string speaker;
  std::string transcript;
  Waveform audio;
};

struct AudioSet {
  std::string split;
  std::vector<AudioUtterance> utterances;
};

// Speed-perturbed copies at 0.9, 1.0 and 1.1, ids suffixed "-sp<factor>".
// Only the train split may be perturbed.
AudioSet Perturb3Way(const AudioSet& set);
std::string SpeedSuffix(double factor);

struct FbankOptions {
  int n_mels = 40;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
};

// Frames x n_mels log mel energies from the magnitude spectrum of
// pre-emphasized, Hann-windowed frames; the triangular filters span
// [0, sample_rate / 2]. Frame count is 1 + (N - frame) / shift.
Tensor LogMelFeatures(const Waveform& wave, const FbankOptions& opts = {});
std::size_t NumFrames(std::size_t num_samples, int sample_rate,
                      const FbankOptions& opts);

// Centre frequencies (Hz) of the n_mels triangular filters.
std::vector<double> MelCenterFrequencies(int n_mels, int sample_rate);
double HzToMel(double hz);
double MelToHz(double mel);

// In-place radix-2 FFT; size must be a power of two.
void Fft(std::vector<std::complex<double>>& data);

// Tones rendered for one token: a sequence of chords, each occupying an equal
// share of the token's duration.
struct Signature {
  std::vector<std::vector<double>> chords;  // Hz
  double weight = 1.0;                      // duration multiplier
};

struct SynthOptions {
  double rate = 4.0;          // tokens per second
  double snr_db = 25.0;
  double crossfade_ms = 5.0;
  double ramp_ms = 10.0;      // per-chord attack/release
  double pitch_scale = 1.0;   // speaker-dependent frequency scaling
  int sample_rate = 16000;
};

// Renders tokens back to back. Each token spans round(weight / rate * sr)
// samples; neighbours overlap by one crossfade, so the output length is the
// sum of token lengths plus one crossfade tail. Gaussian noise is added at
// `snr_db` relative to the clean signal power.
Waveform SynthWaveform(const std::vector<std::string>& tokens,
                       const std::map<std::string, Signature>& signatures,
                       const SynthOptions& opts, std::uint64_t seed);

// 16-bit PCM mono little-endian WAV.
void WriteWav(const std::string& path, const Waveform& wave);
Waveform ReadWav(const std::string& path);
// Duration from the header only.
double WavDurationSec(const std::string& path);

}  // namespace csasr

#endif  // CSASR_SIGNAL_H_
