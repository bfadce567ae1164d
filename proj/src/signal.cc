// src/signal.cc

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

#include "csasr/signal.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace csasr {

Waveform ResampleSpeed(const Waveform& in, double factor) {
  if (!(factor >= 0.5 && factor <= 2.0))
    throw std::invalid_argument("speed factor " + std::to_string(factor) +
                                " outside [0.5, 2]");
  if (factor == 1.0) return in;
  Waveform out;
  out.sample_rate = in.sample_rate;
  const std::size_t n = in.samples.size();
  if (n == 0) return out;
  const auto m = static_cast<std::size_t>(std::llround(n / factor));
  out.samples.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double pos = static_cast<double>(i) * factor;
    auto j = static_cast<std::size_t>(pos);
    if (j + 1 >= n) {
      out.samples[i] = in.samples[n - 1];
      continue;
    }
    double frac = pos - static_cast<double>(j);
    out.samples[i] = in.samples[j] + frac * (in.samples[j + 1] - in.samples[j]);
  }
  return out;
}

std::string SpeedSuffix(double factor) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-sp%.1f", factor);
  return buf;
}

AudioSet Perturb3Way(const AudioSet& set) {
  if (set.split != "train")
    throw std::invalid_argument("speed perturbation applies to the train split only, got '" +
                                set.split + "'");
  AudioSet out;
  out.split = set.split;
  out.utterances.reserve(3 * set.utterances.size());
  for (const auto& u : set.utterances)
    for (double f : {0.9, 1.0, 1.1}) {
      AudioUtterance c = u;
      c.id = u.id + SpeedSuffix(f);
      c.audio = ResampleSpeed(u.audio, f);
      out.utterances.push_back(std::move(c));
    }
  return out;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> MelEdges(int n_mels, int sample_rate) {
  double top = HzToMel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = MelToHz(top * i / (n_mels + 1));
  return edges;
}

std::size_t NextPow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Dense (n_mels x n_bins) triangular weights.
std::vector<std::vector<double>> MelBank(int n_mels, int sample_rate, std::size_t nfft) {
  auto edges = MelEdges(n_mels, sample_rate);
  std::size_t bins = nfft / 2 + 1;
  std::vector<std::vector<double>> bank(n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < n_mels; ++m) {
    double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / nfft;
      if (f > lo && f <= c) bank[m][k] = (f - lo) / (c - lo);
      else if (f > c && f < hi) bank[m][k] = (hi - f) / (hi - c);
    }
  }
  return bank;
}

}  // namespace

std::vector<double> MelCenterFrequencies(int n_mels, int sample_rate) {
  auto edges = MelEdges(n_mels, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

void Fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::size_t NumFrames(std::size_t num_samples, int sample_rate,
                      const FbankOptions& opts) {
  auto frame = static_cast<std::size_t>(std::lround(sample_rate * opts.frame_length_ms / 1000.0));
  auto shift = static_cast<std::size_t>(std::lround(sample_rate * opts.frame_shift_ms / 1000.0));
  if (num_samples < frame) return 0;
  return 1 + (num_samples - frame) / shift;
}

Tensor LogMelFeatures(const Waveform& wave, const FbankOptions& opts) {
  const int sr = wave.sample_rate;
  auto frame = static_cast<std::size_t>(std::lround(sr * opts.frame_length_ms / 1000.0));
  auto shift = static_cast<std::size_t>(std::lround(sr * opts.frame_shift_ms / 1000.0));
  if (frame == 0 || shift == 0) throw std::invalid_argument("empty analysis frame");
  if (wave.samples.size() < frame)
    throw std::invalid_argument("waveform of " + std::to_string(wave.samples.size()) +
                                " samples is shorter than one " +
                                std::to_string(frame) + "-sample frame");
  const std::size_t frames = NumFrames(wave.samples.size(), sr, opts);
  const std::size_t nfft = NextPow2(frame);
  const auto bank = MelBank(opts.n_mels, sr, nfft);
  std::vector<double> window(frame);
  for (std::size_t i = 0; i < frame; ++i)
    window[i] = frame > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (frame - 1))
                          : 1.0;

  Tensor feats = Tensor::Matrix(frames, opts.n_mels);
  std::vector<double> buf(frame);
  std::vector<std::complex<double>> spec(nfft);
  std::vector<double> mag(nfft / 2 + 1);
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy_n(wave.samples.begin() + t * shift, frame, buf.begin());
    for (std::size_t i = frame - 1; i > 0; --i) buf[i] -= opts.preemphasis * buf[i - 1];
    buf[0] -= opts.preemphasis * buf[0];
    std::fill(spec.begin(), spec.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < frame; ++i) spec[i] = buf[i] * window[i];
    Fft(spec);
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]);
    for (int m = 0; m < opts.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < mag.size(); ++k) e += bank[m][k] * mag[k];
      if (!std::isfinite(e)) e = 0.0;
      feats.at(t, m) = std::log(std::max(e, opts.log_floor));
    }
  }
  return feats;
}

namespace {

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double Gaussian(std::mt19937_64& rng) {
  double u1 = Uniform01(rng);
  double u2 = Uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

Waveform SynthWaveform(const std::vector<std::string>& tokens,
                       const std::map<std::string, Signature>& signatures,
                       const SynthOptions& opts, std::uint64_t seed) {
  if (opts.rate <= 0) throw std::invalid_argument("speaking rate must be positive");
  Waveform out;
  out.sample_rate = opts.sample_rate;
  if (tokens.empty()) return out;
  const double sr = opts.sample_rate;
  const auto cf = static_cast<std::size_t>(std::lround(opts.crossfade_ms * sr / 1000.0));
  const auto ramp = std::max<std::size_t>(
      cf, static_cast<std::size_t>(std::lround(opts.ramp_ms * sr / 1000.0)));

  struct Segment {
    const std::vector<double>* chord;
    std::size_t length;
  };
  std::vector<Segment> segments;
  std::size_t total = 0;
  for (const std::string& tok : tokens) {
    auto it = signatures.find(tok);
    if (it == signatures.end())
      throw std::invalid_argument("no spectral signature for token '" + tok + "'");
    const Signature& sig = it->second;
    if (sig.chords.empty())
      throw std::invalid_argument("empty signature for token '" + tok + "'");
    auto len = static_cast<std::size_t>(std::lround(sig.weight / opts.rate * sr));
    len = std::max<std::size_t>(len, sig.chords.size());
    std::size_t per = len / sig.chords.size();
    for (std::size_t c = 0; c < sig.chords.size(); ++c) {
      std::size_t l = c + 1 == sig.chords.size() ? len - per * c : per;
      segments.push_back({&sig.chords[c], l});
    }
    total += len;
  }

  std::mt19937_64 rng(seed);
  out.samples.assign(total + cf, 0.0);
  std::size_t offset = 0;
  for (const Segment& seg : segments) {
    const std::size_t n = seg.length + cf;
    const std::size_t r = std::min(ramp, n / 2);
    const auto& chord = *seg.chord;
    const double amp = 0.3 / std::sqrt(static_cast<double>(chord.size()));
    std::vector<double> phase(chord.size());
    for (double& p : phase) p = 2.0 * std::numbers::pi * Uniform01(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double env = 1.0;
      if (r > 0 && i < r) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / r);
      if (r > 0 && n - 1 - i < r)
        env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / r));
      double s = 0.0;
      for (std::size_t k = 0; k < chord.size(); ++k)
        s += std::sin(2.0 * std::numbers::pi * chord[k] * opts.pitch_scale * i / sr +
                      phase[k]);
      out.samples[offset + i] += env * amp * s;
    }
    offset += seg.length;
  }

  double power = 0.0;
  for (double v : out.samples) power += v * v;
  power /= static_cast<double>(out.samples.size());
  if (power > 0.0 && std::isfinite(opts.snr_db)) {
    double sigma = std::sqrt(power / std::pow(10.0, opts.snr_db / 10.0));
    for (double& v : out.samples) v += sigma * Gaussian(rng);
  }
  return out;
}

namespace {

void PutLe(std::ofstream& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetLe(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

struct WavInfo {
  int sample_rate = 0;
  std::size_t data_offset = 0;
  std::size_t data_bytes = 0;
};

WavInfo ParseWavHeader(const std::string& bytes, const std::string& path) {
  auto u = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0)
    throw std::runtime_error(path + ": not a RIFF/WAVE file");
  WavInfo info;
  bool fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string id = bytes.substr(pos, 4);
    std::size_t size = GetLe(u + pos + 4, 4);
    std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > bytes.size())
        throw std::runtime_error(path + ": short fmt chunk");
      int format = GetLe(u + body, 2), channels = GetLe(u + body + 2, 2);
      int bits = GetLe(u + body + 14, 2);
      if (format != 1 || channels != 1 || bits != 16)
        throw std::runtime_error(path + ": only mono 16-bit PCM is supported");
      info.sample_rate = static_cast<int>(GetLe(u + body + 4, 4));
      fmt = true;
    } else if (id == "data") {
      if (!fmt) throw std::runtime_error(path + ": data chunk before fmt chunk");
      info.data_offset = body;
      info.data_bytes = std::min(size, bytes.size() - body);
      return info;
    }
    pos = body + size + (size & 1);
  }
  throw std::runtime_error(path + ": no data chunk");
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void WriteWav(const std::string& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  out.write("RIFF", 4);
  PutLe(out, 36 + 2 * n, 4);
  out.write("WAVEfmt ", 8);
  PutLe(out, 16, 4);
  PutLe(out, 1, 2);
  PutLe(out, 1, 2);
  PutLe(out, static_cast<std::uint32_t>(wave.sample_rate), 4);
  PutLe(out, static_cast<std::uint32_t>(wave.sample_rate) * 2, 4);
  PutLe(out, 2, 2);
  PutLe(out, 16, 2);
  out.write("data", 4);
  PutLe(out, 2 * n, 4);
  for (double v : wave.samples) {
    double c = std::clamp(v, -1.0, 1.0);
    auto s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    PutLe(out, static_cast<std::uint16_t>(s), 2);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Waveform ReadWav(const std::string& path) {
  std::string bytes = Slurp(path);
  WavInfo info = ParseWavHeader(bytes, path);
  auto u = reinterpret_cast<const unsigned char*>(bytes.data()) + info.data_offset;
  Waveform w;
  w.sample_rate = info.sample_rate;
  w.samples.resize(info.data_bytes / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    auto s = static_cast<std::int16_t>(GetLe(u + 2 * i, 2));
    w.samples[i] = s / 32767.0;
  }
  return w;
}

double WavDurationSec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string head(4096, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  WavInfo info = ParseWavHeader(head, path);
  in.clear();
  in.seekg(0, std::ios::end);
  auto file_size = static_cast<std::size_t>(in.tellg());
  std::size_t declared = GetLe(reinterpret_cast<const unsigned char*>(head.data()) +
                                   info.data_offset - 4, 4);
  std::size_t data = std::min(declared, file_size - info.data_offset);
  return static_cast<double>(data / 2) / info.sample_rate;
}

}  // namespace csasr
