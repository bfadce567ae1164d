// src/pipeline.cc

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

#include "csasr/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "csasr/corpus.h"
#include "csasr/params.h"
#include "csasr/scoring.h"
#include "csasr/text.h"

namespace csasr {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::string& path, const std::string& bytes) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << bytes;
    if (!out.flush()) throw std::runtime_error("write failed: " + path);
  }
  fs::rename(tmp, p);
}

// ---- variants

VariantFlags ParseVariant(const std::string& name, double slow_factor) {
  auto bad = [&](const std::string& why) {
    throw std::invalid_argument("bad variant '" + name + "': " + why);
  };
  std::vector<std::string> parts = SplitString(name, '+');
  VariantFlags f;
  if (parts.empty() || parts[0] == "E2E") {
  } else if (parts[0] == "E2ELD") {
    f.lid = true;
  } else if (parts[0] == "E2ESW") {
    f.subword = true;
  } else {
    bad("base must be E2E, E2ELD or E2ESW");
  }
  static const std::vector<std::string> order = {"SL", "3W", "F3", "SF", "CF"};
  std::size_t next = 0;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    std::size_t k = next;
    while (k < order.size() && order[k] != parts[i]) ++k;
    if (k == order.size()) bad("unknown or out-of-order suffix '" + parts[i] + "'");
    next = k + 1;
    if (parts[i] == "SL") {
      if (!(slow_factor > 0.0) || slow_factor == 1.0) bad("SL needs a slow factor other than 1");
      f.slow = slow_factor;
    } else if (parts[i] == "3W") {
      f.three_way = true;
    } else if (parts[i] == "F3") {
      f.mono = true;
    } else if (parts[i] == "SF") {
      f.fusion = FusionMode::kShallow;
    } else {
      if (f.fusion != FusionMode::kNone) bad("SF and CF are exclusive");
      f.fusion = FusionMode::kCold;
    }
  }
  if (f.lid && f.fusion == FusionMode::kCold) bad("cold fusion has no class-factored output");
  return f;
}

std::string VariantName(const VariantFlags& f) {
  std::string s = f.lid ? "E2ELD" : f.subword ? "E2ESW" : "E2E";
  if (f.slow != 1.0) s += "+SL";
  if (f.three_way) s += "+3W";
  if (f.mono) s += "+F3";
  if (f.fusion == FusionMode::kShallow) s += "+SF";
  if (f.fusion == FusionMode::kCold) s += "+CF";
  return s;
}

// ---- config

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument("config: " + where_ + " must be an object");
  }
  template <typename T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + where_ + "." + key + ": " + e.what());
    }
  }
  const json* Sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void Done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw std::invalid_argument("config: unknown key " + where_ + "." + it.key());
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ordered_json SynthJson(const SynthSpec& s) {
  ordered_json j;
  j["inventory_a"] = s.inventory_a;
  j["inventory_b"] = s.inventory_b;
  j["switch_prob"] = s.switch_prob;
  j["initial_a_prob"] = s.initial_a_prob;
  j["min_tokens"] = s.min_tokens;
  j["max_tokens"] = s.max_tokens;
  j["min_rate"] = s.min_rate;
  j["max_rate"] = s.max_rate;
  j["particle_prob"] = s.particle_prob;
  j["nonling_prob"] = s.nonling_prob;
  j["particles"] = s.particles;
  j["nonlinguistic"] = s.nonlinguistic;
  j["num_speakers"] = s.num_speakers;
  j["snr_db"] = s.snr_db;
  return j;
}

void ReadSynth(Reader& r, SynthSpec& s) {
  r("inventory_a", s.inventory_a);
  r("inventory_b", s.inventory_b);
  r("switch_prob", s.switch_prob);
  r("initial_a_prob", s.initial_a_prob);
  r("min_tokens", s.min_tokens);
  r("max_tokens", s.max_tokens);
  r("min_rate", s.min_rate);
  r("max_rate", s.max_rate);
  r("particle_prob", s.particle_prob);
  r("nonling_prob", s.nonling_prob);
  r("particles", s.particles);
  r("nonlinguistic", s.nonlinguistic);
  r("num_speakers", s.num_speakers);
  r("snr_db", s.snr_db);
}

ordered_json DataJson(const DataConfig& d) {
  ordered_json j = SynthJson(d.synth);
  j["train"] = d.train;
  j["dev"] = d.dev;
  j["eval"] = d.eval;
  j["mono"] = d.mono;
  j["seed"] = d.seed;
  j["dir"] = d.dir;
  return j;
}

ordered_json TrainJson(const TrainConfig& t, bool asr) {
  ordered_json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["optimizer"] = OptimizerName(t.optimizer);
  j["learning_rate"] = t.learning_rate;
  j["lr_decay"] = t.lr_decay;
  j["decay_every"] = t.decay_every;
  j["clip_norm"] = t.clip_norm;
  if (asr) {
    j["lambda"] = t.loss.lambda;
    j["label_smoothing"] = t.loss.label_smoothing;
  }
  return j;
}

void ReadTrain(const json& j, const std::string& where, TrainConfig& t, bool asr) {
  Reader r(j, where);
  r("epochs", t.epochs);
  r("batch_size", t.batch_size);
  std::string opt = OptimizerName(t.optimizer);
  r("optimizer", opt);
  t.optimizer = ParseOptimizer(opt);
  r("learning_rate", t.learning_rate);
  r("lr_decay", t.lr_decay);
  r("decay_every", t.decay_every);
  r("clip_norm", t.clip_norm);
  if (asr) {
    r("lambda", t.loss.lambda);
    r("label_smoothing", t.loss.label_smoothing);
  }
  r.Done();
}

// Model settings that do not come from the vocabulary or the variant.
ModelConfig ResolvedModel(const ExperimentConfig& c, const MixedVocab* vocab) {
  ModelConfig m = c.model;
  m.input_dim = c.fbank.n_mels;
  m.mode = c.variant.fusion == FusionMode::kCold ? OutputMode::kColdFusion
           : c.variant.lid                        ? OutputMode::kHierarchical
                                                  : OutputMode::kFlat;
  if (vocab) {
    m.vocab_size = static_cast<int>(vocab->size());
    m.unit_class.clear();
    if (m.mode == OutputMode::kHierarchical) m.unit_class = vocab->ClassOfEachUnit();
  }
  return m;
}

}  // namespace

void ExperimentConfig::Validate() const {
  auto bad = [](const std::string& why) { throw std::invalid_argument("invalid config: " + why); };
  if (label != 1 && label != 2) bad("label must be 1 or 2");
  data.synth.Validate();
  if (data.train < 1) bad("data.train must be >= 1");
  if (data.dev < 0 || data.eval < 0 || data.mono < 0) bad("negative split size");
  if (variant.mono && data.mono < 1) bad("variant F3 needs data.mono >= 1");
  if (variant.lid && variant.fusion == FusionMode::kCold) bad("E2ELD cannot use cold fusion");
  if (!(slow_factor >= 0.5 && slow_factor <= 2.0)) bad("slow_factor outside [0.5, 2]");
  if (num_merges < 0) bad("vocab.num_merges must be >= 0");
  if (fbank.n_mels < 1) bad("fbank.n_mels must be >= 1");
  if (nbest < 1) bad("nbest must be >= 1");
  if (variant.fusion == FusionMode::kCold && lm.units != model.decoder_units)
    bad("cold fusion needs lm.units == model.decoder_units");
  if (lm.embed_dim < 1 || lm.units < 1) bad("lm sizes must be >= 1");
  // Vocabulary-dependent checks happen once the vocabulary exists; use a
  // placeholder for the rest.
  ModelConfig m = ResolvedModel(*this, nullptr);
  m.vocab_size = 7;
  if (m.mode == OutputMode::kHierarchical) m.unit_class = {2, 2, 2, 0, 0, 1, 1};
  m.Validate();
  train.Validate();
  lm_train.Validate();
  DecodeConfig d = decode;
  d.fusion = variant.fusion;
  d.Validate();
}

nlohmann::ordered_json ConfigToJson(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["label"] = c.label;
  j["variant"] = VariantName(c.variant);
  j["slow_factor"] = c.slow_factor;
  j["data"] = DataJson(c.data);
  j["vocab"] = {{"num_merges", c.num_merges}, {"num_subwords", c.num_subwords}};
  ordered_json fb;
  fb["n_mels"] = c.fbank.n_mels;
  fb["frame_length_ms"] = c.fbank.frame_length_ms;
  fb["frame_shift_ms"] = c.fbank.frame_shift_ms;
  fb["preemphasis"] = c.fbank.preemphasis;
  fb["log_floor"] = c.fbank.log_floor;
  j["fbank"] = fb;
  const ModelConfig& m = c.model;
  ordered_json mj;
  mj["encoder_layers"] = m.encoder_layers;
  mj["encoder_units"] = m.encoder_units;
  mj["subsample"] = m.subsample;
  mj["attention_dim"] = m.attention_dim;
  mj["conv_channels"] = m.conv_channels;
  mj["conv_width"] = m.conv_width;
  mj["embed_dim"] = m.embed_dim;
  mj["decoder_units"] = m.decoder_units;
  mj["cf_feature_dim"] = m.cf_feature_dim;
  mj["cf_hidden"] = m.cf_hidden;
  mj["init_scale"] = m.init_scale;
  j["model"] = mj;
  j["train"] = TrainJson(c.train, true);
  j["lm"] = {{"embed_dim", c.lm.embed_dim}, {"units", c.lm.units}};
  j["lm_train"] = TrainJson(c.lm_train, false);
  ordered_json dj;
  dj["beam"] = c.decode.beam;
  dj["ctc_weight"] = c.decode.ctc_weight;
  dj["lm_weight"] = c.decode.lm_weight;
  dj["max_len_ratio"] = c.decode.max_len_ratio;
  dj["end_margin"] = c.decode.end_margin;
  dj["nbest"] = c.nbest;
  j["decode"] = dj;
  return j;
}

ExperimentConfig ConfigFromJson(const nlohmann::json& j) {
  ExperimentConfig c;
  Reader r(j, "config");
  r("name", c.name);
  r("seed", c.seed);
  r("label", c.label);
  std::string variant = "E2E";
  r("variant", variant);
  r("slow_factor", c.slow_factor);
  c.variant = ParseVariant(variant, c.slow_factor);
  if (const json* d = r.Sub("data")) {
    Reader dr(*d, "data");
    ReadSynth(dr, c.data.synth);
    dr("train", c.data.train);
    dr("dev", c.data.dev);
    dr("eval", c.data.eval);
    dr("mono", c.data.mono);
    dr("seed", c.data.seed);
    dr("dir", c.data.dir);
    dr.Done();
  }
  if (const json* v = r.Sub("vocab")) {
    Reader vr(*v, "vocab");
    vr("num_merges", c.num_merges);
    vr("num_subwords", c.num_subwords);
    vr.Done();
  }
  if (const json* f = r.Sub("fbank")) {
    Reader fr(*f, "fbank");
    fr("n_mels", c.fbank.n_mels);
    fr("frame_length_ms", c.fbank.frame_length_ms);
    fr("frame_shift_ms", c.fbank.frame_shift_ms);
    fr("preemphasis", c.fbank.preemphasis);
    fr("log_floor", c.fbank.log_floor);
    fr.Done();
  }
  if (const json* m = r.Sub("model")) {
    Reader mr(*m, "model");
    ModelConfig& mc = c.model;
    mr("encoder_layers", mc.encoder_layers);
    mr("encoder_units", mc.encoder_units);
    mr("subsample", mc.subsample);
    mr("attention_dim", mc.attention_dim);
    mr("conv_channels", mc.conv_channels);
    mr("conv_width", mc.conv_width);
    mr("embed_dim", mc.embed_dim);
    mr("decoder_units", mc.decoder_units);
    mr("cf_feature_dim", mc.cf_feature_dim);
    mr("cf_hidden", mc.cf_hidden);
    mr("init_scale", mc.init_scale);
    mr.Done();
  }
  if (const json* t = r.Sub("train")) ReadTrain(*t, "train", c.train, true);
  if (const json* l = r.Sub("lm")) {
    Reader lr(*l, "lm");
    lr("embed_dim", c.lm.embed_dim);
    lr("units", c.lm.units);
    lr.Done();
  }
  if (const json* t = r.Sub("lm_train")) ReadTrain(*t, "lm_train", c.lm_train, false);
  if (const json* d = r.Sub("decode")) {
    Reader dr(*d, "decode");
    dr("beam", c.decode.beam);
    dr("ctc_weight", c.decode.ctc_weight);
    dr("lm_weight", c.decode.lm_weight);
    dr("max_len_ratio", c.decode.max_len_ratio);
    dr("end_margin", c.decode.end_margin);
    dr("nbest", c.nbest);
    dr.Done();
  }
  r.Done();
  c.train.seed = c.seed;
  c.lm_train.seed = c.seed;
  c.decode.fusion = c.variant.fusion;
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  json j;
  try {
    j = json::parse(ReadFileBytes(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return ConfigFromJson(j);
}

// ---- experiment directory

namespace {

const char* kSplits[] = {"train", "dev", "eval"};

void Require(const std::string& path, const std::string& stage) {
  if (!fs::exists(path)) throw MissingStageError(path, stage);
}

void Log(const StageOptions& o, const std::string& stage, const std::string& msg) {
  if (o.log) *o.log << "[" << stage << "] " << msg << std::endl;
}

void WriteStamp(const std::string& path, const std::string& stage, ordered_json extra) {
  ordered_json j;
  j["stage"] = stage;
  j["format_version"] = 1;
  for (auto& [k, v] : extra.items()) j[k] = v;
  WriteFileBytes(path, j.dump(2) + "\n");
}

json ReadJson(const std::string& path) { return json::parse(ReadFileBytes(path)); }

// Training logs without wall-clock fields, so reruns are byte-identical.
std::string DeterministicLog(const std::string& raw) {
  std::string out;
  std::istringstream in(raw);
  for (std::string line; std::getline(in, line);) {
    if (Trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line);
    j.erase("seconds");
    out += j.dump() + "\n";
  }
  return out;
}

SynthSpec SplitSpec(const DataConfig& d, int n, std::uint64_t salt) {
  SynthSpec s = d.synth;
  s.num_utterances = n;
  s.seed = d.seed * 1000003ULL + salt;
  return s;
}

ParamSet LoadFeats(const std::string& path) { return LoadCheckpoint(path); }

std::vector<std::string> ReadLines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(ReadFileBytes(path));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

Experiment Experiment::Create(const std::string& dir, const ExperimentConfig& config,
                              bool overwrite) {
  config.Validate();
  const std::string path = dir + "/config.json";
  const std::string bytes = ConfigToJson(config).dump(2) + "\n";
  if (fs::exists(path) && !overwrite && ReadFileBytes(path) != bytes)
    throw std::runtime_error(path + " holds a different config; use a new directory or --force");
  WriteFileBytes(path, bytes);
  return Experiment(dir, config);
}

Experiment Experiment::Open(const std::string& dir) {
  const std::string path = dir + "/config.json";
  Require(path, "init");
  return Experiment(dir, LoadConfig(path));
}

std::string Experiment::DataDir() const {
  fs::path p(config_.data.dir);
  if (p.is_relative()) p = fs::path(dir_) / p;
  return p.lexically_normal().string();
}

void Experiment::GenData(const StageOptions& o) const {
  const std::string dd = DataDir();
  const std::string stamp = dd + "/gen-data.json";
  ordered_json want = DataJson(config_.data);
  want.erase("dir");
  if (fs::exists(stamp)) {
    json have = ReadJson(stamp);
    if (have.value("data", json()) == json(want)) {
      Log(o, "gen-data", dd + " is up to date");
      return;
    }
    throw std::runtime_error(dd + " was generated from a different data config");
  }
  const DataConfig& d = config_.data;
  const SynthLexicon lex = BuildSynthLexicon(d.synth);
  const Lexicon particles = SynthParticleLexicon(d.synth);
  fs::create_directories(dd + "/wav");
  particles.Save(dd + "/lexicon.tsv");

  struct Part {
    std::string split, prefix;
    SynthSpec spec;
  };
  std::vector<Part> parts = {{"train", "tr", SplitSpec(d, d.train, 1)},
                             {"dev", "dv", SplitSpec(d, d.dev, 2)},
                             {"eval", "ev", SplitSpec(d, d.eval, 3)}};
  if (d.mono > 0) {
    SynthSpec a = SplitSpec(d, d.mono, 4), b = SplitSpec(d, d.mono, 5);
    a.switch_prob = b.switch_prob = 0.0;
    a.initial_a_prob = 1.0;
    b.initial_a_prob = 0.0;
    parts.push_back({"mono", "mm", a});
    parts.push_back({"mono", "me", b});
  }
  std::map<std::string, Manifest> manifests;
  std::map<std::string, std::vector<double>> durations;
  for (const Part& p : parts) {
    Manifest& m = manifests[p.split];
    m.split = p.split;
    for (const SynthUtterance& u : GenTranscripts(p.spec, lex, p.prefix)) {
      Waveform w = RenderUtterance(u, lex, p.spec);
      const std::string rel = "wav/" + u.id + ".wav";
      WriteWav(dd + "/" + rel, w);
      m.entries.push_back({u.id, rel, u.speaker, u.Text()});
      durations[p.split].push_back(w.DurationSec());
    }
    Log(o, "gen-data", p.split + "/" + p.prefix + ": " + std::to_string(p.spec.num_utterances) +
                           " utterances");
  }
  std::vector<std::pair<std::string, CorpusStats>> rows;
  for (auto& [split, m] : manifests) {
    ValidateManifest(m);
    WriteManifest(dd + "/" + split + ".tsv", m);
    if (m.entries.empty()) continue;
    rows.push_back({split, ComputeCorpusStats(m, particles, durations[split])});
  }
  WriteFileBytes(dd + "/stats.txt", FormatStatsTable(rows));
  WriteStamp(stamp, "gen-data", {{"data", want}});
}

void Experiment::Prep(const StageOptions& o, int label) const {
  const ExperimentConfig& c = config_;
  if (label == 0) label = c.label;
  if (label != 1 && label != 2) throw std::invalid_argument("label must be 1 or 2");
  const std::string dd = DataDir();
  Require(dd + "/gen-data.json", "gen-data");
  if (c.variant.mono) Require(dd + "/mono.tsv", "gen-data");
  const Lexicon lex = Lexicon::Load(dd + "/lexicon.tsv");
  const std::string out = Path("prep");
  fs::create_directories(out);

  auto convert = [&](const std::string& text) {
    Transcript t = ParseTranscript(text, lex);
    if (label == 2) t = MergeNonlinguistic(t, lex);
    return t.Text();
  };
  auto load = [&](const std::string& split) {
    Manifest m = ReadManifest(dd + "/" + split + ".tsv", split);
    AudioSet set;
    set.split = split;
    for (const auto& e : m.entries) {
      Waveform w = ReadWav(e.audio_path);
      if (c.variant.slow != 1.0) w = ResampleSpeed(w, c.variant.slow);
      set.utterances.push_back({e.id, e.speaker, convert(e.transcript), std::move(w)});
    }
    return std::make_pair(m, set);
  };

  std::map<std::string, std::pair<Manifest, AudioSet>> sets;
  for (const char* split : kSplits) sets[split] = load(split);
  std::vector<std::string> lm_text;
  for (const auto& u : sets["train"].second.utterances) lm_text.push_back(u.transcript);
  if (c.variant.three_way) sets["train"].second = Perturb3Way(sets["train"].second);
  if (c.variant.mono) {
    // Monolingual data joins after perturbation and is not perturbed.
    auto mono = load("mono");
    for (auto& u : mono.second.utterances) {
      lm_text.push_back(u.transcript);
      sets["train"].second.utterances.push_back(std::move(u));
    }
    for (const auto& e : mono.first.entries) sets["train"].first.entries.push_back(e);
  }

  // Source audio per id, for the prep manifests.
  std::map<std::string, std::string> source;
  for (auto& [split, s] : sets)
    for (const auto& e : s.first.entries)
      source[e.id] = fs::relative(e.audio_path, out).lexically_normal().string();

  std::map<std::string, std::vector<Tensor>> feats;
  const std::size_t dims = static_cast<std::size_t>(c.fbank.n_mels);
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  double frames = 0.0;
  for (auto& [split, s] : sets) {
    for (const auto& u : s.second.utterances) {
      Tensor f = LogMelFeatures(u.audio, c.fbank);
      if (split == "train") {
        for (std::size_t t = 0; t < f.rows(); ++t)
          for (std::size_t k = 0; k < dims; ++k) {
            sum[k] += f.at(t, k);
            sq[k] += f.at(t, k) * f.at(t, k);
          }
        frames += static_cast<double>(f.rows());
      }
      feats[split].push_back(std::move(f));
    }
  }
  if (frames == 0.0) throw std::runtime_error("prep: no training frames");
  Tensor mean = Tensor::Matrix(1, dims), stddev = Tensor::Matrix(1, dims);
  for (std::size_t k = 0; k < dims; ++k) {
    mean[k] = sum[k] / frames;
    stddev[k] = std::sqrt(std::max(sq[k] / frames - mean[k] * mean[k], 1e-10));
  }
  ParamSet cmvn;
  cmvn.Add("mean", mean.shape()) = mean;
  cmvn.Add("std", stddev.shape()) = stddev;
  SaveCheckpoint(out + "/cmvn.ck", cmvn);

  for (auto& [split, s] : sets) {
    ParamSet fs_;
    Manifest m;
    m.split = split;
    for (std::size_t i = 0; i < s.second.utterances.size(); ++i) {
      const AudioUtterance& u = s.second.utterances[i];
      Tensor& f = feats[split][i];
      for (std::size_t t = 0; t < f.rows(); ++t)
        for (std::size_t k = 0; k < dims; ++k) f.at(t, k) = (f.at(t, k) - mean[k]) / stddev[k];
      fs_.Add(u.id, f.shape()) = f;
      // Perturbed copies point at their unperturbed source.
      std::string base = u.id;
      if (!source.count(base)) base = base.substr(0, base.rfind("-sp"));
      m.entries.push_back({u.id, source.at(base), u.speaker, u.transcript});
    }
    SaveCheckpoint(out + "/feats_" + split + ".ck", fs_);
    WriteManifest(out + "/" + split + ".tsv", m);
    Log(o, "prep", split + ": " + std::to_string(m.entries.size()) + " utterances");
  }
  std::string text;
  for (const auto& t : lm_text) text += t + "\n";
  WriteFileBytes(out + "/lm_text.txt", text);
  WriteStamp(out + "/stage.json", "prep",
             {{"label", label},
              {"slow", c.variant.slow},
              {"three_way", c.variant.three_way},
              {"mono", c.variant.mono}});
}

void Experiment::TrainBpe(const StageOptions& o) const {
  Require(Path("prep/stage.json"), "prep");
  const Lexicon lex = Lexicon::Load(DataDir() + "/lexicon.tsv");
  const std::vector<std::string> texts = ReadLines(Path("prep/lm_text.txt"));
  BuildVocabOptions opts;
  MergeTable merges;
  if (config_.variant.subword) {
    opts.mode = VocabMode::kSubword;
    opts.num_subwords = config_.num_subwords;
    merges = ::csasr::TrainBpe(EnglishWordCounts(texts, lex), config_.num_merges);
  }
  UnitCodec codec = BuildCodec(texts, lex, opts, merges);
  fs::create_directories(Path("bpe"));
  codec.vocab().Save(Path("bpe/vocab.txt"));
  codec.merges().Save(Path("bpe/merges.txt"));
  WriteStamp(Path("bpe/stage.json"), "train-bpe",
             {{"mode", config_.variant.subword ? "subword" : "char"},
              {"vocab_size", codec.vocab().size()},
              {"merges", codec.merges().size()}});
  Log(o, "train-bpe", std::to_string(codec.vocab().size()) + " units, " +
                          std::to_string(codec.merges().size()) + " merges");
}

UnitCodec Experiment::LoadCodec() const {
  Require(Path("bpe/stage.json"), "train-bpe");
  const json stamp = ReadJson(Path("bpe/stage.json"));
  const VocabMode mode = stamp.at("mode") == "subword" ? VocabMode::kSubword : VocabMode::kChar;
  return UnitCodec(MixedVocab::Load(Path("bpe/vocab.txt")), mode,
                   MergeTable::Load(Path("bpe/merges.txt")),
                   Lexicon::Load(DataDir() + "/lexicon.tsv"));
}

std::vector<TrainExample> Experiment::LoadExamples(const std::string& split,
                                                   const UnitCodec& codec) const {
  Require(Path("prep/stage.json"), "prep");
  const Manifest m = ReadManifest(Path("prep/" + split + ".tsv"), split);
  const ParamSet feats = LoadFeats(Path("prep/feats_" + split + ".ck"));
  std::vector<TrainExample> out;
  for (const auto& e : m.entries) out.push_back({e.id, feats.Get(e.id), codec.Encode(e.transcript)});
  return out;
}

AsrModel Experiment::LoadModel(const UnitCodec& codec) const {
  Require(Path("train/model.ck"), "train");
  return AsrModel(ResolvedModel(config_, &codec.vocab()), LoadCheckpoint(Path("train/model.ck")));
}

void Experiment::LmTrain(const StageOptions& o) const {
  const UnitCodec codec = LoadCodec();
  std::vector<std::vector<int>> train, dev;
  for (const auto& t : ReadLines(Path("prep/lm_text.txt"))) train.push_back(codec.Encode(t));
  for (const auto& e : ReadManifest(Path("prep/dev.tsv"), "dev").entries)
    dev.push_back(codec.Encode(e.transcript));
  LmConfig lc = config_.lm;
  lc.vocab_size = static_cast<int>(codec.vocab().size());
  RnnLm lm(lc, config_.seed);
  std::ostringstream raw;
  TrainResult r = TrainLm(lm, train, dev, config_.lm_train, &raw);
  fs::create_directories(Path("lm"));
  SaveCheckpoint(Path("lm/lm.ck"), lm.params());
  WriteFileBytes(Path("lm/log.jsonl"), DeterministicLog(raw.str()));
  WriteStamp(Path("lm/stage.json"), "lm-train",
             {{"best_epoch", r.best_epoch}, {"best_dev_loss", r.best_dev_loss}});
  Log(o, "lm-train", "best epoch " + std::to_string(r.best_epoch) + ", dev loss " +
                         std::to_string(r.best_dev_loss));
}

namespace {

std::unique_ptr<RnnLm> LoadLm(const Experiment& e, const UnitCodec& codec) {
  Require(e.Path("lm/lm.ck"), "lm-train");
  LmConfig lc = e.config().lm;
  lc.vocab_size = static_cast<int>(codec.vocab().size());
  return std::make_unique<RnnLm>(lc, LoadCheckpoint(e.Path("lm/lm.ck")));
}

}  // namespace

void Experiment::Train(const StageOptions& o) const {
  const UnitCodec codec = LoadCodec();
  const std::vector<TrainExample> train = LoadExamples("train", codec);
  const std::vector<TrainExample> dev = LoadExamples("dev", codec);
  std::unique_ptr<RnnLm> lm;
  if (config_.variant.fusion == FusionMode::kCold) lm = LoadLm(*this, codec);
  AsrModel model(ResolvedModel(config_, &codec.vocab()), config_.seed);
  if (lm) model.AttachLm(lm.get());
  TrainConfig tc = config_.train;
  tc.seed = config_.seed;
  tc.loss.use_lid = config_.variant.lid;
  std::ostringstream raw;
  auto hook = [&](const EpochRecord& r) {
    if (o.log)
      *o.log << "[train] epoch " << r.epoch << " loss " << r.train_loss << " dev " << r.dev_loss
             << " (" << r.seconds << " s)" << std::endl;
    return true;
  };
  TrainResult r = TrainAsr(model, train, dev, tc, &raw, hook);
  fs::create_directories(Path("train"));
  SaveCheckpoint(Path("train/model.ck"), model.params());
  WriteFileBytes(Path("train/log.jsonl"), DeterministicLog(raw.str()));
  WriteStamp(Path("train/stage.json"), "train",
             {{"best_epoch", r.best_epoch},
              {"best_dev_loss", r.best_dev_loss},
              {"mode", OutputModeName(model.config().mode)},
              {"vocab_size", model.config().vocab_size}});
}

namespace {

std::vector<DecodeResult> DecodeAll(const AsrModel& model, const std::vector<TrainExample>& data,
                                    const DecodeConfig& dc, const RnnLm* lm, int jobs_wanted) {
  std::vector<DecodeResult> results(data.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < data.size();) {
      try {
        results[i] = DecodeUtterance(model, data[i].feats, dc, lm);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(jobs_wanted, static_cast<int>(data.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

std::vector<RefEntry> SplitRefs(const Experiment& e, const std::string& split) {
  std::vector<RefEntry> refs;
  for (const auto& m : ReadManifest(e.Path("prep/" + split + ".tsv"), split).entries)
    refs.push_back({m.id, m.transcript});
  return refs;
}

}  // namespace

void Experiment::Decode(const std::string& split, const StageOptions& o) const {
  const UnitCodec codec = LoadCodec();
  AsrModel model = LoadModel(codec);
  const FusionMode fusion = config_.variant.fusion;
  std::unique_ptr<RnnLm> lm;
  if (fusion != FusionMode::kNone) lm = LoadLm(*this, codec);
  if (fusion == FusionMode::kCold) model.AttachLm(lm.get());
  const std::vector<TrainExample> data = LoadExamples(split, codec);
  DecodeConfig dc = config_.decode;
  dc.fusion = fusion;
  const std::vector<DecodeResult> results =
      DecodeAll(model, data, dc, fusion == FusionMode::kShallow ? lm.get() : nullptr, o.jobs);

  std::string nbest, hyps;
  std::size_t incomplete = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const DecodeResult& r = results[i];
    incomplete += !r.complete;
    for (std::size_t k = 0; k < r.nbest.size() && k < static_cast<std::size_t>(config_.nbest);
         ++k) {
      NbestEntry e;
      e.utt_id = data[i].id;
      e.rank = static_cast<int>(k) + 1;
      e.hyp = r.nbest[k];
      for (int u : e.hyp.units) e.unit_strings.push_back(codec.vocab().Unit(u));
      e.text = codec.Decode(e.hyp.units);
      nbest += FormatNbestLine(e) + "\n";
      if (k == 0) hyps += e.utt_id + "\t" + e.text + "\n";
    }
  }
  fs::create_directories(Path("decode"));
  WriteFileBytes(Path("decode/" + split + ".nbest.tsv"), nbest);
  WriteFileBytes(Path("decode/" + split + ".hyp.tsv"), hyps);
  WriteStamp(Path("decode/" + split + ".json"), "decode",
             {{"split", split},
              {"utterances", data.size()},
              {"incomplete", incomplete},
              {"fusion", FusionModeName(fusion)}});
  Log(o, "decode", split + ": " + std::to_string(data.size()) + " utterances, " +
                       std::to_string(incomplete) + " without a finished hypothesis");
}

std::vector<LmWeightPoint> Experiment::SweepLmWeight(const std::string& split,
                                                     const StageOptions& o) const {
  if (config_.variant.fusion == FusionMode::kCold)
    throw std::invalid_argument("lm weight sweep needs a model without cold fusion");
  const UnitCodec codec = LoadCodec();
  const AsrModel model = LoadModel(codec);
  const std::unique_ptr<RnnLm> lm = LoadLm(*this, codec);
  const std::vector<TrainExample> data = LoadExamples(split, codec);
  const Lexicon lex = Lexicon::Load(DataDir() + "/lexicon.tsv");
  const std::vector<RefEntry> refs = SplitRefs(*this, split);
  std::vector<LmWeightPoint> points;
  std::string lines;
  for (int step = 0; step <= 10; ++step) {
    DecodeConfig dc = config_.decode;
    dc.fusion = FusionMode::kShallow;
    dc.lm_weight = step / 10.0;
    const std::vector<DecodeResult> results = DecodeAll(model, data, dc, lm.get(), o.jobs);
    std::map<std::string, std::string> hyps;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!results[i].nbest.empty()) hyps[data[i].id] = codec.Decode(results[i].nbest[0].units);
    LmWeightPoint p;
    p.weight = dc.lm_weight;
    p.mer = ScoreCorpus(refs, hyps, false, lex).total.Mer();
    p.mer_stripped = ScoreCorpus(refs, hyps, true, lex).total.Mer();
    points.push_back(p);
    nlohmann::ordered_json j;
    j["lm_weight"] = p.weight;
    j["mer"] = p.mer;
    j["mer_nn"] = p.mer_stripped;
    lines += j.dump() + "\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s beta %.1f: MER %.2f%%", split.c_str(), p.weight, p.mer);
    Log(o, "sweep", buf);
  }
  fs::create_directories(Path("decode"));
  WriteFileBytes(Path("decode/" + split + ".lm_weight_sweep.jsonl"), lines);
  return points;
}

void Experiment::Score(const std::string& split, const StageOptions& o) const {
  Require(Path("decode/" + split + ".hyp.tsv"), "decode");
  const Lexicon lex = Lexicon::Load(DataDir() + "/lexicon.tsv");
  const std::vector<RefEntry> refs = SplitRefs(*this, split);
  std::map<std::string, std::string> hyps;
  std::istringstream in(ReadFileBytes(Path("decode/" + split + ".hyp.tsv")));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("bad hypothesis line: " + line);
    hyps[line.substr(0, tab)] = line.substr(tab + 1);
  }
  const ScoreReport with = ScoreCorpus(refs, hyps, false, lex);
  const ScoreReport without = ScoreCorpus(refs, hyps, true, lex);
  fs::create_directories(Path("score"));
  WriteFileBytes(Path("score/" + split + ".txt"), FormatScoreTable(with, without));
  WriteFileBytes(Path("score/" + split + ".jsonl"),
                 ScoreReportJsonLines(with) + ScoreReportJsonLines(without));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s: MER %.2f%%, without nlsyms %.2f%%", split.c_str(),
                with.total.Mer(), without.total.Mer());
  Log(o, "score", buf);
}

void Experiment::RunAll(const StageOptions& o) const {
  GenData(o);
  Prep(o);
  TrainBpe(o);
  if (config_.variant.fusion != FusionMode::kNone) LmTrain(o);
  Train(o);
  for (const char* split : {"dev", "eval"}) {
    Decode(split, o);
    Score(split, o);
  }
}

// ---- report

std::vector<GridRow> LoadGrid(const std::string& path) {
  const json j = ReadJson(path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<GridRow> rows;
  Reader r(j, "grid");
  const json* list = r.Sub("rows");
  r.Done();
  if (!list || !list->is_array()) throw std::invalid_argument(path + ": needs a \"rows\" array");
  for (const json& row : *list) {
    Reader rr(row, "grid.rows[]");
    GridRow g;
    rr("name", g.name);
    rr("experiments", g.experiments);
    rr.Done();
    if (g.name.empty() || g.experiments.empty())
      throw std::invalid_argument(path + ": every row needs a name and experiments");
    for (auto& e : g.experiments)
      if (fs::path(e).is_relative()) e = (base / e).lexically_normal().string();
    rows.push_back(std::move(g));
  }
  return rows;
}

namespace {

const char* kColumns[4] = {"dev", "dev(nn)", "eval", "eval(nn)"};

// ALL-row MER from one score file, for the kept or stripped variant.
double ReadMer(const std::string& path, bool stripped) {
  std::istringstream in(ReadFileBytes(path));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.value("class", "") == "ALL" && j.value("nlsyms", "") == (stripped ? "stripped" : "kept"))
      return j.at("mer").get<double>();
  }
  throw std::runtime_error(path + " has no ALL row");
}

}  // namespace

std::vector<ReportRow> BuildReport(const std::vector<GridRow>& grid) {
  std::vector<ReportRow> rows;
  for (const GridRow& g : grid) {
    ReportRow row;
    row.name = g.name;
    for (int c = 0; c < 4; ++c) {
      GridCell& cell = row.cells[c];
      const std::string split = c < 2 ? "dev" : "eval";
      cell.ok = true;
      for (const auto& exp : g.experiments) {
        const std::string path = exp + "/score/" + split + ".jsonl";
        try {
          if (!fs::exists(path)) throw MissingStageError(path, "score");
          cell.values.push_back(ReadMer(path, c % 2 == 1));
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = e.what();
          break;
        }
      }
      if (cell.ok) {
        double s = 0.0;
        for (double v : cell.values) s += v;
        cell.mean = s / static_cast<double>(cell.values.size());
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

bool ReportComplete(const std::vector<ReportRow>& rows) {
  for (const auto& r : rows)
    for (const auto& c : r.cells)
      if (!c.ok) return false;
  return true;
}

std::string FormatReport(const std::vector<ReportRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width), "system");
  out += buf;
  for (const char* c : kColumns) {
    std::snprintf(buf, sizeof(buf), " %10s", c);
    out += buf;
  }
  out += "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width), r.name.c_str());
    out += buf;
    for (const auto& c : r.cells) {
      if (c.ok)
        std::snprintf(buf, sizeof(buf), " %10.2f", c.mean);
      else
        std::snprintf(buf, sizeof(buf), " %10s", "FAILED");
      out += buf;
    }
    out += "\n";
  }
  for (const auto& r : rows)
    for (int c = 0; c < 4; ++c)
      if (!r.cells[c].ok) out += r.name + " " + kColumns[c] + ": " + r.cells[c].error + "\n";
  return out;
}

std::string ReportJsonLines(const std::vector<ReportRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (int c = 0; c < 4; ++c) {
      const GridCell& cell = r.cells[c];
      ordered_json j;
      j["system"] = r.name;
      j["column"] = kColumns[c];
      j["ok"] = cell.ok;
      if (cell.ok) {
        j["mer"] = cell.mean;
        j["per_experiment"] = cell.values;
        // Difference from the first row, the baseline.
        if (rows.front().cells[c].ok) j["delta_vs_first"] = cell.mean - rows.front().cells[c].mean;
      } else {
        j["error"] = cell.error;
      }
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace csasr
