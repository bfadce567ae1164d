// tests/acceptance.cc

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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpe_oracle.h"
#include "csasr/ctc.h"
#include "csasr/decode.h"
#include "csasr/graph.h"
#include "csasr/model.h"
#include "csasr/params.h"
#include "csasr/pipeline.h"
#include "csasr/scoring.h"
#include "csasr/signal.h"
#include "csasr/subword.h"
#include "csasr/synth.h"
#include "mer_oracle.h"
#include "op_catalogue.h"

namespace csasr {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string Fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

Tensor RandomMatrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor x = Tensor::Matrix(r, c);
  for (double& v : x.values()) v = n(rng);
  return x;
}

Tensor LogSoftmaxRows(const Tensor& x) {
  Graph g;
  return LogSoftmax(g.Constant(x)).value();
}

ModelConfig TinyModel(OutputMode mode, int vocab) {
  ModelConfig c;
  c.input_dim = 3;
  c.encoder_layers = 2;
  c.encoder_units = 2;
  c.subsample = {2, 2};
  c.attention_dim = 3;
  c.conv_channels = 2;
  c.conv_width = 3;
  c.embed_dim = 2;
  c.decoder_units = 3;
  c.cf_feature_dim = 2;
  c.cf_hidden = 3;
  c.vocab_size = vocab;
  c.unit_class.assign(vocab, 0);
  for (int k = 0; k < vocab; ++k) c.unit_class[k] = k < 3 ? 2 : k % 2;
  c.mode = mode;
  c.init_scale = 0.5;
  return c;
}

// ---- 1

Outcome CtcOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int infeasible = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t T = 1 + rng() % 6, K = 2 + rng() % 3, L = rng() % (std::min<std::size_t>(T, 3) + 1);
    std::vector<int> labels(L);
    for (int& l : labels) l = 1 + static_cast<int>(rng() % (K - 1));
    const Tensor lp = LogSoftmaxRows(RandomMatrix(T, K, rng, 2.0));
    const CtcResult r = CtcForwardBackward(lp, labels);
    const double brute = CtcBruteForce(lp, labels);
    if (r.infeasible) {
      ++infeasible;
      if (!std::isinf(brute)) return {false, "infeasible instance with finite brute force"};
      continue;
    }
    worst = std::max(worst, std::abs(r.loss - brute));
  }
  const double s = Seconds(t0);
  return {worst <= 1e-10 && s < 10.0,
          "200 instances (" + std::to_string(infeasible) + " infeasible), max |diff| " +
              Fmt("%.2e", worst) + ", " + Fmt("%.2f s", s)};
}

// ---- 2

Var BatchLoss(const AsrModel& m, Graph& g, ParamSet& p, const std::vector<Tensor>& feats,
              const std::vector<std::vector<int>>& units, const LossOptions& opts) {
  Bound b(g, p);
  Var total = m.Loss(b, feats[0], units[0], opts).total;
  for (std::size_t i = 1; i < feats.size(); ++i)
    total = Add(total, m.Loss(b, feats[i], units[i], opts).total);
  return Scale(total, 1.0 / static_cast<double>(feats.size()));
}

Outcome GradientSuite() {
  const auto t0 = std::chrono::steady_clock::now();
  const GradCheckOptions opts{.step = 1e-5, .tol = 1e-4};
  double worst = 0.0;
  std::string worst_name;
  int checks = 0;
  auto record = [&](const std::string& name, const GradCheckResult& r) {
    ++checks;
    if (r.worst_rel_error > worst || !r.pass) {
      worst = std::max(worst, r.worst_rel_error);
      worst_name = name + " " + r.worst_entry;
    }
    return r.pass;
  };
  bool ok = true;
  std::size_t ops = 0;
  for (const OpCase& op : OpCatalogue()) {
    ++ops;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      OpInstance inst = op.make(seed);
      ok &= record(op.name, GradCheck(inst.loss, inst.Inputs(), opts));
    }
  }
  std::mt19937_64 rng(202);
  for (int i = 0; i < 20; ++i) {
    ParamSet p;
    const std::size_t T = 2 + rng() % 5, K = 3 + rng() % 3;
    Tensor& x = p.Add("x", {T, K});
    x = RandomMatrix(T, K, rng);
    std::vector<int> labels(1 + rng() % 2);
    for (int& l : labels) l = 1 + static_cast<int>(rng() % (K - 1));
    ok &= record("ctc", GradCheck(
                            [&](Graph& g) {
                              Bound b(g, p);
                              return CtcLoss(LogSoftmax(b("x")), labels);
                            },
                            p, opts));
    ParamSet q;
    Tensor& c = q.Add("c", {T, 3});
    c = RandomMatrix(T, 3, rng);
    std::vector<int> cls(T);
    for (int& v : cls) v = static_cast<int>(rng() % 3);
    ok &= record("lid", GradCheck(
                            [&](Graph& g) {
                              Bound b(g, q);
                              return LidLoss(LogSoftmax(b("c")), cls);
                            },
                            q, opts));
  }
  std::vector<Tensor> feats = {RandomMatrix(9, 3, rng), RandomMatrix(6, 3, rng)};
  std::vector<std::vector<int>> units = {{3, 5, 4}, {6}};
  AsrModel flat(TinyModel(OutputMode::kFlat, 7), 10);
  ok &= record("joint", GradCheck(
                            [&](Graph& g) {
                              return BatchLoss(flat, g, flat.params(), feats, units,
                                               {0.5, 0.1, false});
                            },
                            flat.params(), opts));
  AsrModel hier(TinyModel(OutputMode::kHierarchical, 7), 11);
  ok &= record("joint+lid", GradCheck(
                                [&](Graph& g) {
                                  return BatchLoss(hier, g, hier.params(), feats, units,
                                                   {0.5, 0.1, true});
                                },
                                hier.params(), opts));
  const double s = Seconds(t0);
  return {ok && s < 60.0, std::to_string(ops) + " ops + ctc + lid + 2 objectives, " +
                              std::to_string(checks) + " checks, worst rel err " +
                              Fmt("%.2e", worst) + " (" + worst_name + "), " + Fmt("%.1f s", s)};
}

// ---- 3

double Mass(const Tensor& lp) {
  double s = 0.0;
  for (double v : lp.values()) s += std::exp(v);
  return s;
}

Outcome Normalization() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  double gate_lo = 1.0, gate_hi = 0.0;
  int states = 0;
  const int vocab = 9;
  for (OutputMode mode :
       {OutputMode::kFlat, OutputMode::kHierarchical, OutputMode::kColdFusion}) {
    for (int m = 0; m < 100; ++m) {
      ModelConfig c = TinyModel(mode, vocab);
      c.init_scale = 1.0;
      AsrModel model(c, 1000 + m);
      RnnLm cf_lm({vocab, 3, 3}, 2000 + m);
      if (mode == OutputMode::kColdFusion) model.AttachLm(&cf_lm);
      Graph g;
      Bound b(g, model.params());
      auto enc = model.Encode(b, g.Constant(RandomMatrix(4 + rng() % 12, 3, rng, 2.0)));
      auto s = model.Initial(b, enc);
      for (int step = 0; step < 10; ++step, ++states) {
        AsrModel::State next;
        auto out = model.Step(b, enc, s, static_cast<int>(rng() % vocab), &next);
        worst = std::max(worst, std::abs(Mass(out.logprobs.value()) - 1.0));
        if (mode == OutputMode::kHierarchical)
          worst = std::max(worst, std::abs(Mass(out.class_logprobs.value()) - 1.0));
        if (mode == OutputMode::kColdFusion)
          for (double v : out.gate.value().values()) {
            gate_lo = std::min(gate_lo, v);
            gate_hi = std::max(gate_hi, v);
          }
        s = next;
      }
    }
  }
  for (int m = 0; m < 100; ++m) {
    RnnLm rl({vocab, 4, 5}, 3000 + m);
    Graph g;
    auto st = rl.Initial(g);
    for (int step = 0; step < 10; ++step, ++states) {
      st = rl.Step(g, st, static_cast<int>(rng() % vocab));
      worst = std::max(worst, std::abs(Mass(rl.LogProbs(g, st).value()) - 1.0));
    }
  }
  const bool gate_ok = gate_lo > 0.0 && gate_hi < 1.0;
  return {worst <= 1e-9 && gate_ok && states >= 4000,
          std::to_string(states) + " states (flat, hierarchical, cold fusion, LM; 1000 each), "
          "max |mass - 1| " + Fmt("%.2e", worst) + ", gate in [" + Fmt("%.4f", gate_lo) + ", " +
              Fmt("%.4f", gate_hi) + "]"};
}

// ---- 4

struct SynthFeatures {
  std::vector<Tensor> feats;
  std::vector<std::vector<int>> units;
  int vocab = 0;
  std::vector<int> unit_class;
};

SynthFeatures MakeSynth(int n, std::uint64_t seed) {
  SynthSpec spec;
  spec.num_utterances = n;
  spec.seed = seed;
  const SynthLexicon lex = BuildSynthLexicon(spec);
  const auto utts = GenTranscripts(spec, lex, "acc");
  std::vector<std::string> texts;
  for (const auto& u : utts) texts.push_back(u.Text());
  const UnitCodec codec = BuildCodec(texts, SynthParticleLexicon(spec), {});
  SynthFeatures out;
  out.vocab = static_cast<int>(codec.vocab().size());
  out.unit_class = codec.vocab().ClassOfEachUnit();
  for (const auto& u : utts) {
    Tensor f = LogMelFeatures(RenderUtterance(u, lex, spec));
    // Rough global normalization; the values only need to be well scaled.
    double m = 0.0;
    for (double v : f.values()) m += v;
    m /= static_cast<double>(f.size());
    for (double& v : f.values()) v = (v - m) / 5.0;
    out.feats.push_back(std::move(f));
    out.units.push_back(codec.Encode(u.Text()));
  }
  return out;
}

Outcome FusionInvariance() {
  const SynthFeatures data = MakeSynth(50, 404);
  ModelConfig mc;
  mc.vocab_size = data.vocab;
  mc.encoder_units = 16;
  mc.attention_dim = 16;
  mc.decoder_units = 16;
  mc.embed_dim = 16;
  mc.init_scale = 0.3;
  AsrModel model(mc, 4);
  RnnLm lm({data.vocab, 16, 16}, 5);
  DecodeConfig none;
  none.beam = 5;
  none.ctc_weight = 0.3;
  none.max_len_ratio = 0.5;
  DecodeConfig shallow = none;
  shallow.fusion = FusionMode::kShallow;
  shallow.lm_weight = 0.0;
  int identical = 0;
  std::size_t entries = 0;
  for (const Tensor& f : data.feats) {
    const DecodeResult a = DecodeUtterance(model, f, none);
    const DecodeResult b = DecodeUtterance(model, f, shallow, &lm);
    bool same = a.nbest.size() == b.nbest.size() && a.complete == b.complete;
    for (std::size_t k = 0; same && k < a.nbest.size(); ++k)
      same = a.nbest[k].units == b.nbest[k].units && a.nbest[k].score == b.nbest[k].score &&
             a.nbest[k].att == b.nbest[k].att && a.nbest[k].ctc == b.nbest[k].ctc;
    identical += same;
    entries += a.nbest.size();
  }
  return {identical == 50, std::to_string(identical) + "/50 n-best lists identical (" +
                               std::to_string(entries) + " entries)"};
}

// ---- 5

Outcome DecodeOracle() {
  std::mt19937_64 rng(505);
  int match = 0;
  for (int i = 0; i < 50; ++i) {
    const int vocab = 3 + 1 + static_cast<int>(rng() % 3);  // blank, eos and 2..4 units
    ModelConfig c = TinyModel(OutputMode::kFlat, vocab);
    c.init_scale = 1.5;
    AsrModel model(c, 5000 + i);
    RnnLm lm({vocab, 3, 3}, 6000 + i);
    const Tensor feats = RandomMatrix(8 + rng() % 8, 3, rng, 2.0);
    ModelScorer att(model, feats);
    LmScorer lms(lm);
    DecodeConfig dc;
    dc.beam = 64;
    switch (i % 3) {
      case 0:
        dc.ctc_weight = 0.0;
        break;
      case 1:
        dc.ctc_weight = 0.5;
        break;
      default:
        dc.ctc_weight = 0.3;
        dc.fusion = FusionMode::kShallow;
        dc.lm_weight = 0.7;
    }
    SearchInputs in;
    in.att = &att;
    in.ctc_logprobs = att.ctc_logprobs();
    in.lm = dc.fusion == FusionMode::kShallow ? &lms : nullptr;
    in.max_len = 1 + static_cast<int>(rng() % 3);
    const DecodeResult beam = BeamSearch(in, dc);
    const Hypothesis best = ExhaustiveSearch(in, dc);
    match += beam.complete && !beam.nbest.empty() && beam.nbest[0].units == best.units &&
             std::abs(beam.nbest[0].score - best.score) <= 1e-9;
  }
  return {match == 50, std::to_string(match) + "/50 instances match exhaustive search (beam 64)"};
}

// ---- 6

Outcome MerEngine() {
  std::mt19937_64 rng(606);
  const std::vector<std::string> pool = {"我", "你", "了", "去", "讲", "GO",   "take",
                                         "so", "ok", "Then", "lah", "<dispar>", "<nlsyms>"};
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    auto text = [&] {
      std::string s;
      for (int k = 0, n = static_cast<int>(rng() % 12); k < n; ++k)
        s += pool[rng() % pool.size()] + " ";
      return s;
    };
    const bool strip = rng() % 2;
    const auto ref = TokenizeMixed(text(), strip), hyp = TokenizeMixed(text(), strip);
    std::vector<std::string> r, h;
    for (const auto& u : ref) r.push_back(u.surface);
    for (const auto& u : hyp) h.push_back(u.surface);
    const EditCounts c = EditDistance(ref, hyp).counts;
    const auto o = testing_oracle::MinEdits(r, h);
    agree += c.errors() == o.edits && c.ins == o.ins && c.sub == o.subs &&
             c.ref == static_cast<long>(r.size());
  }
  const EditCounts t3 = EditDistance(TokenizeMixed("then 你 不 可 以 take initiative 去 讲 么", false),
                                     TokenizeMixed("then 你 不 可 以 tat initiative 就 讲", false))
                            .counts;
  const bool t3_ok = t3 == EditCounts{2, 1, 0, 10} && t3.Mer() == 30.0;
  return {agree == 1000 && t3_ok,
          std::to_string(agree) + "/1000 pairs agree with the DP oracle; example (S,D,I)=(" +
              std::to_string(t3.sub) + "," + std::to_string(t3.del) + "," +
              std::to_string(t3.ins) + ")/" + std::to_string(t3.ref) + " = " +
              Fmt("%.1f%%", t3.Mer())};
}

// ---- 7

Outcome SignalChecks() {
  Waveform sine;
  sine.samples.resize(16000);
  for (std::size_t i = 0; i < sine.samples.size(); ++i)
    sine.samples[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * static_cast<double>(i) / 16000.0);
  const bool identity = ResampleSpeed(sine, 1.0) == sine;

  // Direct DFT magnitude over 0..1000 Hz.
  const Waveform slow = ResampleSpeed(sine, 0.9);
  const std::size_t N = slow.samples.size();
  const double bin_hz = 16000.0 / static_cast<double>(N);
  std::size_t peak = 0;
  double peak_mag = -1.0;
  for (std::size_t k = 1; k * bin_hz <= 1000.0; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      acc += slow.samples[n] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * n % N) /
                                                   static_cast<double>(N));
    if (std::abs(acc) > peak_mag) {
      peak_mag = std::abs(acc);
      peak = k;
    }
  }
  const double expected_bin = 396.0 / bin_hz;
  const bool peak_ok = std::abs(static_cast<double>(peak) - expected_bin) <= 1.0;

  AudioSet train;
  train.split = "train";
  std::mt19937_64 rng(707);
  for (int i = 0; i < 10; ++i) {
    Waveform w;
    w.samples = RandomMatrix(1, 800 + rng() % 400, rng, 0.1).storage();
    train.utterances.push_back({"u" + std::to_string(i), "s", "t", w});
  }
  const AudioSet tripled = Perturb3Way(train);
  std::set<std::string> ids;
  for (const auto& u : tripled.utterances) ids.insert(u.id);
  const bool triple = tripled.utterances.size() == 30 && ids.size() == 30;
  return {identity && peak_ok && triple,
          std::string("speed 1.0 ") + (identity ? "bit-identical" : "DIFFERS") + "; peak " +
              Fmt("%.1f Hz", peak * bin_hz) + " (bin " + std::to_string(peak) + ", expected " +
              Fmt("%.1f", expected_bin) + "); 3-way " + std::to_string(train.utterances.size()) +
              " -> " + std::to_string(tripled.utterances.size())};
}

// ---- 8

Outcome BpeOracle() {
  bool ok = true;
  std::string detail;
  for (const std::map<std::string, long>& corpus :
       {std::map<std::string, long>{{"low", 1}, {"lower", 1}, {"lowest", 1}},
        std::map<std::string, long>{{"low", 5}, {"lower", 2}, {"lowest", 2}}}) {
    const MergeTable t = TrainBpe(corpus, 20);
    const auto oracle = testing_oracle::TrainBpe(corpus, 20);
    ok &= t.merges() == oracle;
    for (const auto& w : {"low", "lower", "lowest", "slow", "owl", "newer"})
      ok &= ApplyBpe(w, t) == testing_oracle::Segment(w, oracle);
    detail += std::to_string(t.size()) + " merges ";
  }
  std::mt19937_64 rng(808);
  static const std::string kAlpha = "abcdeilnorst'-";
  auto word = [&] {
    std::string w;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 9); i < n; ++i)
      w += kAlpha[rng() % kAlpha.size()];
    return w;
  };
  std::map<std::string, long> corpus;
  for (int i = 0; i < 300; ++i) corpus[word()] += 1 + rng() % 3;
  const MergeTable t = TrainBpe(corpus, 150);
  int round_trip = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string w = word();
    round_trip += JoinSubwords(ApplyBpe(w, t)) == w;
  }
  return {ok && round_trip == 1000, "low/lower/lowest corpora match the reference (" + detail +
                                        "); round trip " + std::to_string(round_trip) + "/1000"};
}

// ---- 9, 10

double ReadAllMer(const std::string& path, bool stripped) {
  std::istringstream in(ReadFileBytes(path));
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("class", "") == "ALL" && j.value("nlsyms", "") == (stripped ? "stripped" : "kept"))
      return j.at("mer").get<double>();
  }
  throw std::runtime_error(path + ": no ALL row");
}

Outcome Overfit(const std::string& source, const std::string& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir = work + "/overfit";
  fs::remove_all(dir);
  const ExperimentConfig c = LoadConfig(source + "/configs/overfit.json");
  const Experiment e = Experiment::Create(dir, c);
  e.GenData();
  e.Prep();
  e.TrainBpe();
  e.Train();
  e.Decode("train");
  e.Score("train");
  const double mer = ReadAllMer(dir + "/score/train.jsonl", false);
  const double mer_nn = ReadAllMer(dir + "/score/train.jsonl", true);
  const double s = Seconds(t0);
  return {mer < 5.0 && s < 600.0,
          std::to_string(c.data.train) + " utterances, lambda " + Fmt("%.1f", c.train.loss.lambda) +
              ", " + std::to_string(c.train.epochs) + " epochs " +
              OptimizerName(c.train.optimizer) + ": train MER " + Fmt("%.2f%%", mer) +
              " (no nlsyms " + Fmt("%.2f%%", mer_nn) + "), " + Fmt("%.0f s", s)};
}

Outcome TrendGrid(const std::string& source, const std::string& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string root = work + "/trend";
  fs::remove_all(root);
  const ExperimentConfig base = LoadConfig(source + "/configs/trend.json");
  const std::vector<std::string> variants = {"E2E",    "E2ELD",  "E2ESW",
                                             "E2E+SL", "E2E+3W", "E2ESW+3W+F3"};
  auto cell_dir = [&](int label, const std::string& v, int seed) {
    return root + "/label" + std::to_string(label) + "/" + v + "/seed" + std::to_string(seed);
  };
  auto make = [&](const std::string& dir, int label, const std::string& v, int seed) {
    ExperimentConfig c = base;
    c.name = v;
    c.label = label;
    c.variant = ParseVariant(v, c.slow_factor);
    c.seed = c.train.seed = c.lm_train.seed = static_cast<std::uint64_t>(seed);
    c.data.dir = fs::relative(root + "/data", dir).string();
    return Experiment::Create(dir, c);
  };
  std::string failures;
  for (int label : {1, 2}) {
    for (const auto& v : variants) {
      for (int seed = 1; seed <= 3; ++seed) {
        const auto c0 = std::chrono::steady_clock::now();
        try {
          make(cell_dir(label, v, seed), label, v, seed).RunAll();
        } catch (const std::exception& ex) {
          failures += " " + v + "/label" + std::to_string(label) + ": " + ex.what();
        }
        std::cout << "  trend cell label " << label << " " << v << " seed " << seed << ": "
                  << Fmt("%.0f s", Seconds(c0)) << std::endl;
      }
    }
  }
  bool complete = true;
  std::string tables;
  for (int label : {1, 2}) {
    nlohmann::json grid;
    grid["rows"] = nlohmann::json::array();
    for (const auto& v : variants) {
      std::vector<std::string> exps;
      for (int seed = 1; seed <= 3; ++seed)
        exps.push_back("label" + std::to_string(label) + "/" + v + "/seed" + std::to_string(seed));
      grid["rows"].push_back({{"name", v}, {"experiments", exps}});
    }
    const std::string grid_path = root + "/grid_label" + std::to_string(label) + ".json";
    WriteFileBytes(grid_path, grid.dump(2) + "\n");
    const auto rows = BuildReport(LoadGrid(grid_path));
    const std::string txt = FormatReport(rows);
    complete &= ReportComplete(rows) && rows.size() == variants.size() &&
                txt == FormatReport(BuildReport(LoadGrid(grid_path)));
    const std::string stem = root + "/report_label" + std::to_string(label);
    WriteFileBytes(stem + ".txt", txt);
    WriteFileBytes(stem + ".jsonl", ReportJsonLines(rows));
    tables += "label " + std::to_string(label) + " (MER %, mean of 3 seeds)\n" + txt;
  }
  // Determinism: one cell rerun from scratch must reproduce its artifacts.
  bool deterministic = true;
  const std::string rerun = root + "/rerun";
  try {
    make(rerun, 1, "E2E", 1).RunAll();
    for (const char* f : {"train/model.ck", "train/log.jsonl", "decode/dev.nbest.tsv",
                          "decode/eval.nbest.tsv", "score/dev.jsonl", "score/eval.jsonl"})
      deterministic &= ReadFileBytes(rerun + "/" + f) ==
                       ReadFileBytes(cell_dir(1, "E2E", 1) + "/" + f);
  } catch (const std::exception& ex) {
    deterministic = false;
    failures += std::string(" rerun: ") + ex.what();
  }
  std::cout << tables;
  if (!failures.empty()) std::cout << "  failures:" << failures << "\n";
  const double s = Seconds(t0);
  return {complete && deterministic && failures.empty(),
          "6 systems x 2 labels x 3 seeds x {dev, eval} x {kept, stripped}: " +
              std::string(complete ? "complete" : "INCOMPLETE") + ", rerun " +
              (deterministic ? "byte-identical" : "DIFFERS") + ", reports in " + root + ", " +
              Fmt("%.0f s", s)};
}

}  // namespace
}  // namespace csasr

int main(int argc, char** argv) {
  using namespace csasr;
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  std::string work = "acceptance_work";
  std::string source = CSASR_SOURCE_DIR;
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
  app.add_option("--work", work, "Scratch directory for the pipeline criteria");
  app.add_option("--source", source, "Repository root (for configs/)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ctc oracle equivalence", CtcOracle},
      {"gradient suite", GradientSuite},
      {"normalization suite", Normalization},
      {"fusion invariance", FusionInvariance},
      {"decode oracle", DecodeOracle},
      {"MER engine", MerEngine},
      {"signal checks", SignalChecks},
      {"BPE oracle", BpeOracle},
      {"end-to-end overfit", [&] { return Overfit(source, work); }},
      {"trend harness", [&] { return TrendGrid(source, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
