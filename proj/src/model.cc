// src/model.cc

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

#include "csasr/model.h"

#include <random>
#include <stdexcept>

#include "csasr/ctc.h"

namespace csasr {

namespace {

constexpr int kSosEos = 1;  // MixedVocab::kSosEosId
constexpr int kClasses = 3;

// One LSTM step from precomputed input gates (bias included).
void LstmCell(Var gates_in, Var h_prev, Var c_prev, Var wh, Var* h, Var* c) {
  const std::size_t n = h_prev.cols();
  Var pre = Add(gates_in, MatMul(h_prev, wh));
  Var i = Sigmoid(SliceCols(pre, 0, n));
  Var f = Sigmoid(SliceCols(pre, n, n));
  Var g = Tanh(SliceCols(pre, 2 * n, n));
  Var o = Sigmoid(SliceCols(pre, 3 * n, n));
  *c = Add(Mul(f, c_prev), Mul(i, g));
  *h = Mul(o, Tanh(*c));
}

Var Affine(Var x, Var w, Var b) { return Add(MatMul(x, w), b); }

void AddLstm(ParamSet& p, const std::string& prefix, int in, int units, double scale,
             std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(units);
  p.AddUniform(prefix + "/wx", {static_cast<std::size_t>(in), 4 * n}, scale, rng);
  p.AddUniform(prefix + "/wh", {n, 4 * n}, scale, rng);
  Tensor& b = p.Add(prefix + "/b", {1, 4 * n});
  for (std::size_t j = n; j < 2 * n; ++j) b[j] = 1.0;  // forget gate
}

void AddAffine(ParamSet& p, const std::string& prefix, int in, int out, double scale,
               std::mt19937_64& rng) {
  p.AddUniform(prefix + "/w", {static_cast<std::size_t>(in), static_cast<std::size_t>(out)},
               scale, rng);
  p.Add(prefix + "/b", {1, static_cast<std::size_t>(out)});
}

RnnLm::State LmInitial(Graph& g, int units) {
  const auto n = static_cast<std::size_t>(units);
  return {g.Constant(Tensor::Matrix(1, n)), g.Constant(Tensor::Matrix(1, n))};
}

RnnLm::State LmStep(Bound& p, const RnnLm::State& s, int unit) {
  Var x = GatherRows(p("lm/embed"), {unit});
  RnnLm::State out;
  LstmCell(Affine(x, p("lm/wx"), p("lm/b")), s.h, s.c, p("lm/wh"), &out.h, &out.c);
  return out;
}

Var LmLogProbs(Bound& p, const RnnLm::State& s) {
  return LogSoftmax(Affine(s.h, p("lm/out/w"), p("lm/out/b")));
}

}  // namespace

std::string OutputModeName(OutputMode m) {
  switch (m) {
    case OutputMode::kFlat: return "flat";
    case OutputMode::kHierarchical: return "hierarchical";
    case OutputMode::kColdFusion: return "cold_fusion";
  }
  return "?";
}

OutputMode ParseOutputMode(const std::string& s) {
  if (s == "flat") return OutputMode::kFlat;
  if (s == "hierarchical") return OutputMode::kHierarchical;
  if (s == "cold_fusion") return OutputMode::kColdFusion;
  throw std::invalid_argument("unknown output mode '" + s +
                              "' (flat, hierarchical, cold_fusion)");
}

RnnLm::RnnLm(const LmConfig& config, std::uint64_t seed) : config_(config) { Init(seed); }

RnnLm::RnnLm(const LmConfig& config, ParamSet params) : config_(config) {
  RnnLm shape(config, 0);
  for (const auto& [name, t] : shape.params())
    if (!params.Contains(name) || params.Get(name).shape() != t.shape())
      throw std::invalid_argument("language model checkpoint lacks or misshapes " + name);
  params_ = std::move(params);
}

void RnnLm::Init(std::uint64_t seed) {
  if (config_.vocab_size < 1 || config_.embed_dim < 1 || config_.units < 1)
    throw std::invalid_argument("language model sizes must be positive");
  std::mt19937_64 rng(seed);
  const double s = 0.1;
  const auto v = static_cast<std::size_t>(config_.vocab_size);
  params_.AddUniform("lm/embed", {v, static_cast<std::size_t>(config_.embed_dim)}, s, rng);
  AddLstm(params_, "lm", config_.embed_dim, config_.units, s, rng);
  AddAffine(params_, "lm/out", config_.units, config_.vocab_size, s, rng);
}

RnnLm::State RnnLm::Initial(Graph& g) const { return LmInitial(g, config_.units); }

RnnLm::State RnnLm::Step(Graph& g, const State& s, int unit) const {
  Bound p(g, params_);
  return LmStep(p, s, unit);
}

Var RnnLm::LogProbs(Graph& g, const State& s) const {
  Bound p(g, params_);
  return LmLogProbs(p, s);
}

RnnLm::State RnnLm::Step(Bound& b, const State& s, int unit) const {
  return LmStep(b, s, unit);
}

Var RnnLm::LogProbs(Bound& b, const State& s) const {
  return LmLogProbs(b, s);
}

Var RnnLm::SequenceLoss(Bound& b, const std::vector<int>& units) const {
  // Whole sequence through the fused layer: inputs <sos> u_1..u_n, targets
  // u_1..u_n <eos>.
  std::vector<int> inputs = {kSosEos};
  inputs.insert(inputs.end(), units.begin(), units.end());
  std::vector<int> targets = units;
  targets.push_back(kSosEos);
  Var x = GatherRows(b("lm/embed"), inputs);
  Var h = LstmLayer(Affine(x, b("lm/wx"), b("lm/b")), b("lm/wh"), false);
  Var lp = LogSoftmax(Affine(h, b("lm/out/w"), b("lm/out/b")));
  return Scale(Sum(Pick(lp, targets)), -1.0);
}

double RnnLm::SequenceLogProb(const std::vector<int>& units) const {
  Graph g;
  State s = Initial(g);
  int prev = kSosEos;
  double total = 0.0;
  for (int u : units) {
    s = Step(g, s, prev);
    total += LogProbs(g, s).value()[u];
    prev = u;
  }
  return total;
}

void ModelConfig::Validate() const {
  auto bad = [](const std::string& what) {
    throw std::invalid_argument("invalid model config: " + what);
  };
  if (input_dim < 1 || encoder_layers < 1 || encoder_units < 1 || attention_dim < 1 ||
      conv_channels < 1 || embed_dim < 1 || decoder_units < 1 || cf_feature_dim < 1 ||
      cf_hidden < 1)
    bad("sizes must be positive");
  if (conv_width < 1 || conv_width % 2 == 0) bad("conv_width must be odd");
  if (static_cast<int>(subsample.size()) != encoder_layers)
    bad("subsample needs one factor per encoder layer");
  for (int f : subsample)
    if (f < 1) bad("subsample factors must be >= 1");
  if (vocab_size < 4) bad("vocab_size too small");
  if (mode == OutputMode::kHierarchical) {
    if (static_cast<int>(unit_class.size()) != vocab_size)
      bad("unit_class needs one entry per unit");
    for (int c : unit_class)
      if (c < 0 || c >= kClasses) bad("unit_class entries must be 0, 1 or 2");
  }
}

int ModelConfig::SubsampledLength(int frames) const {
  for (int f : subsample) frames = (frames + f - 1) / f;
  return frames;
}

AsrModel::AsrModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.Validate();
  Init(seed);
}

AsrModel::AsrModel(const ModelConfig& config, ParamSet params) : config_(config) {
  config_.Validate();
  AsrModel shape(config, 0);
  for (const auto& [name, t] : shape.params())
    if (!params.Contains(name) || params.Get(name).shape() != t.shape())
      throw std::invalid_argument("model checkpoint lacks or misshapes " + name);
  params_ = std::move(params);
}

void AsrModel::Init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double s = config_.init_scale;
  const int d = config_.EncoderDim(), a = config_.attention_dim, v = config_.vocab_size;
  int in = config_.input_dim;
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "enc/l" + std::to_string(l);
    AddLstm(params_, p + "/fw", in, config_.encoder_units, s, rng);
    AddLstm(params_, p + "/bw", in, config_.encoder_units, s, rng);
    in = d;
  }
  AddAffine(params_, "ctc", d, v, s, rng);
  AddAffine(params_, "att/enc", d, a, s, rng);
  params_.AddUniform("att/dec", {static_cast<std::size_t>(config_.decoder_units),
                                 static_cast<std::size_t>(a)}, s, rng);
  params_.AddUniform("att/conv", {static_cast<std::size_t>(config_.conv_width),
                                  static_cast<std::size_t>(config_.conv_channels)}, s, rng);
  params_.AddUniform("att/loc", {static_cast<std::size_t>(config_.conv_channels),
                                 static_cast<std::size_t>(a)}, s, rng);
  params_.AddUniform("att/v", {static_cast<std::size_t>(a), 1}, s, rng);
  params_.AddUniform("dec/embed", {static_cast<std::size_t>(v),
                                   static_cast<std::size_t>(config_.embed_dim)}, s, rng);
  AddLstm(params_, "dec", config_.embed_dim + d, config_.decoder_units, s, rng);
  const int o = config_.decoder_units + d;
  switch (config_.mode) {
    case OutputMode::kFlat:
      AddAffine(params_, "out", o, v, s, rng);
      break;
    case OutputMode::kHierarchical:
      AddAffine(params_, "out", o, v, s, rng);
      AddAffine(params_, "cls", o, kClasses, s, rng);
      break;
    case OutputMode::kColdFusion: {
      const int f = config_.cf_feature_dim;
      // The LM width is only known once attached; the projection is sized by
      // the decoder width and checked in AttachLm.
      AddAffine(params_, "cf/lm", config_.decoder_units, f, s, rng);
      AddAffine(params_, "cf/ed", o, f, s, rng);
      AddAffine(params_, "cf/gate", 2 * f, f, s, rng);
      AddAffine(params_, "cf/r", 2 * f, config_.cf_hidden, s, rng);
      AddAffine(params_, "cf/out", config_.cf_hidden, v, s, rng);
      break;
    }
  }
}

void AsrModel::AttachLm(const RnnLm* lm) {
  if (lm) {
    if (lm->config().vocab_size != config_.vocab_size)
      throw std::invalid_argument("language model vocabulary differs from the model's");
    if (config_.mode == OutputMode::kColdFusion &&
        lm->config().units != config_.decoder_units)
      throw std::invalid_argument("cold fusion expects LM units == decoder units");
  }
  lm_ = lm;
}

AsrModel::Encoded AsrModel::Encode(Bound& b, Var feats) const {
  if (feats.rows() == 0) throw std::invalid_argument("encode: no frames");
  if (static_cast<int>(feats.cols()) != config_.input_dim)
    throw std::invalid_argument("encode: expected " + std::to_string(config_.input_dim) +
                                " feature dims, got " + std::to_string(feats.cols()));
  Var h = feats;
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "enc/l" + std::to_string(l);
    Var fw = LstmLayer(Affine(h, b(p + "/fw/wx"), b(p + "/fw/b")), b(p + "/fw/wh"), false);
    Var bw = LstmLayer(Affine(h, b(p + "/bw/wx"), b(p + "/bw/b")), b(p + "/bw/wh"), true);
    h = ConcatCols({fw, bw});
    const int f = config_.subsample[l];
    if (f > 1) {
      std::vector<int> keep;
      for (std::size_t t = 0; t < h.rows(); t += f) keep.push_back(static_cast<int>(t));
      h = GatherRows(h, std::move(keep));
    }
  }
  return {h, Affine(h, b("att/enc/w"), b("att/enc/b"))};
}

Var AsrModel::CtcLogProbs(Bound& b, Var h) const {
  return LogSoftmax(Affine(h, b("ctc/w"), b("ctc/b")));
}

AsrModel::State AsrModel::Initial(Bound& b, const Encoded& enc) const {
  Graph& g = b.graph();
  const auto n = static_cast<std::size_t>(config_.decoder_units);
  const std::size_t t = enc.h.rows();
  State s;
  s.z = g.Constant(Tensor::Matrix(1, n));
  s.cell = g.Constant(Tensor::Matrix(1, n));
  s.att = g.Constant(Tensor::Matrix(1, t, 1.0 / static_cast<double>(t)));
  if (config_.mode == OutputMode::kColdFusion) {
    if (!lm_) throw std::logic_error("cold fusion model has no language model attached");
    s.lm = lm_->Initial(g);
  }
  return s;
}

Var AsrModel::Attend(Bound& b, const Encoded& enc, Var z_prev, Var att_prev) const {
  Var loc = MatMul(MatMul(Unfold(att_prev, config_.conv_width), b("att/conv")), b("att/loc"));
  Var e = MatMul(Tanh(Add(Add(enc.enc_proj, MatMul(z_prev, b("att/dec"))), loc)), b("att/v"));
  return Softmax(Transpose(e));
}

AsrModel::StepOutput AsrModel::Step(Bound& b, const Encoded& enc, const State& s,
                                    int prev_unit, State* next) const {
  StepOutput out;
  out.attention = Attend(b, enc, s.z, s.att);
  Var ctx = MatMul(out.attention, enc.h);
  Var x = ConcatCols({GatherRows(b("dec/embed"), {prev_unit}), ctx});
  State ns;
  LstmCell(Affine(x, b("dec/wx"), b("dec/b")), s.z, s.cell, b("dec/wh"), &ns.z, &ns.cell);
  ns.att = out.attention;
  Var o = ConcatCols({ns.z, ctx});
  switch (config_.mode) {
    case OutputMode::kFlat:
      out.logprobs = LogSoftmax(Affine(o, b("out/w"), b("out/b")));
      break;
    case OutputMode::kHierarchical: {
      out.class_logprobs = LogSoftmax(Affine(o, b("cls/w"), b("cls/b")));
      Var within = GroupLogSoftmax(Affine(o, b("out/w"), b("out/b")), config_.unit_class,
                                   kClasses);
      out.logprobs = Add(GatherCols(out.class_logprobs, config_.unit_class), within);
      break;
    }
    case OutputMode::kColdFusion: {
      if (!lm_ || !s.lm) throw std::logic_error("cold fusion step without a language model");
      ns.lm = lm_->Step(b.graph(), *s.lm, prev_unit);
      Var s_lm = Tanh(Affine(ns.lm->h, b("cf/lm/w"), b("cf/lm/b")));
      Var s_ed = Sigmoid(Affine(o, b("cf/ed/w"), b("cf/ed/b")));
      out.gate = Sigmoid(Affine(ConcatCols({s_ed, s_lm}), b("cf/gate/w"), b("cf/gate/b")));
      Var s_cf = ConcatCols({s_ed, Mul(out.gate, s_lm)});
      Var r = Tanh(Affine(s_cf, b("cf/r/w"), b("cf/r/b")));
      out.logprobs = LogSoftmax(Affine(r, b("cf/out/w"), b("cf/out/b")));
      break;
    }
  }
  if (next) *next = ns;
  return out;
}

UtteranceLoss AsrModel::Loss(Bound& b, const Tensor& feats, const std::vector<int>& units,
                             const LossOptions& opts) const {
  if (!(opts.lambda >= 0.0 && opts.lambda <= 1.0))
    throw std::invalid_argument("lambda must lie in [0, 1]");
  if (opts.use_lid && config_.mode != OutputMode::kHierarchical)
    throw std::invalid_argument("the language-ID loss needs the hierarchical output mode");
  Graph& g = b.graph();
  Encoded enc = Encode(b, g.Constant(feats));
  UtteranceLoss out;
  std::vector<Var> terms;
  if (opts.lambda > 0.0) {
    Var ctc = CtcLoss(CtcLogProbs(b, enc.h), units, 0, &out.ctc_infeasible);
    out.ctc = ctc.scalar();
    if (!out.ctc_infeasible) terms.push_back(Scale(ctc, opts.lambda));
  }
  if (opts.lambda < 1.0) {
    std::vector<int> targets = units;
    targets.push_back(kSosEos);
    State s = Initial(b, enc);
    std::vector<Var> rows, class_rows;
    int prev = kSosEos;
    for (int y : targets) {
      State ns;
      StepOutput o = Step(b, enc, s, prev, &ns);
      rows.push_back(o.logprobs);
      if (opts.use_lid) class_rows.push_back(o.class_logprobs);
      s = ns;
      prev = y;
    }
    Var att = SmoothedCrossEntropy(ConcatRows(rows), targets, opts.label_smoothing);
    out.att = att.scalar();
    Var dec = att;
    if (opts.use_lid) {
      std::vector<int> cls;
      for (int y : targets) cls.push_back(config_.unit_class.at(y));
      Var lid = LidLoss(ConcatRows(class_rows), cls);
      out.lid = lid.scalar();
      dec = Add(dec, lid);
    }
    terms.push_back(Scale(dec, 1.0 - opts.lambda));
  }
  if (terms.empty()) {
    out.total = g.Constant(Tensor::Scalar(0.0));
  } else {
    out.total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) out.total = Add(out.total, terms[i]);
  }
  return out;
}

AsrModel::StateValues AsrModel::ToValues(const State& s) const {
  StateValues v{s.z.value(), s.cell.value(), s.att.value(), std::nullopt};
  if (s.lm) v.lm = RnnLm::ToValues(*s.lm);
  return v;
}

AsrModel::State AsrModel::FromValues(Graph& g, const StateValues& v) const {
  State s;
  s.z = g.Constant(v.z);
  s.cell = g.Constant(v.cell);
  s.att = g.Constant(v.att);
  if (v.lm) s.lm = RnnLm::State{g.Constant(v.lm->h), g.Constant(v.lm->c)};
  return s;
}

Var LidLoss(Var class_logprobs, const std::vector<int>& targets) {
  if (class_logprobs.rows() != targets.size())
    throw std::invalid_argument("lid loss: " + std::to_string(class_logprobs.rows()) +
                                " steps but " + std::to_string(targets.size()) + " targets");
  if (targets.empty()) throw std::invalid_argument("lid loss: no steps");
  return Scale(Sum(Pick(class_logprobs, targets)), -1.0 / static_cast<double>(targets.size()));
}

Var SmoothedCrossEntropy(Var logprobs, const std::vector<int>& targets, double epsilon) {
  if (logprobs.rows() != targets.size())
    throw std::invalid_argument("cross entropy: " + std::to_string(logprobs.rows()) +
                                " steps but " + std::to_string(targets.size()) + " targets");
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    throw std::invalid_argument("label smoothing must lie in [0, 1)");
  Var nll = Scale(Sum(Pick(logprobs, targets)), -(1.0 - epsilon));
  if (epsilon == 0.0) return nll;
  Var smooth = Scale(Sum(logprobs), -epsilon / static_cast<double>(logprobs.cols()));
  return Add(nll, smooth);
}

}  // namespace csasr
