// csasr/model.h

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

#ifndef CSASR_MODEL_H_
#define CSASR_MODEL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csasr/graph.h"
#include "csasr/params.h"

namespace csasr {

enum class OutputMode { kFlat, kHierarchical, kColdFusion };

std::string OutputModeName(OutputMode m);
OutputMode ParseOutputMode(const std::string& s);

struct LmConfig {
  int vocab_size = 0;
  int embed_dim = 32;
  int units = 32;
};

// Recurrent language model over unit ids: embedding, one LSTM layer,
// output projection. Sequences start from <sos/eos>.
class RnnLm {
 public:
  struct State {
    Var h, c;
  };
  struct Values {
    Tensor h, c;
  };

  RnnLm(const LmConfig& config, std::uint64_t seed);
  RnnLm(const LmConfig& config, ParamSet params);

  const LmConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  State Initial(Graph& g) const;
  // Consumes `unit`; the new state's hidden vector predicts the next unit.
  State Step(Graph& g, const State& s, int unit) const;
  Var LogProbs(Graph& g, const State& s) const;  // 1 x V
  // The parameters participate in gradients only through `bound`, if given.
  State Step(Bound& b, const State& s, int unit) const;
  Var LogProbs(Bound& b, const State& s) const;

  // Summed negative log-likelihood of units followed by <sos/eos>.
  Var SequenceLoss(Bound& b, const std::vector<int>& units) const;
  // Sum of log P(u_i | u_<i), without the end symbol; 0 for an empty sequence.
  double SequenceLogProb(const std::vector<int>& units) const;

  static Values ToValues(const State& s) { return {s.h.value(), s.c.value()}; }

 private:
  void Init(std::uint64_t seed);
  LmConfig config_;
  ParamSet params_;
};

struct ModelConfig {
  int input_dim = 40;
  int encoder_layers = 2;
  int encoder_units = 32;            // per direction
  std::vector<int> subsample = {2, 2};  // per layer, after the layer
  int attention_dim = 32;
  int conv_channels = 4;
  int conv_width = 5;  // odd
  int embed_dim = 32;
  int decoder_units = 32;
  OutputMode mode = OutputMode::kFlat;
  int cf_feature_dim = 32;  // s_LM and s_ED size
  int cf_hidden = 32;       // r size
  int vocab_size = 0;
  std::vector<int> unit_class;  // language class per unit, hierarchical mode
  double init_scale = 0.1;

  void Validate() const;
  int EncoderDim() const { return 2 * encoder_units; }
  int SubsampledLength(int frames) const;
};

struct LossOptions {
  double lambda = 0.5;           // CTC weight
  double label_smoothing = 0.1;
  bool use_lid = false;          // needs hierarchical mode
};

struct UtteranceLoss {
  Var total;
  double ctc = 0.0;
  double att = 0.0;
  double lid = 0.0;
  bool ctc_infeasible = false;
};

// Joint CTC-attention model.
class AsrModel {
 public:
  struct Encoded {
    Var h;         // T' x D
    Var enc_proj;  // T' x A
  };
  struct State {
    Var z, cell;  // decoder LSTM, 1 x H
    Var att;      // previous attention weights, 1 x T'
    std::optional<RnnLm::State> lm;
  };
  struct StepOutput {
    Var logprobs;        // 1 x V
    Var class_logprobs;  // 1 x 3, hierarchical only
    Var attention;       // 1 x T'
    Var gate;            // cold fusion only
  };
  // Decoder state held outside a graph (beam search).
  struct StateValues {
    Tensor z, cell, att;
    std::optional<RnnLm::Values> lm;
  };

  AsrModel(const ModelConfig& config, std::uint64_t seed);
  AsrModel(const ModelConfig& config, ParamSet params);

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Cold fusion needs a frozen language model over the same vocabulary.
  void AttachLm(const RnnLm* lm);
  const RnnLm* lm() const { return lm_; }

  Encoded Encode(Bound& b, Var feats) const;
  Var CtcLogProbs(Bound& b, Var h) const;  // T' x V

  State Initial(Bound& b, const Encoded& enc) const;
  StepOutput Step(Bound& b, const Encoded& enc, const State& s, int prev_unit,
                  State* next) const;

  // Attention only, for tests: weights 1 x T' given the previous state.
  Var Attend(Bound& b, const Encoded& enc, Var z_prev, Var att_prev) const;

  UtteranceLoss Loss(Bound& b, const Tensor& feats, const std::vector<int>& units,
                     const LossOptions& opts) const;

  StateValues ToValues(const State& s) const;
  State FromValues(Graph& g, const StateValues& v) const;

 private:
  void Init(std::uint64_t seed);
  ModelConfig config_;
  ParamSet params_;
  const RnnLm* lm_ = nullptr;
};

// Language-ID loss: mean over steps of -log P(class target).
Var LidLoss(Var class_logprobs, const std::vector<int>& targets);
// Label-smoothed cross-entropy summed over steps; rows of `logprobs` are
// steps.
Var SmoothedCrossEntropy(Var logprobs, const std::vector<int>& targets, double epsilon);

}  // namespace csasr

#endif  // CSASR_MODEL_H_
