// csasr/decode.h

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

#ifndef CSASR_DECODE_H_
#define CSASR_DECODE_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "csasr/ctc.h"
#include "csasr/model.h"

namespace csasr {

enum class FusionMode { kNone, kShallow, kCold };
std::string FusionModeName(FusionMode m);
FusionMode ParseFusionMode(const std::string& s);

struct DecodeConfig {
  int beam = 20;
  double ctc_weight = 0.5;
  double lm_weight = 0.3;        // beta, shallow fusion only
  double max_len_ratio = 1.0;    // output cap relative to encoder frames
  FusionMode fusion = FusionMode::kNone;
  // Drop live hypotheses scoring below the best finished one by more than
  // this; <= 0 keeps them all.
  double end_margin = 0.0;

  void Validate() const;
};

// Next-unit log-probabilities given a prefix. Implementations carry their
// own per-prefix state behind an opaque pointer.
class StepScorer {
 public:
  using StatePtr = std::shared_ptr<const void>;
  virtual ~StepScorer() = default;
  virtual int vocab_size() const = 0;
  virtual StatePtr Initial() const = 0;
  // Consumes `unit` (the previous output, <sos/eos> first) from `state` and
  // returns log-probs over the next unit.
  virtual std::vector<double> Next(const StatePtr& state, int unit, StatePtr* next) const = 0;
};

// Attention decoder over one encoded utterance.
class ModelScorer : public StepScorer {
 public:
  ModelScorer(const AsrModel& model, const Tensor& feats);
  int vocab_size() const override { return model_.config().vocab_size; }
  StatePtr Initial() const override;
  std::vector<double> Next(const StatePtr& state, int unit, StatePtr* next) const override;
  const Tensor& ctc_logprobs() const { return ctc_logprobs_; }
  std::size_t encoder_frames() const { return enc_h_.rows(); }

 private:
  const AsrModel& model_;
  Tensor enc_h_, enc_proj_, ctc_logprobs_;
};

class LmScorer : public StepScorer {
 public:
  explicit LmScorer(const RnnLm& lm) : lm_(lm) {}
  int vocab_size() const override { return lm_.config().vocab_size; }
  StatePtr Initial() const override;
  std::vector<double> Next(const StatePtr& state, int unit, StatePtr* next) const override;

 private:
  const RnnLm& lm_;
};

struct Hypothesis {
  std::vector<int> units;  // without <sos/eos>
  double att = 0.0;        // attention log-prob, including <eos> when finished
  double ctc = 0.0;        // CTC prefix (or, when finished, full) log-prob
  double lm = 0.0;         // LM log-prob, including <eos> when finished
  double score = 0.0;
};

struct DecodeResult {
  std::vector<Hypothesis> nbest;  // best first
  bool complete = true;  // false: nothing finished, best live hypothesis returned
};

// (1 - w) att + w ctc, plus beta lm when beta != 0.
double CombineScores(double att, double ctc, double lm, double ctc_weight, double beta);

// Components for one search. `ctc_logprobs` may be empty when ctc_weight is
// 0; `lm` is used only under shallow fusion.
struct SearchInputs {
  const StepScorer* att = nullptr;
  Tensor ctc_logprobs;
  const StepScorer* lm = nullptr;
  int max_len = 0;
};

DecodeResult BeamSearch(const SearchInputs& in, const DecodeConfig& config);

// Scores every unit sequence up to `max_len` (units other than blank and
// <sos/eos>). Throws if there are more than 1e6 of them.
Hypothesis ExhaustiveSearch(const SearchInputs& in, const DecodeConfig& config);

// Model front end: encodes, fills in the CTC matrix and length cap.
DecodeResult DecodeUtterance(const AsrModel& model, const Tensor& feats,
                             const DecodeConfig& config, const RnnLm* lm = nullptr);

// N-best TSV: id, rank, score, att, ctc, lm, units (space separated), text.
struct NbestEntry {
  std::string utt_id;
  int rank = 1;
  Hypothesis hyp;
  std::vector<std::string> unit_strings;
  std::string text;
};
std::string FormatNbestLine(const NbestEntry& e);
NbestEntry ParseNbestLine(const std::string& line);

}  // namespace csasr

#endif  // CSASR_DECODE_H_
