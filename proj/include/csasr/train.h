// csasr/train.h

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

#ifndef CSASR_TRAIN_H_
#define CSASR_TRAIN_H_

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "csasr/model.h"

namespace csasr {

struct TrainExample {
  std::string id;
  Tensor feats;  // frames x dims, already normalized
  std::vector<int> units;
};

enum class OptimizerKind { kSgd, kAdam };
std::string OptimizerName(OptimizerKind k);
OptimizerKind ParseOptimizer(const std::string& s);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 0.5;
  double lr_decay = 0.5;   // multiplied in every decay_every epochs
  int decay_every = 0;     // 0: constant rate
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables
  std::uint64_t seed = 1;  // shuffling
  LossOptions loss;

  void Validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean per utterance
  double ctc = 0.0, att = 0.0, lid = 0.0;
  double dev_loss = 0.0;    // mean per utterance; train loss when no dev set
  std::size_t ctc_infeasible = 0;
  double seconds = 0.0;
};

std::string EpochRecordJson(const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_dev_loss = 0.0;
};

// Per-epoch hook; returning false stops training early.
using EpochHook = std::function<bool(const EpochRecord&)>;

// Mini-batch training of `model` in place. On return the model holds the
// parameters of the epoch with the lowest dev loss. Throws std::runtime_error
// if the loss becomes non-finite.
TrainResult TrainAsr(AsrModel& model, const std::vector<TrainExample>& train,
                     const std::vector<TrainExample>& dev, const TrainConfig& config,
                     std::ostream* log = nullptr, const EpochHook& hook = nullptr);

// Mean per-utterance loss without updating anything.
double EvaluateAsr(const AsrModel& model, const std::vector<TrainExample>& data,
                   const LossOptions& loss);

// Language model training on unit sequences; same optimizer settings (the
// loss options are ignored).
TrainResult TrainLm(RnnLm& lm, const std::vector<std::vector<int>>& train,
                    const std::vector<std::vector<int>>& dev, const TrainConfig& config,
                    std::ostream* log = nullptr);

double EvaluateLm(const RnnLm& lm, const std::vector<std::vector<int>>& data);

// Fisher-Yates with mt19937_64, identical on every platform.
void DeterministicShuffle(std::vector<std::size_t>& v, std::uint64_t seed);

}  // namespace csasr

#endif  // CSASR_TRAIN_H_
