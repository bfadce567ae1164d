// csasr/ctc.h

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

#ifndef CSASR_CTC_H_
#define CSASR_CTC_H_

#include <limits>
#include <vector>

#include "csasr/graph.h"
#include "csasr/tensor.h"

namespace csasr {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) with -inf handled exactly.
double LogAdd(double a, double b);

// Frames needed to emit `labels`: one per label plus one blank between each
// pair of equal neighbours.
std::size_t CtcMinFrames(const std::vector<int>& labels);

struct CtcResult {
  double loss = 0.0;       // -log p(labels | logprobs); +inf if infeasible
  bool infeasible = false; // fewer frames than CtcMinFrames
  Tensor grad;             // d loss / d logprobs, T x K
  // T x (2L + 1) log-domain tables over the blank-interleaved labels. beta
  // includes the emission at its own frame, so alpha + beta counts the
  // emission twice.
  Tensor alpha;
  Tensor beta;
};

// Forward-backward over logprobs (T x K, column `blank` is the blank). Rows
// are used as given; callers normally pass log-softmax output.
CtcResult CtcForwardBackward(const Tensor& logprobs, const std::vector<int>& labels,
                             int blank = 0);

// Sums over every length-T alignment string. Throws if K^T > 1e7.
double CtcBruteForce(const Tensor& logprobs, const std::vector<int>& labels, int blank = 0);

// CTC loss as a tape node. An infeasible instance yields +inf with a zero
// gradient; `infeasible`, if given, reports it.
Var CtcLoss(Var logprobs, const std::vector<int>& labels, int blank = 0,
            bool* infeasible = nullptr);

// Incremental prefix scores for joint decoding.
class CtcPrefixScorer {
 public:
  struct State {
    std::vector<double> r_n;  // paths ending in the prefix's last label, per t
    std::vector<double> r_b;  // paths ending in blank, per t
    int last = -1;
    double prefix_score = 0.0;  // log P(output starts with the prefix)
  };

  CtcPrefixScorer(Tensor logprobs, int blank = 0);

  State Initial() const;
  // State of prefix + c.
  State Extend(const State& parent, int c) const;
  // log P(output equals the prefix exactly).
  double FinalScore(const State& state) const;

  std::size_t frames() const { return logprobs_.rows(); }
  std::size_t num_labels() const { return logprobs_.cols(); }

 private:
  Tensor logprobs_;
  int blank_;
};

}  // namespace csasr

#endif  // CSASR_CTC_H_
