// src/ctc.cc

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

#include "csasr/ctc.h"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace csasr {

double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

std::size_t CtcMinFrames(const std::vector<int>& labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) n += labels[i] == labels[i - 1];
  return n;
}

namespace {

void CheckLabels(const Tensor& logprobs, const std::vector<int>& labels, int blank) {
  const auto k = static_cast<int>(logprobs.cols());
  if (blank < 0 || blank >= k)
    throw std::invalid_argument("ctc: blank id " + std::to_string(blank) + " outside [0, " +
                                std::to_string(k) + ")");
  for (int l : labels) {
    if (l == blank) throw std::invalid_argument("ctc: labels must not contain the blank");
    if (l < 0 || l >= k)
      throw std::invalid_argument("ctc: label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(k) + ")");
  }
}

}  // namespace

CtcResult CtcForwardBackward(const Tensor& lp, const std::vector<int>& labels, int blank) {
  CheckLabels(lp, labels, blank);
  const std::size_t T = lp.rows(), K = lp.cols();
  const std::size_t S = 2 * labels.size() + 1;
  CtcResult r;
  r.grad = Tensor::Matrix(T, K);
  r.alpha = Tensor::Matrix(T, S, kLogZero);
  r.beta = Tensor::Matrix(T, S, kLogZero);
  if (T < CtcMinFrames(labels)) {
    r.loss = std::numeric_limits<double>::infinity();
    r.infeasible = true;
    return r;
  }
  std::vector<int> ext(S, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto skip_ok = [&](std::size_t s) {
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  Tensor& a = r.alpha;
  a.at(0, 0) = lp.at(0, ext[0]);
  if (S > 1) a.at(0, 1) = lp.at(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      double v = a.at(t - 1, s);
      if (s >= 1) v = LogAdd(v, a.at(t - 1, s - 1));
      if (skip_ok(s)) v = LogAdd(v, a.at(t - 1, s - 2));
      if (v != kLogZero) a.at(t, s) = v + lp.at(t, ext[s]);
    }

  Tensor& b = r.beta;
  b.at(T - 1, S - 1) = lp.at(T - 1, ext[S - 1]);
  if (S > 1) b.at(T - 1, S - 2) = lp.at(T - 1, ext[S - 2]);
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t s = 0; s < S; ++s) {
      double v = b.at(t + 1, s);
      if (s + 1 < S) v = LogAdd(v, b.at(t + 1, s + 1));
      if (s + 2 < S && skip_ok(s + 2)) v = LogAdd(v, b.at(t + 1, s + 2));
      if (v != kLogZero) b.at(t, s) = v + lp.at(t, ext[s]);
    }

  double logp = a.at(T - 1, S - 1);
  if (S > 1) logp = LogAdd(logp, a.at(T - 1, S - 2));
  r.loss = -logp;
  if (logp == kLogZero) {
    r.infeasible = true;
    return r;
  }
  std::vector<double> occ(K);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occ.begin(), occ.end(), kLogZero);
    for (std::size_t s = 0; s < S; ++s)
      occ[ext[s]] = LogAdd(occ[ext[s]], a.at(t, s) + b.at(t, s));
    for (std::size_t k = 0; k < K; ++k)
      if (occ[k] != kLogZero) r.grad.at(t, k) = -std::exp(occ[k] - lp.at(t, k) - logp);
  }
  return r;
}

double CtcBruteForce(const Tensor& lp, const std::vector<int>& labels, int blank) {
  CheckLabels(lp, labels, blank);
  const std::size_t T = lp.rows(), K = lp.cols();
  double count = std::pow(static_cast<double>(K), static_cast<double>(T));
  if (count > 1e7)
    throw std::invalid_argument("ctc brute force: " + std::to_string(K) + "^" +
                                std::to_string(T) + " alignments exceed 1e7");
  std::vector<int> path(T, 0);
  double total = kLogZero;
  std::vector<int> collapsed;
  while (true) {
    collapsed.clear();
    int prev = -1;
    double score = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      int k = path[t];
      score += lp.at(t, k);
      if (k != prev && k != blank) collapsed.push_back(k);
      prev = k;
    }
    if (collapsed == labels) total = LogAdd(total, score);
    std::size_t t = 0;
    while (t < T && ++path[t] == static_cast<int>(K)) path[t++] = 0;
    if (t == T) break;
  }
  return -total;
}

Var CtcLoss(Var logprobs, const std::vector<int>& labels, int blank, bool* infeasible) {
  Graph& g = *logprobs.graph;
  CtcResult r = CtcForwardBackward(g.value(logprobs), labels, blank);
  if (infeasible) *infeasible = r.infeasible;
  Tensor value = Tensor::Scalar(r.loss);
  auto grad = std::make_shared<Tensor>(std::move(r.grad));
  const int in = logprobs.id;
  return g.Record(OpKind::kCtcLoss, {in}, std::move(value), [grad, in](Graph& g, int self) {
    double up = g.grad(self)[0];
    auto dst = g.AccumGrad(in);
    const auto& src = grad->values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += up * src[i];
  });
}

CtcPrefixScorer::CtcPrefixScorer(Tensor logprobs, int blank)
    : logprobs_(std::move(logprobs)), blank_(blank) {
  if (blank_ < 0 || blank_ >= static_cast<int>(logprobs_.cols()))
    throw std::invalid_argument("ctc prefix scorer: blank id outside the label range");
}

CtcPrefixScorer::State CtcPrefixScorer::Initial() const {
  const std::size_t T = frames();
  State s;
  s.r_n.assign(T, kLogZero);
  s.r_b.assign(T, kLogZero);
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    acc += logprobs_.at(t, blank_);
    s.r_b[t] = acc;
  }
  s.prefix_score = 0.0;
  return s;
}

CtcPrefixScorer::State CtcPrefixScorer::Extend(const State& g, int c) const {
  if (c == blank_ || c < 0 || c >= static_cast<int>(num_labels()))
    throw std::invalid_argument("ctc prefix scorer: cannot extend with label " +
                                std::to_string(c));
  const std::size_t T = frames();
  State h;
  h.last = c;
  h.r_n.assign(T, kLogZero);
  h.r_b.assign(T, kLogZero);
  if (T == 0) {
    h.prefix_score = kLogZero;
    return h;
  }
  // phi(t): mass of the parent prefix at t that may be followed by a new c.
  auto phi = [&](std::size_t t) {
    return c == g.last ? g.r_b[t] : LogAdd(g.r_b[t], g.r_n[t]);
  };
  if (g.last < 0) h.r_n[0] = logprobs_.at(0, c);
  double psi = h.r_n[0];
  for (std::size_t t = 1; t < T; ++t) {
    double p = phi(t - 1);
    h.r_n[t] = LogAdd(h.r_n[t - 1], p) + logprobs_.at(t, c);
    h.r_b[t] = LogAdd(h.r_n[t - 1], h.r_b[t - 1]) + logprobs_.at(t, blank_);
    psi = LogAdd(psi, p + logprobs_.at(t, c));
  }
  h.prefix_score = psi;
  return h;
}

double CtcPrefixScorer::FinalScore(const State& s) const {
  if (s.r_n.empty()) return s.last < 0 ? 0.0 : kLogZero;
  return LogAdd(s.r_n.back(), s.r_b.back());
}

}  // namespace csasr
