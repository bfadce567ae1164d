// tests/ctc_test.cc

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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "csasr/ctc.h"
#include "csasr/params.h"

namespace csasr {
namespace {

Tensor Uniform(std::size_t T, std::size_t K) {
  return Tensor::Matrix(T, K, -std::log(static_cast<double>(K)));
}

Tensor RandomLogprobs(std::size_t T, std::size_t K, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.5);
  Tensor x = Tensor::Matrix(T, K);
  for (std::size_t t = 0; t < T; ++t) {
    double m = -1e300;
    for (std::size_t k = 0; k < K; ++k) m = std::max(m, x.at(t, k) = n(rng));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(x.at(t, k) - m);
    for (std::size_t k = 0; k < K; ++k) x.at(t, k) -= m + std::log(s);
  }
  return x;
}

std::vector<int> RandomLabels(std::size_t K, std::size_t max_len, std::mt19937_64& rng) {
  std::size_t L = rng() % (max_len + 1);
  std::vector<int> l;
  for (std::size_t i = 0; i < L; ++i) l.push_back(1 + static_cast<int>(rng() % (K - 1)));
  return l;
}

TEST(CtcTest, HandExamples) {
  EXPECT_NEAR(CtcForwardBackward(Uniform(1, 3), {1}).loss, std::log(3.0), 1e-12);
  // Alignments aa, a-, -a each have probability 1/9.
  EXPECT_NEAR(CtcForwardBackward(Uniform(2, 3), {1}).loss, std::log(3.0), 1e-12);
  EXPECT_NEAR(CtcBruteForce(Uniform(2, 3), {1}), std::log(3.0), 1e-12);
  std::mt19937_64 rng(1);
  Tensor x = RandomLogprobs(2, 3, rng);
  EXPECT_NEAR(CtcForwardBackward(x, {}).loss, -(x.at(0, 0) + x.at(1, 0)), 1e-12);
  EXPECT_NEAR(CtcBruteForce(x, {}), -(x.at(0, 0) + x.at(1, 0)), 1e-12);
}

TEST(CtcTest, TooFewFrames) {
  EXPECT_EQ(CtcMinFrames({1, 1, 2}), 4u);
  CtcResult r = CtcForwardBackward(Uniform(3, 3), {1, 1, 2});
  EXPECT_TRUE(r.infeasible);
  EXPECT_TRUE(std::isinf(r.loss) && r.loss > 0);
  for (double g : r.grad.values()) EXPECT_EQ(g, 0.0);
  EXPECT_TRUE(std::isinf(CtcBruteForce(Uniform(3, 3), {1, 1, 2})));
  EXPECT_FALSE(CtcForwardBackward(Uniform(4, 3), {1, 1, 2}).infeasible);
}

TEST(CtcTest, RejectsBadLabels) {
  EXPECT_THROW(CtcForwardBackward(Uniform(3, 3), {0}), std::invalid_argument);
  EXPECT_THROW(CtcForwardBackward(Uniform(3, 3), {3}), std::invalid_argument);
  EXPECT_THROW(CtcBruteForce(Uniform(20, 3), {1}), std::invalid_argument);
}

TEST(CtcTest, MatchesBruteForce) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    std::size_t T = 1 + rng() % 6, K = 2 + rng() % 3;
    Tensor x = RandomLogprobs(T, K, rng);
    auto labels = RandomLabels(K, 3, rng);
    double a = CtcForwardBackward(x, labels).loss, b = CtcBruteForce(x, labels);
    if (std::isinf(b)) {
      EXPECT_TRUE(std::isinf(a));
    } else {
      EXPECT_NEAR(a, b, 1e-10);
    }
  }
}

TEST(CtcTest, AlphaBetaCrossCheck) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    std::size_t T = 3 + rng() % 8, K = 2 + rng() % 4;
    Tensor x = RandomLogprobs(T, K, rng);
    auto labels = RandomLabels(K, 3, rng);
    CtcResult r = CtcForwardBackward(x, labels);
    if (r.infeasible) continue;
    std::vector<int> ext(2 * labels.size() + 1, 0);
    for (std::size_t j = 0; j < labels.size(); ++j) ext[2 * j + 1] = labels[j];
    for (std::size_t t = 0; t < T; ++t) {
      double total = kLogZero;
      for (std::size_t s = 0; s < ext.size(); ++s)
        total = LogAdd(total, r.alpha.at(t, s) + r.beta.at(t, s) - x.at(t, ext[s]));
      EXPECT_NEAR(total, -r.loss, 1e-9);
    }
    for (double v : r.alpha.values()) EXPECT_LE(v, 1e-12);
    for (double v : r.beta.values()) EXPECT_LE(v, 1e-12);
  }
}

TEST(CtcTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    std::size_t T = 2 + rng() % 6, K = 2 + rng() % 3;
    Tensor logits = RandomLogprobs(T, K, rng);
    auto labels = RandomLabels(K, 3, rng);
    if (T < CtcMinFrames(labels)) continue;
    // Raw inputs, and through a log-softmax as in training.
    auto raw = GradCheck([&](Graph& g) { return CtcLoss(g.Parameter(logits), labels); },
                         {{"x", &logits}}, {.tol = 1e-6});
    EXPECT_TRUE(raw.pass) << raw.worst_rel_error << " at " << raw.worst_entry;
    auto soft = GradCheck(
        [&](Graph& g) { return CtcLoss(LogSoftmax(g.Parameter(logits)), labels); },
        {{"x", &logits}}, {.tol = 1e-6});
    EXPECT_TRUE(soft.pass) << soft.worst_rel_error << " at " << soft.worst_entry;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(CtcTest, InfeasibleNodeHasZeroGradient) {
  Tensor x = Uniform(1, 3);
  x.EnableGrad();
  Graph g;
  bool flag = false;
  Var loss = CtcLoss(g.Parameter(x), {1, 1}, 0, &flag);
  EXPECT_TRUE(flag);
  g.Backward(loss);
  for (double v : x.grad()) EXPECT_EQ(v, 0.0);
}

TEST(CtcTest, PermutationCovariant) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 30; ++i) {
    std::size_t T = 6, K = 4;
    Tensor x = RandomLogprobs(T, K, rng);
    auto labels = RandomLabels(K, 3, rng);
    std::vector<int> perm = {0, 1, 2, 3};
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    Tensor y = Tensor::Matrix(T, K);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) y.at(t, perm[k]) = x.at(t, k);
    std::vector<int> relabeled;
    for (int l : labels) relabeled.push_back(perm[l]);
    EXPECT_NEAR(CtcForwardBackward(x, labels).loss, CtcForwardBackward(y, relabeled).loss,
                1e-12);
  }
}

// log P(collapsed output begins with prefix), by enumerating alignments.
double PrefixByEnumeration(const Tensor& x, const std::vector<int>& prefix) {
  const std::size_t T = x.rows(), K = x.cols();
  std::vector<int> path(T, 0);
  double total = kLogZero;
  while (true) {
    std::vector<int> out;
    int prev = -1;
    double score = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      score += x.at(t, path[t]);
      if (path[t] != prev && path[t] != 0) out.push_back(path[t]);
      prev = path[t];
    }
    if (out.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), out.begin()))
      total = LogAdd(total, score);
    std::size_t t = 0;
    while (t < T && ++path[t] == static_cast<int>(K)) path[t++] = 0;
    if (t == T) break;
  }
  return total;
}

TEST(CtcPrefixTest, MatchesEnumeration) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = RandomLogprobs(3, 3, rng);
    CtcPrefixScorer scorer(x);
    auto root = scorer.Initial();
    EXPECT_EQ(root.prefix_score, 0.0);
    EXPECT_NEAR(scorer.FinalScore(root), -CtcBruteForce(x, {}), 1e-12);
    for (int a = 1; a <= 2; ++a) {
      auto sa = scorer.Extend(root, a);
      EXPECT_NEAR(sa.prefix_score, PrefixByEnumeration(x, {a}), 1e-9);
      EXPECT_NEAR(scorer.FinalScore(sa), -CtcBruteForce(x, {a}), 1e-9);
      EXPECT_LE(sa.prefix_score, root.prefix_score);
      for (int b = 1; b <= 2; ++b) {
        auto sb = scorer.Extend(sa, b);
        double want = PrefixByEnumeration(x, {a, b});
        if (std::isinf(want)) {
          EXPECT_TRUE(std::isinf(sb.prefix_score));
        } else {
          EXPECT_NEAR(sb.prefix_score, want, 1e-9);
        }
        EXPECT_LE(sb.prefix_score, sa.prefix_score + 1e-12);
        double exact = -CtcBruteForce(x, {a, b});
        if (std::isinf(exact)) EXPECT_TRUE(std::isinf(scorer.FinalScore(sb)));
        else EXPECT_NEAR(scorer.FinalScore(sb), exact, 1e-9);
      }
    }
  }
}

TEST(CtcPrefixTest, LongerInstances) {
  std::mt19937_64 rng(32);
  Tensor x = RandomLogprobs(7, 4, rng);
  CtcPrefixScorer scorer(x);
  auto s = scorer.Initial();
  std::vector<int> prefix;
  for (int c : {2, 2, 3}) {
    s = scorer.Extend(s, c);
    prefix.push_back(c);
    EXPECT_NEAR(s.prefix_score, PrefixByEnumeration(x, prefix), 1e-9);
    EXPECT_NEAR(scorer.FinalScore(s), -CtcForwardBackward(x, prefix).loss, 1e-9);
  }
}

}  // namespace
}  // namespace csasr
