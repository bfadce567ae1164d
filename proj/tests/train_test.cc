// tests/train_test.cc

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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "csasr/train.h"

namespace csasr {
namespace {

ModelConfig Small() {
  ModelConfig c;
  c.input_dim = 4;
  c.encoder_units = 4;
  c.attention_dim = 4;
  c.conv_channels = 2;
  c.conv_width = 3;
  c.embed_dim = 4;
  c.decoder_units = 4;
  c.vocab_size = 6;
  c.unit_class = {2, 2, 2, 0, 1, 1};
  return c;
}

std::vector<TrainExample> ToyData(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<TrainExample> out;
  for (int i = 0; i < n; ++i) {
    TrainExample ex;
    ex.id = "u" + std::to_string(i);
    int len = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < len; ++k) ex.units.push_back(3 + static_cast<int>(rng() % 3));
    // Each unit gets 4 frames whose features encode it.
    ex.feats = Tensor::Matrix(4 * len, 4);
    for (int k = 0; k < len; ++k)
      for (int f = 0; f < 4; ++f)
        for (int d = 0; d < 4; ++d)
          ex.feats.at(4 * k + f, d) = (d == ex.units[k] - 3 ? 2.0 : 0.0) + 0.1 * nd(rng);
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(TrainTest, ShuffleIsPermutationAndStable) {
  std::vector<std::size_t> a(50), b(50);
  for (std::size_t i = 0; i < 50; ++i) a[i] = b[i] = i;
  DeterministicShuffle(a, 7);
  DeterministicShuffle(b, 7);
  EXPECT_EQ(a, b);
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  DeterministicShuffle(b, 8);
  EXPECT_NE(a, b);
}

TEST(TrainTest, SameSeedGivesIdenticalCheckpoints) {
  auto data = ToyData(6, 1);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;
  AsrModel a(Small(), 3), b(Small(), 3);
  std::ostringstream la, lb;
  TrainAsr(a, data, {}, tc, &la);
  TrainAsr(b, data, {}, tc, &lb);
  EXPECT_EQ(SerializeCheckpoint(a.params()), SerializeCheckpoint(b.params()));
  AsrModel c(Small(), 3);
  tc.loss.lambda = 1.0;
  TrainAsr(c, data, {}, tc);
  EXPECT_NE(SerializeCheckpoint(a.params()), SerializeCheckpoint(c.params()));
}

TEST(TrainTest, LogHasOneRecordPerEpoch) {
  auto data = ToyData(4, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.loss.use_lid = true;
  ModelConfig mc = Small();
  mc.mode = OutputMode::kHierarchical;
  AsrModel m(mc, 1);
  std::ostringstream log;
  auto r = TrainAsr(m, data, ToyData(2, 3), tc, &log);
  std::istringstream in(log.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"].get<int>(), ++n);
    for (const char* k : {"ctc", "att", "lid", "dev_loss", "train_loss"})
      EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_GT(j["lid"].get<double>(), 0.0);
  }
  EXPECT_EQ(n, 2);
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(TrainTest, LossDecreasesAndBestDevIsKept) {
  auto data = ToyData(8, 4);
  auto dev = ToyData(4, 5);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 2;
  tc.optimizer = OptimizerKind::kAdam;
  tc.learning_rate = 0.05;
  AsrModel m(Small(), 2);
  double before = EvaluateAsr(m, data, tc.loss);
  auto r = TrainAsr(m, data, dev, tc);
  EXPECT_LT(r.history.back().train_loss, 0.5 * before);
  double best = 1e300;
  for (const auto& e : r.history) best = std::min(best, e.dev_loss);
  EXPECT_EQ(r.best_dev_loss, best);
  EXPECT_NEAR(EvaluateAsr(m, dev, tc.loss), best, 1e-9);
}

TEST(TrainTest, SgdStepDecay) {
  auto data = ToyData(2, 6);
  TrainConfig tc;
  tc.epochs = 5;
  tc.learning_rate = 0.4;
  tc.decay_every = 2;
  tc.lr_decay = 0.5;
  AsrModel m(Small(), 1);
  auto r = TrainAsr(m, data, {}, tc);
  std::vector<double> lr;
  for (const auto& e : r.history) lr.push_back(e.learning_rate);
  EXPECT_EQ(lr, (std::vector<double>{0.4, 0.4, 0.2, 0.2, 0.1}));
}

TEST(TrainTest, NonFiniteLossAborts) {
  auto data = ToyData(3, 7);
  data[1].feats.at(0, 0) = std::nan("");
  AsrModel m(Small(), 1);
  TrainConfig tc;
  tc.epochs = 1;
  try {
    TrainAsr(m, data, {}, tc);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos) << e.what();
  }
}

TEST(TrainTest, RejectsBadConfig) {
  TrainConfig tc;
  tc.batch_size = 0;
  EXPECT_THROW(tc.Validate(), std::invalid_argument);
  tc = {};
  tc.lr_decay = 0.0;
  EXPECT_THROW(tc.Validate(), std::invalid_argument);
  EXPECT_THROW(ParseOptimizer("rmsprop"), std::invalid_argument);
}

TEST(LmTrainTest, LearnsDeterministicSuccessor) {
  // Unit 4 ("b") always follows unit 3 ("a").
  std::mt19937_64 rng(3);
  std::vector<std::vector<int>> corpus;
  for (int i = 0; i < 40; ++i) {
    std::vector<int> s;
    int len = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < len; ++k) {
      if (rng() % 2) {
        s.push_back(3);
        s.push_back(4);
      } else {
        s.push_back(5 + static_cast<int>(rng() % 2));
      }
    }
    corpus.push_back(s);
  }
  RnnLm lm({7, 8, 16}, 4);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 4;
  tc.optimizer = OptimizerKind::kAdam;
  tc.learning_rate = 0.02;
  TrainLm(lm, corpus, {}, tc);
  for (std::vector<int> ctx : {std::vector<int>{3}, {5, 3}, {3, 4, 6, 3}}) {
    double with = lm.SequenceLogProb([&] {
      auto c = ctx;
      c.push_back(4);
      return c;
    }());
    double p = std::exp(with - lm.SequenceLogProb(ctx));
    EXPECT_GT(p, 0.9);
  }
}

}  // namespace
}  // namespace csasr
