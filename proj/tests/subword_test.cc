// tests/subword_test.cc

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

#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "bpe_oracle.h"
#include "csasr/subword.h"
#include "csasr/synth.h"

namespace csasr {
namespace {

const std::map<std::string, long> kLowCorpus = {{"low", 5}, {"lower", 2}, {"lowest", 2}};

TEST(BpeTest, ZeroMergesIsCharacters) {
  MergeTable t = TrainBpe(kLowCorpus, 0);
  EXPECT_EQ(t.size(), 0u);
  EXPECT_EQ(ApplyBpe("lowest", t),
            (std::vector<std::string>{"l", "o", "w", "e", "s", "t</w>"}));
  EXPECT_THROW(TrainBpe({}, 1), std::invalid_argument);
  EXPECT_EQ(TrainBpe({}, 0).size(), 0u);
}

TEST(BpeTest, SingleCandidate) {
  MergeTable t = TrainBpe({{"aaaa", 10}}, 3);
  ASSERT_GE(t.size(), 1u);
  EXPECT_EQ(t.at(0), (MergeTable::Pair{"a", "a"}));
}

TEST(BpeTest, LowCorpusMatchesOracle) {
  MergeTable t = TrainBpe(kLowCorpus, 4);
  auto oracle = testing_oracle::TrainBpe(kLowCorpus, 4);
  EXPECT_EQ(t.merges(), oracle);
  // Hand check: lo(9); lo+w</w>(5); lo+w ties w+e at 4, "lo" < "w"; low+e(4).
  EXPECT_EQ(t.merges(), (std::vector<MergeTable::Pair>{
                            {"l", "o"}, {"lo", "w</w>"}, {"lo", "w"}, {"low", "e"}}));
  for (const auto& w : {"low", "lower", "lowest", "slow", "owl"})
    EXPECT_EQ(ApplyBpe(w, t), testing_oracle::Segment(w, oracle)) << w;
  EXPECT_EQ(ApplyBpe("lowest", t), (std::vector<std::string>{"lowe", "s", "t</w>"}));
}

std::string RandomWord(std::mt19937_64& rng) {
  static const std::string kAlpha = "abcdeilnorst'-";
  int len = 1 + static_cast<int>(rng() % 9);
  std::string w;
  for (int i = 0; i < len; ++i) w += kAlpha[rng() % kAlpha.size()];
  return w;
}

TEST(BpeTest, RandomCorporaMatchOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, long> corpus;
    for (int i = 0; i < 40; ++i) corpus[RandomWord(rng)] += 1 + static_cast<long>(rng() % 5);
    MergeTable t = TrainBpe(corpus, 30);
    auto oracle = testing_oracle::TrainBpe(corpus, 30);
    ASSERT_EQ(t.merges(), oracle);
    for (int i = 0; i < 50; ++i) {
      std::string w = RandomWord(rng);
      EXPECT_EQ(ApplyBpe(w, t), testing_oracle::Segment(w, oracle)) << w;
    }
  }
}

TEST(BpeTest, RoundTripAndLengthBound) {
  std::mt19937_64 rng(4);
  std::map<std::string, long> corpus;
  for (int i = 0; i < 200; ++i) corpus[RandomWord(rng)] += 1;
  MergeTable t = TrainBpe(corpus, 100);
  for (int i = 0; i < 1000; ++i) {
    std::string w = RandomWord(rng);
    auto units = ApplyBpe(w, t);
    EXPECT_EQ(JoinSubwords(units), w);
    EXPECT_LE(units.size(), w.size() + 1);
  }
  EXPECT_EQ(ApplyBpe("x", t), std::vector<std::string>{"x</w>"});
}

TEST(BpeTest, Deterministic) {
  std::mt19937_64 rng(8);
  std::map<std::string, long> corpus;
  for (int i = 0; i < 100; ++i) corpus[RandomWord(rng)] += 2;
  EXPECT_EQ(TrainBpe(corpus, 50), TrainBpe(corpus, 50));
}

TEST(BpeTest, SaveLoad) {
  auto path = (std::filesystem::temp_directory_path() / "csasr_merges.txt").string();
  MergeTable t = TrainBpe(kLowCorpus, 4);
  t.Save(path);
  EXPECT_EQ(MergeTable::Load(path), t);
  std::filesystem::remove(path);
}

TEST(BpeTest, InventoryPrefix) {
  MergeTable t = TrainBpe(kLowCorpus, 4);
  // Initial symbols: l o w w</w> e r</w> s t</w>.
  EXPECT_EQ(BpeInventory(kLowCorpus, {}).size(), 8u);
  EXPECT_EQ(MergesForInventory(kLowCorpus, t, 8).size(), 0u);
  EXPECT_EQ(MergesForInventory(kLowCorpus, t, 10).size(), 2u);
  EXPECT_EQ(BpeInventory(kLowCorpus, MergesForInventory(kLowCorpus, t, 12)).size(), 12u);
  EXPECT_THROW(MergesForInventory(kLowCorpus, t, 7), std::invalid_argument);
  try {
    MergesForInventory(kLowCorpus, t, 13);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("12"), std::string::npos);
  }
}

const Lexicon kLex = Lexicon::Default();

TEST(VocabTest, CharMode) {
  UnitCodec codec = BuildCodec({"我 GO"}, kLex, {});
  const MixedVocab& v = codec.vocab();
  EXPECT_EQ(v.size(), 6u + 3u);
  EXPECT_EQ(v.Id("<blank>"), 0);
  for (const char* u : {"我", "G", "O", "<space>", "<dispar>", "<nlsyms>", "<unk>", "<sos/eos>"})
    EXPECT_TRUE(v.Contains(u)) << u;
  EXPECT_EQ(v.Class(v.Id("我")), LangClass::kMandarin);
  EXPECT_EQ(v.Class(v.Id("G")), LangClass::kEnglish);
  EXPECT_EQ(v.Class(v.Id("<space>")), LangClass::kNeutral);
}

TEST(VocabTest, ClassesPartition) {
  UnitCodec codec = BuildCodec({"我 GO 了 lah", "hello world (laughing)"}, kLex, {});
  const MixedVocab& v = codec.vocab();
  EXPECT_EQ(v.CountClass(LangClass::kMandarin) + v.CountClass(LangClass::kEnglish) +
                v.CountClass(LangClass::kNeutral),
            v.size());
  EXPECT_EQ(v.Class(v.Id("lah")), LangClass::kNeutral);
  EXPECT_EQ(v.Class(v.Id("(laughing)")), LangClass::kNeutral);
}

TEST(VocabTest, CharModeSpaceRule) {
  UnitCodec codec = BuildCodec({"我 GO 了", "GO home"}, kLex, {});
  EXPECT_EQ(codec.Segment("我 GO 了"), (std::vector<std::string>{"我", "G", "O", "了"}));
  EXPECT_EQ(codec.Segment("GO home"),
            (std::vector<std::string>{"G", "O", "<space>", "h", "o", "m", "e"}));
  EXPECT_EQ(codec.Decode(codec.Encode("我 GO 了")), "我 GO 了");
  EXPECT_TRUE(codec.Encode("").empty());
}

TEST(VocabTest, SubwordSizeAndUnk) {
  SynthSpec spec;
  spec.inventory_b = 60;
  spec.num_utterances = 400;
  auto lex = BuildSynthLexicon(spec);
  std::vector<std::string> texts;
  for (const auto& u : GenTranscripts(spec, lex, "v")) texts.push_back(u.Text());
  Lexicon plex = SynthParticleLexicon(spec);
  auto counts = EnglishWordCounts(texts, plex);
  MergeTable merges = TrainBpe(counts, 200);
  std::size_t base = BpeInventory(counts, {}).size();
  std::size_t n = base + 20;
  UnitCodec codec = BuildCodec(texts, plex, {VocabMode::kSubword, n}, merges);
  UnitCodec chars = BuildCodec(texts, plex, {});
  const MixedVocab& v = codec.vocab();
  EXPECT_EQ(v.CountClass(LangClass::kEnglish), n);
  std::size_t specials_and_neutral = v.CountClass(LangClass::kNeutral);
  EXPECT_EQ(v.size(), v.CountClass(LangClass::kMandarin) + n + specials_and_neutral);
  EXPECT_EQ(v.CountClass(LangClass::kMandarin),
            chars.vocab().CountClass(LangClass::kMandarin));
  EXPECT_THROW(BuildCodec(texts, plex, {VocabMode::kSubword, 100000}, merges),
               std::invalid_argument);
  std::size_t unk = 0;
  auto ids = codec.Encode("我 qqq", &unk);
  EXPECT_GT(unk, 0u);
  EXPECT_EQ(ids.back(), MixedVocab::kUnkId);
}

TEST(VocabTest, RoundTripOnSyntheticTranscripts) {
  SynthSpec spec;
  spec.num_utterances = 1000;
  spec.particle_prob = 0.1;
  spec.nonling_prob = 0.05;
  auto lex = BuildSynthLexicon(spec);
  Lexicon plex = SynthParticleLexicon(spec);
  std::vector<std::string> label1, label2;
  for (const auto& u : GenTranscripts(spec, lex, "t")) {
    label1.push_back(u.Text());
    label2.push_back(MergeNonlinguistic(ParseTranscript(u.Text(), plex), plex).Text());
  }
  auto counts = EnglishWordCounts(label1, plex);
  MergeTable merges = TrainBpe(counts, 50);
  for (const auto* texts : {&label1, &label2}) {
    std::vector<UnitCodec> codecs = {BuildCodec(*texts, plex, {}),
                                     BuildCodec(*texts, plex, {VocabMode::kSubword, 0}, merges)};
    for (const UnitCodec& codec : codecs)
      for (const auto& t : *texts) {
        std::size_t unk = 1;
        auto ids = codec.Encode(t, &unk);
        EXPECT_EQ(unk, 0u);
        EXPECT_EQ(codec.Decode(ids), t);
        for (int id : ids)
          EXPECT_TRUE(codec.vocab().Class(id) != LangClass::kMandarin ||
                      codec.vocab().Unit(id).size() == 3);
      }
  }
}

TEST(VocabTest, SaveLoad) {
  auto path = (std::filesystem::temp_directory_path() / "csasr_vocab.txt").string();
  UnitCodec codec = BuildCodec({"我 GO 了 lah"}, kLex, {});
  codec.vocab().Save(path);
  EXPECT_EQ(MixedVocab::Load(path), codec.vocab());
  std::filesystem::remove(path);
  MixedVocab m = MixedVocab::Minimal();
  EXPECT_EQ(m.size(), 3u);
  EXPECT_THROW(m.Add("<unk>", LangClass::kEnglish), std::invalid_argument);
}

}  // namespace
}  // namespace csasr
