// csasr/pipeline.h

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

#ifndef CSASR_PIPELINE_H_
#define CSASR_PIPELINE_H_

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "csasr/decode.h"
#include "csasr/model.h"
#include "csasr/signal.h"
#include "csasr/subword.h"
#include "csasr/synth.h"
#include "csasr/train.h"

namespace csasr {

// Thrown when an upstream artifact is missing; the message names the stage
// to run first.
class MissingStageError : public std::runtime_error {
 public:
  MissingStageError(const std::string& path, const std::string& stage)
      : std::runtime_error("missing " + path + "; run `csasr " + stage + "` first"),
        stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct DataConfig {
  SynthSpec synth;  // shared by all splits; num_utterances and seed are overridden
  int train = 50, dev = 10, eval = 10;
  // Monolingual sets (one per language) mixed into train when enabled.
  int mono = 0;
  std::uint64_t seed = 1;
  // Where gen-data writes; relative paths resolve against the experiment
  // directory. Several experiments may share one data directory.
  std::string dir = "data";
};

struct VariantFlags {
  bool lid = false;      // hierarchical output layer plus LID loss
  bool subword = false;  // English BPE units
  double slow = 1.0;     // speed factor applied to every split
  bool three_way = false;
  bool mono = false;     // monolingual data mixed into train
  FusionMode fusion = FusionMode::kNone;

  bool operator==(const VariantFlags&) const = default;
};

// "E2E", "E2ELD", "E2ESW", optionally followed by "+SL", "+3W", "+F3",
// "+SF" or "+CF" in that order. SL uses `slow_factor`.
VariantFlags ParseVariant(const std::string& name, double slow_factor = 0.8);
std::string VariantName(const VariantFlags& f);

struct ExperimentConfig {
  std::string name = "exp";
  DataConfig data;
  int label = 1;  // 2 merges particles and nonlinguistic markers
  VariantFlags variant;
  double slow_factor = 0.8;  // speed factor behind "+SL"
  int num_merges = 200;
  std::size_t num_subwords = 0;  // 0 keeps every learned merge
  FbankOptions fbank;
  ModelConfig model;  // vocab_size, mode and unit_class come from the vocabulary
  TrainConfig train;
  LmConfig lm;        // vocab_size comes from the vocabulary
  TrainConfig lm_train;
  DecodeConfig decode;
  int nbest = 5;
  std::uint64_t seed = 1;  // model init; also overrides train.seed

  void Validate() const;
};

nlohmann::ordered_json ConfigToJson(const ExperimentConfig& c);
// Unknown keys are errors; absent keys keep their defaults.
ExperimentConfig ConfigFromJson(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::string& path);

struct StageOptions {
  std::ostream* log = nullptr;  // progress lines
  int jobs = 1;                 // decode threads
};

struct LmWeightPoint {
  double weight = 0.0;
  double mer = 0.0;           // nlsyms kept
  double mer_stripped = 0.0;  // nlsyms stripped
};

// One experiment directory: config.json plus one subdirectory per stage.
class Experiment {
 public:
  // Writes config.json; an existing different config is an error unless
  // `overwrite` is set.
  static Experiment Create(const std::string& dir, const ExperimentConfig& config,
                           bool overwrite = false);
  static Experiment Open(const std::string& dir);

  const std::string& dir() const { return dir_; }
  const ExperimentConfig& config() const { return config_; }
  std::string DataDir() const;
  std::string Path(const std::string& rel) const { return dir_ + "/" + rel; }

  void GenData(const StageOptions& o = {}) const;
  // `label` overrides the configured label when nonzero.
  void Prep(const StageOptions& o = {}, int label = 0) const;
  void TrainBpe(const StageOptions& o = {}) const;
  void Train(const StageOptions& o = {}) const;
  void LmTrain(const StageOptions& o = {}) const;
  void Decode(const std::string& split, const StageOptions& o = {}) const;
  void Score(const std::string& split, const StageOptions& o = {}) const;
  // Shallow-fusion decodes of `split` at LM weights 0.0, 0.1, ..., 1.0, scored
  // against the references; also written to decode/SPLIT.lm_weight_sweep.jsonl.
  // Needs lm/lm.ck and a model trained without cold fusion.
  std::vector<LmWeightPoint> SweepLmWeight(const std::string& split,
                                           const StageOptions& o = {}) const;
  // Every stage in order, decoding and scoring dev and eval.
  void RunAll(const StageOptions& o = {}) const;

  UnitCodec LoadCodec() const;
  std::vector<TrainExample> LoadExamples(const std::string& split, const UnitCodec& codec) const;
  AsrModel LoadModel(const UnitCodec& codec) const;

 private:
  Experiment(std::string dir, ExperimentConfig config)
      : dir_(std::move(dir)), config_(std::move(config)) {}
  std::string dir_;
  ExperimentConfig config_;
};

// Table-II style grid: one row per variant, columns dev/eval x kept/stripped
// nlsyms, each cell the mean over its experiments (seeds).
struct GridRow {
  std::string name;
  std::vector<std::string> experiments;
};

struct GridCell {
  bool ok = false;
  std::string error;           // why the cell is missing
  std::vector<double> values;  // per experiment MER
  double mean = 0.0;
};

struct ReportRow {
  std::string name;
  GridCell cells[4];  // dev kept, dev stripped, eval kept, eval stripped
};

std::vector<GridRow> LoadGrid(const std::string& path);
std::vector<ReportRow> BuildReport(const std::vector<GridRow>& grid);
std::string FormatReport(const std::vector<ReportRow>& rows);
std::string ReportJsonLines(const std::vector<ReportRow>& rows);
bool ReportComplete(const std::vector<ReportRow>& rows);

// Reads a whole file; throws std::runtime_error if it cannot be opened.
std::string ReadFileBytes(const std::string& path);
// Writes through a temporary file and a rename.
void WriteFileBytes(const std::string& path, const std::string& bytes);

}  // namespace csasr

#endif  // CSASR_PIPELINE_H_
