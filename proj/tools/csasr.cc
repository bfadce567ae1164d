// tools/csasr.cc

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

// Experiment driver. Each subcommand runs one stage inside an experiment
// directory created by `csasr init`.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csasr/pipeline.h"

namespace {

using namespace csasr;

std::vector<std::string> Splits(const std::string& s) {
  if (s == "all") return {"dev", "eval"};
  if (s != "dev" && s != "eval" && s != "train")
    throw std::invalid_argument("--split must be dev, eval, train or all");
  return {s};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csasr: code-switching speech recognition experiments"};
  app.require_subcommand(1);
  std::string exp, config, variant, split = "all", grid, out;
  long long seed = -1;
  int label = 0, jobs = 1;
  bool force = false, quiet = false;
  app.add_flag("-q,--quiet", quiet, "No progress output");

  auto add_exp = [&](CLI::App* c) {
    c->add_option("--exp", exp, "Experiment directory")->required();
  };

  CLI::App* init = app.add_subcommand("init", "Create an experiment directory from a config");
  add_exp(init);
  init->add_option("--config", config, "Base JSON config")->required()->check(CLI::ExistingFile);
  init->add_option("--variant", variant, "Override the variant, e.g. E2ESW+3W+F3");
  init->add_option("--seed", seed, "Override the model seed");
  init->add_option("--label", label, "Override the label type (1 or 2)");
  init->add_flag("--force", force, "Replace an existing, different config");

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  add_exp(gen);
  CLI::App* prep = app.add_subcommand("prep", "Transcripts, augmentation, features, CMVN");
  add_exp(prep);
  prep->add_option("--label", label, "Label type, overrides the config (1 or 2)");
  CLI::App* bpe = app.add_subcommand("train-bpe", "Build the unit vocabulary (and BPE merges)");
  add_exp(bpe);
  CLI::App* train = app.add_subcommand("train", "Train the joint CTC-attention model");
  add_exp(train);
  CLI::App* lm = app.add_subcommand("lm-train", "Train the external language model");
  add_exp(lm);
  CLI::App* decode = app.add_subcommand("decode", "Beam search, writes n-best lists");
  add_exp(decode);
  decode->add_option("--split", split, "dev, eval, train or all (dev and eval)");
  decode->add_option("--jobs", jobs, "Decoding threads")->check(CLI::PositiveNumber);
  CLI::App* score = app.add_subcommand("score", "MER with and without nlsyms");
  add_exp(score);
  score->add_option("--split", split, "dev, eval, train or all (dev and eval)");
  CLI::App* sweep =
      app.add_subcommand("sweep-lm-weight", "Shallow-fusion MER at LM weights 0.0 to 1.0");
  add_exp(sweep);
  sweep->add_option("--split", split, "Split to decode (usually dev)");
  sweep->add_option("--jobs", jobs, "Decoding threads")->check(CLI::PositiveNumber);
  CLI::App* run = app.add_subcommand("run", "Every stage in order");
  add_exp(run);
  run->add_option("--jobs", jobs, "Decoding threads")->check(CLI::PositiveNumber);
  CLI::App* report = app.add_subcommand("report", "Assemble the system grid from score outputs");
  report->add_option("--grid", grid, "Grid JSON: rows of {name, experiments}")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", out, "Output directory for report.txt and report.jsonl")
      ->required();

  CLI11_PARSE(app, argc, argv);

  StageOptions opts;
  opts.log = quiet ? nullptr : &std::cerr;
  opts.jobs = jobs;
  try {
    if (init->parsed()) {
      ExperimentConfig c = LoadConfig(config);
      if (!variant.empty()) c.variant = ParseVariant(variant, c.slow_factor);
      if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
      if (label) c.label = label;
      c.train.seed = c.lm_train.seed = c.seed;
      Experiment::Create(exp, c, force);
      std::cerr << "created " << exp << "/config.json (" << VariantName(c.variant) << ", label "
                << c.label << ", seed " << c.seed << ")\n";
    } else if (report->parsed()) {
      auto rows = BuildReport(LoadGrid(grid));
      WriteFileBytes(out + "/report.txt", FormatReport(rows));
      WriteFileBytes(out + "/report.jsonl", ReportJsonLines(rows));
      std::cout << FormatReport(rows);
      if (!ReportComplete(rows)) {
        std::cerr << "error: report has failed cells\n";
        return 1;
      }
    } else {
      Experiment e = Experiment::Open(exp);
      if (gen->parsed()) e.GenData(opts);
      if (prep->parsed()) e.Prep(opts, label);
      if (bpe->parsed()) e.TrainBpe(opts);
      if (train->parsed()) e.Train(opts);
      if (lm->parsed()) e.LmTrain(opts);
      if (decode->parsed())
        for (const auto& s : Splits(split)) e.Decode(s, opts);
      if (score->parsed())
        for (const auto& s : Splits(split)) e.Score(s, opts);
      if (run->parsed()) e.RunAll(opts);
      if (sweep->parsed()) {
        if (split == "all") split = "dev";
        auto points = e.SweepLmWeight(split, opts);
        const LmWeightPoint* best = &points.front();
        std::printf("weight    MER  MER(nn)\n");
        for (const auto& p : points) {
          std::printf("%6.1f %6.2f %8.2f\n", p.weight, p.mer, p.mer_stripped);
          if (p.mer < best->mer) best = &p;
        }
        std::printf("best %.1f\n", best->weight);
      }
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
