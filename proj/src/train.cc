// src/train.cc

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

#include "csasr/train.h"

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace csasr {

std::string OptimizerName(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind ParseOptimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (sgd, adam)");
}

void TrainConfig::Validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw std::invalid_argument("lr_decay must lie in (0, 1]");
  if (decay_every < 0) throw std::invalid_argument("decay_every must be >= 0");
  if (!(loss.lambda >= 0.0 && loss.lambda <= 1.0))
    throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(loss.label_smoothing >= 0.0 && loss.label_smoothing < 1.0))
    throw std::invalid_argument("label_smoothing must lie in [0, 1)");
}

std::string EpochRecordJson(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.learning_rate;
  j["train_loss"] = r.train_loss;
  j["ctc"] = r.ctc;
  j["att"] = r.att;
  j["lid"] = r.lid;
  j["dev_loss"] = r.dev_loss;
  j["ctc_infeasible"] = r.ctc_infeasible;
  j["seconds"] = r.seconds;
  return j.dump();
}

void DeterministicShuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

namespace {

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& c) : c_(c), lr_(c.learning_rate) {}

  double lr() const { return lr_; }
  void EndEpoch(int epoch) {
    if (c_.decay_every > 0 && epoch % c_.decay_every == 0) lr_ *= c_.lr_decay;
  }

  void Step(ParamSet& params) {
    if (c_.clip_norm > 0.0) {
      double norm = params.GradNorm();
      if (norm > c_.clip_norm) {
        double s = c_.clip_norm / norm;
        for (auto& [name, t] : params)
          for (double& g : t.grad()) g *= s;
      }
    }
    ++steps_;
    for (auto& [name, t] : params) {
      auto v = t.values();
      auto g = t.grad();
      if (c_.optimizer == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
        continue;
      }
      auto& st = adam_[name];
      if (st.m.empty()) st.m.assign(v.size(), 0.0), st.v.assign(v.size(), 0.0);
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, steps_), c2 = 1.0 - std::pow(b2, steps_);
      for (std::size_t i = 0; i < v.size(); ++i) {
        st.m[i] = b1 * st.m[i] + (1 - b1) * g[i];
        st.v[i] = b2 * st.v[i] + (1 - b2) * g[i] * g[i];
        v[i] -= lr_ * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
      }
    }
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  const TrainConfig& c_;
  double lr_;
  long steps_ = 0;
  std::map<std::string, Moments> adam_;
};

struct Terms {
  double ctc = 0.0, att = 0.0, lid = 0.0;
  bool infeasible = false;
};

// Shared epoch loop. `forward` builds one utterance's loss on `b`.
TrainResult Run(ParamSet& params, std::size_t n, const TrainConfig& config,
                const std::function<Var(Bound&, std::size_t, Terms*)>& forward,
                const std::function<double()>& dev_loss,
                const std::function<std::string(std::size_t)>& name, std::ostream* log, const EpochHook& hook) {
  config.Validate();
  if (n == 0) throw std::invalid_argument("training set is empty");
  params.EnableGrad();
  Optimizer opt(config);
  TrainResult result;
  ParamSet best = params;
  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    DeterministicShuffle(order, config.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = opt.lr();
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      std::size_t end = std::min(n, begin + static_cast<std::size_t>(config.batch_size));
      params.ZeroGrad();
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        Graph g;
        Bound b(g, params);
        Terms t;
        Var loss = forward(b, order[k], &t);
        if (!std::isfinite(loss.scalar()))
          throw std::runtime_error("training diverged: loss " + std::to_string(loss.scalar()) +
                                   " at epoch " + std::to_string(epoch) + " on " +
                                   name(order[k]));
        g.Backward(Scale(loss, scale));
        rec.train_loss += loss.scalar();
        rec.ctc += t.ctc;
        rec.att += t.att;
        rec.lid += t.lid;
        rec.ctc_infeasible += t.infeasible;
      }
      if (!std::isfinite(params.GradNorm()))
        throw std::runtime_error("training diverged: non-finite gradient at epoch " +
                                 std::to_string(epoch));
      opt.Step(params);
    }
    const double dn = static_cast<double>(n);
    rec.train_loss /= dn;
    rec.ctc /= dn;
    rec.att /= dn;
    rec.lid /= dn;
    rec.dev_loss = dev_loss ? dev_loss() : rec.train_loss;
    if (!std::isfinite(rec.dev_loss))
      throw std::runtime_error("training diverged: dev loss is not finite at epoch " +
                               std::to_string(epoch));
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (result.history.empty() || rec.dev_loss < result.best_dev_loss) {
      result.best_dev_loss = rec.dev_loss;
      result.best_epoch = epoch;
      best.CopyValuesFrom(params);
    }
    result.history.push_back(rec);
    if (log) *log << EpochRecordJson(rec) << "\n" << std::flush;
    opt.EndEpoch(epoch);
    if (hook && !hook(rec)) break;
  }
  params.CopyValuesFrom(best);
  params.DisableGrad();
  return result;
}

}  // namespace

double EvaluateAsr(const AsrModel& model, const std::vector<TrainExample>& data,
                   const LossOptions& loss) {
  if (data.empty()) throw std::invalid_argument("evaluation set is empty");
  const ParamSet& params = model.params();
  double total = 0.0;
  for (const auto& ex : data) {
    Graph g;
    Bound b(g, params);
    total += model.Loss(b, ex.feats, ex.units, loss).total.scalar();
  }
  return total / static_cast<double>(data.size());
}

TrainResult TrainAsr(AsrModel& model, const std::vector<TrainExample>& train,
                     const std::vector<TrainExample>& dev, const TrainConfig& config,
                     std::ostream* log, const EpochHook& hook) {
  auto forward = [&](Bound& b, std::size_t i, Terms* t) {
    UtteranceLoss l = model.Loss(b, train[i].feats, train[i].units, config.loss);
    t->ctc = l.ctc_infeasible ? 0.0 : l.ctc;
    t->att = l.att;
    t->lid = l.lid;
    t->infeasible = l.ctc_infeasible;
    return l.total;
  };
  std::function<double()> dev_loss;
  if (!dev.empty()) dev_loss = [&] { return EvaluateAsr(model, dev, config.loss); };
  return Run(model.params(), train.size(), config, forward, dev_loss,
             [&](std::size_t i) { return train[i].id; }, log, hook);
}

double EvaluateLm(const RnnLm& lm, const std::vector<std::vector<int>>& data) {
  if (data.empty()) throw std::invalid_argument("evaluation set is empty");
  const ParamSet& params = lm.params();
  double total = 0.0;
  for (const auto& units : data) {
    Graph g;
    Bound b(g, params);
    total += lm.SequenceLoss(b, units).scalar();
  }
  return total / static_cast<double>(data.size());
}

TrainResult TrainLm(RnnLm& lm, const std::vector<std::vector<int>>& train,
                    const std::vector<std::vector<int>>& dev, const TrainConfig& config,
                    std::ostream* log) {
  auto forward = [&](Bound& b, std::size_t i, Terms*) { return lm.SequenceLoss(b, train[i]); };
  std::function<double()> dev_loss;
  if (!dev.empty()) dev_loss = [&] { return EvaluateLm(lm, dev); };
  return Run(lm.params(), train.size(), config, forward, dev_loss,
             [](std::size_t i) { return "sequence " + std::to_string(i); }, log, nullptr);
}

}  // namespace csasr
