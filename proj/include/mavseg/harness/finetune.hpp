// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mavseg/harness/evaluate.hpp"

namespace mavseg::harness {

enum class InitMode { PretrainedPath, RandomPath, RandomChannel };

inline std::string_view to_string(InitMode m) {
  switch (m) {
    case InitMode::PretrainedPath: return "pretrained_path";
    case InitMode::RandomPath: return "random_path";
    case InitMode::RandomChannel: return "random_channel";
  }
  return "?";
}

inline InitMode init_mode_from_string(std::string_view s) {
  for (auto m : {InitMode::PretrainedPath, InitMode::RandomPath, InitMode::RandomChannel})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown init mode '" + std::string(s) + "'");
}

struct FinetuneConfig {
  nn::Checkpoint source;
  Dataset target;
  std::string agnostic_modality;
  Assignments extra_assign;  // explicit channel placements for seen modalities
  InitMode init = InitMode::PretrainedPath;
  std::size_t epochs = 60;
  std::size_t batch_size = 2;
  std::optional<nn::LrSchedule> lr;  // default: for_epochs(epochs)
  std::optional<Extent> crop;        // default: the source's training crop
  double lesion_bias = 0.5;
  std::size_t folds = 0;  // 0: use the dataset's own split
  std::uint64_t seed = 0;
};

struct FoldResult {
  Split split;
  TrainLog log;
};

struct FinetuneResult {
  nn::Checkpoint checkpoint;  // model of the last fold
  DatasetScore score;         // every evaluated case, across folds
  std::vector<FoldResult> folds;
};

/// Starting weights for fine-tuning. Pretrained path checkpoints are used as is;
/// standard ones get a fresh agnostic channel or pathway.
inline nn::Checkpoint init_finetune_checkpoint(const nn::Checkpoint& source, InitMode mode, Rng& rng) {
  switch (mode) {
    case InitMode::PretrainedPath:
      require(source.variant == nn::Variant::AgnosticPath,
              "finetune: init pretrained_path needs an agnostic-path source, got " + std::string(nn::to_string(source.variant)));
      return source;
    case InitMode::RandomPath:
    case InitMode::RandomChannel:
      require(source.variant == nn::Variant::Standard, "finetune: init " + std::string(to_string(mode)) +
                                                           " needs a standard source, got " +
                                                           std::string(nn::to_string(source.variant)));
      return nn::reinit_agnostic(source, mode == InitMode::RandomPath ? nn::ReinitMode::Path : nn::ReinitMode::Channel, rng);
  }
  throw ValidationError("finetune: unsupported init mode");
}

/// k folds over ids after a seeded shuffle; chunk sizes differ by at most one.
inline std::vector<Split> make_folds(std::vector<std::string> ids, std::size_t k, Rng& rng) {
  require(k >= 2 && k <= ids.size(), "folds: need 2 <= k <= case count (" + std::to_string(ids.size()) + ")");
  shuffle(ids, rng);
  std::vector<Split> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * ids.size() / k, hi = (f + 1) * ids.size() / k;
    for (std::size_t i = 0; i < ids.size(); ++i) (i >= lo && i < hi ? out[f].test : out[f].train).push_back(ids[i]);
  }
  return out;
}

inline FinetuneResult finetune(const FinetuneConfig& fc, const EpochCallback& on_epoch = {}) {
  require(fc.epochs >= 1 && fc.batch_size >= 1, "finetune: epochs and batch_size must be >= 1");
  require(fc.target.descriptor.declares(fc.agnostic_modality),
          "finetune: agnostic modality " + fc.agnostic_modality + " not in dataset " + fc.target.descriptor.name);
  Rng init_probe = make_rng(fc.seed, {kInitStream});
  const auto probe = init_finetune_checkpoint(fc.source, fc.init, init_probe);
  Assignments assign = fc.extra_assign;
  assign[fc.agnostic_modality] = "agnostic";
  const auto plans = make_plan_pair(probe.layout, fc.target.descriptor.modalities, assign, true);
  require(plans.used.has_value(), "finetune: no modality assigned to the agnostic slot");
  const routing::AssignmentPlan plan = *plans.used;
  const Extent crop = fc.crop.value_or(training_window(fc.source));
  const nn::LrSchedule lr = fc.lr.value_or(nn::LrSchedule::for_epochs(fc.epochs));

  std::vector<Split> splits;
  if (fc.folds == 0) {
    splits.push_back(fc.target.descriptor.split);
  } else {
    std::vector<std::string> ids;
    for (auto& c : fc.target.descriptor.cases) ids.push_back(c.id);
    Rng frng = make_rng(fc.seed, {kFoldStream});
    splits = make_folds(ids, fc.folds, frng);
  }

  const Dataset prepared = prepare_dataset(fc.target);
  FinetuneResult res;
  res.score.name = fc.target.descriptor.name;
  res.score.unseen = fc.agnostic_modality;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    require(!splits[f].train.empty(), "finetune: fold " + std::to_string(f) + " has no training cases");
    Rng irng = make_rng(fc.seed, {kInitStream, f});
    const auto start = init_finetune_checkpoint(fc.source, fc.init, irng);
    auto model = nn::make_model<float>(start);
    DatasetCollection coll;
    coll.datasets.push_back(prepared);
    coll.datasets[0].descriptor.split = splits[f];
    FitOptions opt{fc.epochs, fc.batch_size, lr, crop, fc.lesion_bias, derive_seed(fc.seed, {f})};
    const auto layout = model.layout();
    auto log = fit(model, coll, opt,
                   [&](const Case& c, Rng&) { return routing::assemble_inference(c, layout, plan); }, on_epoch);
    json echo = fc.source.config;
    echo["crop_size"] = crop;
    echo["finetune"] = {{"init", std::string(to_string(fc.init))}, {"agnostic", fc.agnostic_modality},
                        {"epochs", fc.epochs}, {"fold", f}, {"seed", fc.seed}};
    res.checkpoint = nn::make_checkpoint(model, echo);

    Dataset eval_ds = fc.target;
    eval_ds.descriptor.split = splits[f];
    if (!eval_ds.descriptor.split.test.empty()) {
      auto s = evaluate(res.checkpoint, eval_ds, plans, crop);
      for (auto& c : s.cases) res.score.cases.push_back(std::move(c));
    }
    res.folds.push_back({splits[f], std::move(log)});
  }
  detail::finish_means(res.score, true);
  return res;
}

}  // namespace mavseg::harness
