// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "mavseg/harness/config.hpp"
#include "mavseg/nn/loss.hpp"
#include "mavseg/volume/manifest.hpp"
#include "mavseg/volume/schedule.hpp"

namespace mavseg::harness {

/// Seed-derivation streams. Sample order and every per-sample draw depend only
/// on (seed, epoch, schedule index).
enum Stream : std::uint64_t { kInitStream = 0, kScheduleStream = 1, kSampleStream = 2, kEvalStream = 3, kFoldStream = 4 };

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<std::string> consumed;  // sorted unique "dataset/case" ids read during training
  std::vector<std::string> degenerate;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  TrainLog log;
};

inline json log_json(const TrainLog& l) {
  return {{"epoch_loss", l.epoch_loss}, {"consumed", l.consumed}, {"degenerate", l.degenerate}};
}

struct FitOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 2;
  nn::LrSchedule lr;
  Extent crop{32, 32, 32};
  double lesion_bias = 0.5;
  std::uint64_t seed = 0;
};

using SampleBuilder = std::function<routing::InputAssembly(const Case& cropped, Rng& rng)>;
using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// The shared training loop: schedule, crop, assemble, forward, Dice+CE, Adam.
inline TrainLog fit(nn::Model<float>& model, const DatasetCollection& data, const FitOptions& opt,
                    const SampleBuilder& build, const EpochCallback& on_epoch = {}) {
  nn::Adam<float> adam;
  TrainLog log;
  std::set<std::string> consumed;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng srng = make_rng(opt.seed, {kScheduleStream, epoch});
    const auto schedule = oversample_schedule(data, srng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < schedule.size(); start += opt.batch_size) {
      const std::size_t end = std::min(schedule.size(), start + opt.batch_size);
      std::vector<routing::InputAssembly> assemblies;
      std::vector<float> target;
      for (std::size_t k = start; k < end; ++k) {
        const auto& entry = schedule[k];
        const Dataset& ds = data.datasets[entry.dataset];
        consumed.insert(ds.descriptor.name + "/" + entry.case_id);
        Rng rng = make_rng(opt.seed, {kSampleStream, epoch, k});
        const Case cropped = random_crop(ds.get(entry.case_id), opt.crop, rng, opt.lesion_bias);
        assemblies.push_back(build(cropped, rng));
        for (auto v : cropped.label.data()) target.push_back(static_cast<float>(v));
      }
      std::vector<const routing::InputAssembly*> ptrs;
      for (auto& a : assemblies) ptrs.push_back(&a);
      model.zero_grad();
      auto loss = nn::dice_ce_loss(model.forward(nn::batch_tensor<float>(ptrs)), target);
      loss.backward();
      adam.step(model.parameters(), opt.lr.at(epoch));
      loss_sum += loss.item();
      ++batches;
    }
    log.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch, log.epoch_loss.back());
  }
  log.consumed.assign(consumed.begin(), consumed.end());
  return log;
}

/// Drops the listed modalities from a dataset's declaration and every case.
inline void remove_modalities(Dataset& ds, const std::vector<std::string>& removal) {
  for (auto& m : removal) {
    std::erase(ds.descriptor.modalities, m);
    for (auto& ref : ds.descriptor.cases) ref.volumes.erase(m);
    for (auto& [_, c] : ds.cases) c.volumes.erase(m);
  }
  require(!ds.descriptor.modalities.empty(), "dataset " + ds.descriptor.name + " has no modalities left after removal");
}

/// Loads, strips removed modalities and z-score normalizes every case.
inline Dataset prepare_dataset(Dataset ds, const std::vector<std::string>& removal = {},
                               std::vector<std::string>* degenerate = nullptr) {
  remove_modalities(ds, removal);
  for (auto& [_, c] : ds.cases) c = normalize_case(c, degenerate);
  return ds;
}

inline DatasetCollection load_training_data(const ExperimentConfig& cfg, std::vector<std::string>* degenerate = nullptr) {
  DatasetCollection coll;
  for (auto& e : cfg.datasets)
    if (e.role == DatasetRole::Train) coll.datasets.push_back(prepare_dataset(load_dataset(e.path), cfg.modality_removal, degenerate));
  coll.validate();
  return coll;
}

/// Sample builder implementing each variant's training-time routing.
inline SampleBuilder variant_builder(const ExperimentConfig& cfg, const routing::ChannelLayout& layout) {
  switch (cfg.variant) {
    case nn::Variant::Standard:
      return [&cfg, layout](const Case& c, Rng& rng) {
        return routing::assemble_standard(c, layout, routing::apply_dropout(c.modalities(), cfg.dropout, rng).retained);
      };
    case nn::Variant::AgnosticChannel:
    case nn::Variant::AgnosticPath:
      return [&cfg, layout](const Case& c, Rng& rng) {
        const auto drop = routing::apply_dropout(c.modalities(), cfg.dropout, rng);
        return routing::assemble_agnostic_train(c, layout, drop, cfg.augment, cfg.dropout, rng);
      };
    case nn::Variant::Shuffle:
      return [&cfg, layout](const Case& c, Rng& rng) {
        const auto drop = routing::apply_dropout(c.modalities(), cfg.dropout, rng);
        return routing::assemble_shuffle(c, layout, rng, drop.retained);
      };
    case nn::Variant::Single:
      return [](const Case& c, Rng& rng) {
        const auto mods = c.modalities();
        return routing::assemble_single(c, mods[uniform_index(rng, mods.size())]);
      };
  }
  throw ValidationError("unsupported variant");
}

/// Trains on already prepared (normalized, modality-stripped) data.
inline TrainResult train(const ExperimentConfig& cfg, const DatasetCollection& data, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  require(data.size() > 0, "train: no training datasets");
  const auto layout = routing::build_layout(data, nn::has_agnostic(cfg.variant));
  Rng init = make_rng(cfg.seed, {kInitStream});
  nn::Model<float> model(cfg.variant, layout, cfg.unet, init);
  for (auto& ds : data.datasets)
    for (auto& id : ds.descriptor.split.train) {
      const auto& c = ds.get(id);
      for (std::size_t a = 0; a < 3; ++a)
        require(cfg.crop[a] <= c.dims()[a], "train: crop larger than case " + ds.descriptor.name + "/" + id);
    }
  FitOptions opt{cfg.epochs, cfg.batch_size, cfg.lr, cfg.crop, cfg.lesion_bias, cfg.seed};
  TrainResult r;
  r.log = fit(model, data, opt, variant_builder(cfg, layout), on_epoch);
  r.checkpoint = nn::make_checkpoint(model, config_json(cfg));
  return r;
}

inline TrainResult train(const ExperimentConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  std::vector<std::string> degenerate;
  const auto data = load_training_data(cfg, &degenerate);
  auto r = train(cfg, data, on_epoch);
  r.log.degenerate = std::move(degenerate);
  return r;
}

}  // namespace mavseg::harness
