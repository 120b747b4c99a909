// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Augmentation ablation: one model per (augmentation subset, region mode) cell,
// every other setting held fixed.

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mavseg/harness/evaluate.hpp"

namespace mavseg::harness {

enum class AblationRow { NoAugs, ScaleShift, LesionSwitch, MixUp, Inversion, Combination };
enum class AblationMode { TissueSpecific, Uniform };

inline constexpr std::array<AblationRow, 6> kAblationRows = {AblationRow::NoAugs,    AblationRow::ScaleShift,
                                                             AblationRow::LesionSwitch, AblationRow::MixUp,
                                                             AblationRow::Inversion, AblationRow::Combination};
inline constexpr std::array<AblationMode, 2> kAblationModes = {AblationMode::TissueSpecific, AblationMode::Uniform};

inline std::string_view to_string(AblationRow r) {
  switch (r) {
    case AblationRow::NoAugs: return "No Augs";
    case AblationRow::ScaleShift: return "Scale & Shift";
    case AblationRow::LesionSwitch: return "Lesion Switch";
    case AblationRow::MixUp: return "MixUp";
    case AblationRow::Inversion: return "Inversion";
    case AblationRow::Combination: return "Combination";
  }
  return "?";
}

inline std::string_view to_string(AblationMode m) { return m == AblationMode::Uniform ? "uniform" : "tissue_specific"; }

/// Whether a cell exists at all: lesion switch needs the lesion region.
inline bool ablation_cell_applicable(AblationRow r, AblationMode m) {
  return !(r == AblationRow::LesionSwitch && m == AblationMode::Uniform);
}

/// The base config restricted to one row's augmentations in one mode.
inline augment::AugmentConfig ablation_augment(const augment::AugmentConfig& base, AblationRow row, AblationMode mode) {
  require(ablation_cell_applicable(row, mode), "ablation: lesion switch has no uniform variant");
  auto c = augment::AugmentConfig::none();
  c.scale_shift = base.scale_shift;
  c.mix = base.mix;
  c.uniform = mode == AblationMode::Uniform;
  switch (row) {
    case AblationRow::NoAugs: break;
    case AblationRow::ScaleShift:
      c.scale = base.scale;
      c.shift = base.shift;
      break;
    case AblationRow::LesionSwitch: c.lesion_switch = base.lesion_switch; break;
    case AblationRow::MixUp: c.mixup = base.mixup; break;
    case AblationRow::Inversion: c.inversion = base.inversion; break;
    case AblationRow::Combination:
      c.lesion_switch = base.lesion_switch;
      c.inversion = base.inversion;
      c.mixup = base.mixup;
      c.scale = base.scale;
      c.shift = base.shift;
      break;
  }
  return c;
}

struct AblationCell {
  AblationRow row;
  AblationMode mode;
  std::optional<DatasetScore> score;  // nullopt: N/A
};

struct AblationTable {
  std::vector<AblationCell> cells;  // row-major over kAblationRows x kAblationModes
  std::size_t trained_models = 0;

  const AblationCell& cell(AblationRow r, AblationMode m) const {
    for (auto& c : cells)
      if (c.row == r && c.mode == m) return c;
    throw ValidationError("ablation: no such cell");
  }
};

/// Trains and scores every applicable cell. "No Augs" is the same model in both
/// modes, so it is trained once. `data` is the prepared training collection and
/// `heldout` the raw evaluation dataset; cells are scored on its "used" scenario.
inline AblationTable ablation_run(const ExperimentConfig& base, const DatasetCollection& data, const Dataset& heldout,
                                  const Assignments& assign = {},
                                  const std::function<void(AblationRow, AblationMode)>& on_cell = {}) {
  base.validate();
  require(nn::has_agnostic(base.variant), "ablation: base variant must have an agnostic slot");
  AblationTable table;
  std::optional<DatasetScore> no_augs;
  for (auto row : kAblationRows)
    for (auto mode : kAblationModes) {
      AblationCell cell{row, mode, std::nullopt};
      if (!ablation_cell_applicable(row, mode)) {
        table.cells.push_back(cell);
        continue;
      }
      if (row == AblationRow::NoAugs && no_augs) {
        cell.score = no_augs;
        table.cells.push_back(cell);
        continue;
      }
      if (on_cell) on_cell(row, mode);
      ExperimentConfig cfg = base;
      cfg.augment = ablation_augment(base.augment, row, mode);
      const auto trained = train(cfg, data);
      ++table.trained_models;
      const auto plans = make_plan_pair(trained.checkpoint.layout, heldout.descriptor.modalities, assign, true);
      require(plans.used.has_value(), "ablation: held-out dataset has no unseen modality");
      cell.score = evaluate(trained.checkpoint, heldout, plans, cfg.crop);
      if (row == AblationRow::NoAugs) no_augs = cell.score;
      table.cells.push_back(cell);
    }
  return table;
}

inline json ablation_json(const AblationTable& t) {
  json rows = json::array();
  for (auto& c : t.cells)
    rows.push_back({{"row", std::string(to_string(c.row))},
                    {"mode", std::string(to_string(c.mode))},
                    {"applicable", c.score.has_value()},
                    {"mean_used", c.score && c.score->mean_used ? json(*c.score->mean_used) : json(nullptr)},
                    {"mean_not_used", c.score ? json(c.score->mean_not_used) : json(nullptr)}});
  return {{"cells", rows}, {"trained_models", t.trained_models}};
}

/// Dice (%) with the unseen modality in the agnostic slot.
inline std::string ablation_table(const AblationTable& t) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %16s %10s\n", "", "tissue_specific", "uniform");
  out += line;
  for (auto row : kAblationRows) {
    auto cell_str = [&](AblationMode m) {
      const auto& c = t.cell(row, m);
      return c.score ? fmt_dice(c.score->mean_used) : std::string("N/A");
    };
    std::snprintf(line, sizeof line, "%-16s %16s %10s\n", std::string(to_string(row)).c_str(),
                  cell_str(AblationMode::TissueSpecific).c_str(), cell_str(AblationMode::Uniform).c_str());
    out += line;
  }
  return out;
}

}  // namespace mavseg::harness
