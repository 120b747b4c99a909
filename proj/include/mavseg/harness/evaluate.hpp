// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Evaluation under two scenarios per dataset: the unseen modality left out
// ("not used") and the unseen modality placed in the agnostic slot ("used").

#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mavseg/harness/inference.hpp"
#include "mavseg/harness/train.hpp"

namespace mavseg::harness {

struct PlanPair {
  routing::AssignmentPlan not_used;
  std::optional<routing::AssignmentPlan> used;  // nullopt: scenario infeasible
};

/// Parsed `--assign M=<channel|agnostic>` entries; a channel is a layout index
/// or the name of a layout modality.
using Assignments = std::map<std::string, std::string>;

inline std::pair<std::string, std::string> parse_assign(const std::string& s) {
  const auto eq = s.find('=');
  require(eq != std::string::npos && eq > 0 && eq + 1 < s.size(), "--assign expects MODALITY=<channel|agnostic>, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

/// Builds both scenario plans for a dataset with the given modalities. Without an
/// explicit agnostic assignment, the single modality absent from the layout is
/// taken as the unseen one. `allow_unseen` is false for models that cannot take
/// an unseen modality at all.
inline PlanPair make_plan_pair(const routing::ChannelLayout& layout, const std::vector<std::string>& modalities,
                               const Assignments& assign, bool allow_unseen) {
  std::optional<std::string> unseen;
  std::map<std::string, std::size_t> explicit_specific;
  for (auto& [m, target] : assign) {
    require(std::find(modalities.begin(), modalities.end(), m) != modalities.end(),
            "assignment: modality " + m + " not present in dataset");
    if (target == "agnostic") {
      require(!unseen, "assignment: more than one modality assigned to the agnostic slot");
      unseen = m;
      continue;
    }
    std::optional<std::size_t> idx = layout.index_of(target);
    if (!idx) {
      try {
        std::size_t pos = 0;
        const auto v = std::stoul(target, &pos);
        require(pos == target.size(), "");
        idx = v;
      } catch (const std::exception&) {
        throw ValidationError("assignment: unknown channel '" + target + "' for " + m);
      }
    }
    require(*idx < layout.specific.size(), "assignment: channel index out of range for " + m);
    explicit_specific[m] = *idx;
  }
  if (!unseen) {
    std::vector<std::string> unknown;
    for (auto& m : modalities)
      if (!layout.index_of(m) && !explicit_specific.count(m)) unknown.push_back(m);
    require(unknown.size() <= 1, "assignment: several modalities unknown to the model; choose one with --assign M=agnostic");
    if (!unknown.empty()) unseen = unknown[0];
  }
  std::set<std::string> exclude;
  if (unseen) exclude.insert(*unseen);
  PlanPair pp;
  pp.not_used = routing::default_plan(modalities, layout, exclude);
  for (auto& [m, idx] : explicit_specific) {
    std::erase_if(pp.not_used.specific, [&](const auto& kv) { return kv.second == idx; });
    pp.not_used.specific[m] = idx;
  }
  pp.not_used.validate(layout);
  if (unseen && allow_unseen) {
    pp.used = pp.not_used;
    pp.used->agnostic = unseen;
  }
  return pp;
}

struct CaseScore {
  std::string id;
  double not_used = 0;
  std::optional<double> used;
};

struct ScenarioRun {
  double not_used = 0;
  std::optional<double> used;
};

struct DatasetScore {
  std::string name;
  std::optional<std::string> unseen;
  std::vector<CaseScore> cases;
  double mean_not_used = 0;
  std::optional<double> mean_used;
  std::vector<ScenarioRun> runs;  // shuffle baseline only
};

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<DatasetScore> datasets;
};

namespace detail {

inline void finish_means(DatasetScore& s, bool used_feasible) {
  double a = 0, b = 0;
  for (auto& c : s.cases) {
    a += c.not_used;
    if (c.used) b += *c.used;
  }
  const double n = static_cast<double>(s.cases.size());
  s.mean_not_used = s.cases.empty() ? 0 : a / n;
  if (used_feasible && !s.cases.empty()) s.mean_used = b / n;
}

inline std::optional<double> opt(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace detail

/// Training crop size recorded in the checkpoint; the sliding-window size.
inline Extent training_window(const nn::Checkpoint& ckpt) {
  if (ckpt.config.contains("crop_size")) {
    const auto v = ckpt.config["crop_size"].get<std::vector<std::size_t>>();
    require(v.size() == 3, "checkpoint: crop_size must have 3 entries");
    return {v[0], v[1], v[2]};
  }
  return {32, 32, 32};
}

/// Standard and agnostic variants. Both scenario assemblies share every
/// specific channel; they differ only in the agnostic slot.
inline DatasetScore evaluate(const nn::Checkpoint& ckpt, const Dataset& ds, const PlanPair& plans, const Extent& window) {
  require(ckpt.variant != nn::Variant::Single && ckpt.variant != nn::Variant::Shuffle,
          "evaluate: use the baseline evaluators for single / shuffle checkpoints");
  const auto model = nn::make_model<float>(ckpt);
  const auto& layout = model.layout();
  plans.not_used.validate(layout);
  const bool feasible = plans.used.has_value() && layout.has_agnostic;
  if (feasible) plans.used->validate(layout);
  DatasetScore s{ds.descriptor.name, feasible ? plans.used->agnostic : std::nullopt, {}, 0, std::nullopt, {}};
  for (auto& id : ds.eval_ids()) {
    const Case c = normalize_case(ds.get(id));
    CaseScore cs{id, 0, std::nullopt};
    const auto a0 = routing::assemble_inference(c, layout, plans.not_used);
    cs.not_used = dice_metric(threshold(c.dims(), predict_probabilities(model, a0, window)), c.label);
    if (feasible) {
      const auto a1 = routing::assemble_inference(c, layout, *plans.used);
      for (std::size_t ch = 0; ch < layout.specific.size(); ++ch)
        require(a0.provenance[ch] == a1.provenance[ch], "evaluate: scenario assemblies differ outside the agnostic slot");
      cs.used = dice_metric(threshold(c.dims(), predict_probabilities(model, a1, window)), c.label);
    }
    s.cases.push_back(std::move(cs));
  }
  detail::finish_means(s, feasible);
  return s;
}

/// Voxelwise mean of single-channel probability maps, one per modality.
inline std::vector<float> average_single_probabilities(const nn::Model<float>& model, const Case& c,
                                                       const std::vector<std::string>& modalities, const Extent& window) {
  require(!modalities.empty(), "single baseline: case " + c.id + " has no modalities");
  std::vector<double> acc(c.dims().count(), 0.0);
  for (auto& m : modalities) {
    const auto p = predict_probabilities(model, routing::assemble_single(c, m), window);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
  }
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(modalities.size()));
  return out;
}

inline DatasetScore evaluate_single_baseline(const nn::Checkpoint& ckpt, const Dataset& ds, const PlanPair& plans,
                                             const Extent& window) {
  require(ckpt.variant == nn::Variant::Single, "evaluate_single_baseline: checkpoint variant is not 'single'");
  const auto model = nn::make_model<float>(ckpt);
  std::vector<std::string> seen;
  for (auto& [m, _] : plans.not_used.specific) seen.push_back(m);
  const bool feasible = plans.used && plans.used->agnostic;
  DatasetScore s{ds.descriptor.name, feasible ? plans.used->agnostic : std::nullopt, {}, 0, std::nullopt, {}};
  for (auto& id : ds.eval_ids()) {
    const Case c = normalize_case(ds.get(id));
    CaseScore cs{id, 0, std::nullopt};
    cs.not_used = dice_metric(threshold(c.dims(), average_single_probabilities(model, c, seen, window)), c.label);
    if (feasible) {
      auto all = seen;
      all.push_back(*plans.used->agnostic);
      cs.used = dice_metric(threshold(c.dims(), average_single_probabilities(model, c, all, window)), c.label);
    }
    s.cases.push_back(std::move(cs));
  }
  detail::finish_means(s, feasible);
  return s;
}

inline constexpr std::size_t kShuffleRuns = 3;

/// Three random channel assignments; the dataset means are the mean of the
/// three per-run means, and per-case scores are averaged over runs.
inline DatasetScore evaluate_shuffle_baseline(const nn::Checkpoint& ckpt, const Dataset& ds, const PlanPair& plans,
                                              const Extent& window, Rng& rng) {
  require(ckpt.variant == nn::Variant::Shuffle, "evaluate_shuffle_baseline: checkpoint variant is not 'shuffle'");
  const auto model = nn::make_model<float>(ckpt);
  const auto& layout = model.layout();
  std::vector<std::string> seen;
  for (auto& [m, _] : plans.not_used.specific) seen.push_back(m);
  auto all = seen;
  if (plans.used && plans.used->agnostic) all.push_back(*plans.used->agnostic);
  const bool feasible = all.size() > seen.size() && all.size() <= layout.specific.size();
  DatasetScore s{ds.descriptor.name, feasible ? plans.used->agnostic : std::nullopt, {}, 0, std::nullopt, {}};
  const auto ids = ds.eval_ids();
  std::vector<Case> cases;
  for (auto& id : ids) cases.push_back(normalize_case(ds.get(id)));
  std::vector<CaseScore> per_case(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) per_case[k] = {ids[k], 0, feasible ? std::optional<double>(0.0) : std::nullopt};
  for (std::size_t run = 0; run < kShuffleRuns; ++run) {
    ScenarioRun r;
    double used_sum = 0;
    for (std::size_t k = 0; k < cases.size(); ++k) {
      const Case& c = cases[k];
      const double d0 =
          dice_metric(threshold(c.dims(), predict_probabilities(model, routing::assemble_shuffle(c, layout, rng, seen), window)), c.label);
      r.not_used += d0;
      per_case[k].not_used += d0 / kShuffleRuns;
      if (feasible) {
        const double d1 = dice_metric(
            threshold(c.dims(), predict_probabilities(model, routing::assemble_shuffle(c, layout, rng, all), window)), c.label);
        used_sum += d1;
        *per_case[k].used += d1 / kShuffleRuns;
      }
    }
    r.not_used /= static_cast<double>(cases.size());
    if (feasible) r.used = used_sum / static_cast<double>(cases.size());
    s.runs.push_back(r);
  }
  s.cases = std::move(per_case);
  double a = 0, b = 0;
  for (auto& r : s.runs) {
    a += r.not_used;
    if (r.used) b += *r.used;
  }
  s.mean_not_used = a / kShuffleRuns;
  if (feasible) s.mean_used = b / kShuffleRuns;
  return s;
}

/// Dispatches on the checkpoint variant.
inline DatasetScore evaluate_any(const nn::Checkpoint& ckpt, const Dataset& ds, const Assignments& assign, bool no_agnostic,
                                 std::uint64_t seed) {
  const bool allow_unseen = !no_agnostic && ckpt.variant != nn::Variant::Standard;
  const auto plans = make_plan_pair(ckpt.layout, ds.descriptor.modalities, assign, allow_unseen);
  const Extent window = training_window(ckpt);
  switch (ckpt.variant) {
    case nn::Variant::Single: return evaluate_single_baseline(ckpt, ds, plans, window);
    case nn::Variant::Shuffle: {
      Rng rng = make_rng(seed, {kEvalStream});
      return evaluate_shuffle_baseline(ckpt, ds, plans, window, rng);
    }
    default: return evaluate(ckpt, ds, plans, window);
  }
}

inline json score_json(const DatasetScore& s) {
  json cases = json::array();
  for (auto& c : s.cases)
    cases.push_back({{"id", c.id}, {"not_used", c.not_used}, {"used", c.used ? json(*c.used) : json(nullptr)}});
  json j = {{"name", s.name},
            {"unseen", s.unseen ? json(*s.unseen) : json(nullptr)},
            {"cases", cases},
            {"mean_not_used", s.mean_not_used},
            {"mean_used", s.mean_used ? json(*s.mean_used) : json(nullptr)}};
  if (!s.runs.empty()) {
    json runs = json::array();
    for (auto& r : s.runs) runs.push_back({{"not_used", r.not_used}, {"used", r.used ? json(*r.used) : json(nullptr)}});
    j["runs"] = runs;
  }
  return j;
}

inline DatasetScore score_from_json(const json& j) {
  DatasetScore s;
  s.name = j.at("name").get<std::string>();
  if (!j.at("unseen").is_null()) s.unseen = j["unseen"].get<std::string>();
  for (auto& c : j.at("cases")) s.cases.push_back({c.at("id").get<std::string>(), c.at("not_used").get<double>(), detail::opt(c.at("used"))});
  s.mean_not_used = j.at("mean_not_used").get<double>();
  s.mean_used = detail::opt(j.at("mean_used"));
  if (j.contains("runs"))
    for (auto& r : j["runs"]) s.runs.push_back({r.at("not_used").get<double>(), detail::opt(r.at("used"))});
  return s;
}

inline json report_json(const EvalReport& r) {
  json ds = json::array();
  for (auto& s : r.datasets) ds.push_back(score_json(s));
  return {{"variant", r.variant}, {"seed", r.seed}, {"datasets", ds}};
}

inline std::string fmt_dice(std::optional<double> v) {
  if (!v) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

/// Dice in percent; "-" marks an infeasible scenario.
inline std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  out << "variant " << r.variant << "  seed " << r.seed << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %6s %-10s %10s %10s\n", "dataset", "cases", "unseen", "not used", "used");
  out << line;
  for (auto& s : r.datasets) {
    std::snprintf(line, sizeof line, "%-20s %6zu %-10s %10s %10s\n", s.name.c_str(), s.cases.size(),
                  s.unseen ? s.unseen->c_str() : "-", fmt_dice(s.mean_not_used).c_str(), fmt_dice(s.mean_used).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace mavseg::harness
