// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Experiment configuration and its JSON form. Every field is optional in JSON
// and falls back to the defaults below; unknown keys are rejected.

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mavseg/augment/augment.hpp"
#include "mavseg/nn/checkpoint.hpp"
#include "mavseg/nn/optim.hpp"
#include "mavseg/routing/routing.hpp"
#include "mavseg/volume/preprocess.hpp"

namespace mavseg::harness {

using nlohmann::json;

enum class DatasetRole { Train, Heldout };

struct DatasetEntry {
  std::filesystem::path path;
  DatasetRole role = DatasetRole::Train;
};

struct ExperimentConfig {
  std::vector<DatasetEntry> datasets;
  std::vector<std::string> modality_removal;
  nn::Variant variant = nn::Variant::AgnosticPath;
  nn::UNetConfig unet;
  augment::AugmentConfig augment;
  routing::DropoutPolicy dropout;
  std::size_t epochs = 60;
  std::size_t batch_size = 2;
  Extent crop{32, 32, 32};
  nn::LrSchedule lr = nn::LrSchedule::for_epochs(60);
  double lesion_bias = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    require(!datasets.empty(), "config: no datasets");
    bool any_train = false;
    for (auto& d : datasets) any_train = any_train || d.role == DatasetRole::Train;
    require(any_train, "config: no dataset has role 'train'");
    unet.validate();
    augment.validate();
    dropout.validate();
    require(epochs >= 1, "config: epochs must be >= 1");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    const std::size_t div = unet.divisor();
    for (auto c : crop)
      require(c >= div && c % div == 0, "config: crop size " + std::to_string(c) + " must be a positive multiple of " +
                                            std::to_string(div) + " (2^(levels-1))");
    require(lr.initial > 0 && lr.final > 0, "config: learning rates must be > 0");
    require(lesion_bias >= 0 && lesion_bias <= 1, "config: lesion_bias must be in [0,1]");
  }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto& [k, _] : j.items()) require(ok.count(k) != 0, where + ": unknown field '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline json range_json(const augment::Range& r) { return json::array({r.lo, r.hi}); }
inline augment::Range range_from(const json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  require(v.size() == 2, std::string("config: ") + what + " must be [lo, hi]");
  return {v[0], v[1]};
}

inline json probs_json(const augment::RegionProbs& p) { return {{"lesion", p.lesion}, {"brain", p.brain}}; }
inline augment::RegionProbs probs_from(const json& j, augment::RegionProbs p, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), j.get<double>()};
  check_keys(j, {"lesion", "brain"}, where);
  read(j, "lesion", p.lesion);
  read(j, "brain", p.brain);
  return p;
}

}  // namespace detail

inline json augment_json(const augment::AugmentConfig& c) {
  return {{"lesion_switch", c.lesion_switch},
          {"inversion", detail::probs_json(c.inversion)},
          {"mixup", detail::probs_json(c.mixup)},
          {"scale", detail::probs_json(c.scale)},
          {"shift", detail::probs_json(c.shift)},
          {"uniform", c.uniform},
          {"scale_range", detail::range_json(c.scale_shift.scale)},
          {"shift_range", detail::range_json(c.scale_shift.shift)},
          {"lambda_range", detail::range_json(c.mix.lambda)}};
}

inline augment::AugmentConfig augment_from_json(const json& j, augment::AugmentConfig c = {}) {
  detail::check_keys(j, {"lesion_switch", "inversion", "mixup", "scale", "shift", "uniform", "scale_range", "shift_range",
                         "lambda_range"},
                     "config.augment");
  detail::read(j, "lesion_switch", c.lesion_switch);
  if (j.contains("inversion")) c.inversion = detail::probs_from(j["inversion"], c.inversion, "config.augment.inversion");
  if (j.contains("mixup")) c.mixup = detail::probs_from(j["mixup"], c.mixup, "config.augment.mixup");
  if (j.contains("scale")) c.scale = detail::probs_from(j["scale"], c.scale, "config.augment.scale");
  if (j.contains("shift")) c.shift = detail::probs_from(j["shift"], c.shift, "config.augment.shift");
  detail::read(j, "uniform", c.uniform);
  if (j.contains("scale_range")) c.scale_shift.scale = detail::range_from(j["scale_range"], "scale_range");
  if (j.contains("shift_range")) c.scale_shift.shift = detail::range_from(j["shift_range"], "shift_range");
  if (j.contains("lambda_range")) c.mix.lambda = detail::range_from(j["lambda_range"], "lambda_range");
  c.validate();
  return c;
}

inline json pipeline_json(const augment::AugPipelineSpec& spec) {
  json steps = json::array();
  for (auto& st : spec.steps) {
    json apps = json::array();
    for (auto& a : st.applications)
      apps.push_back({{"region", std::string(augment::to_string(a.region))},
                      {"alpha", a.alpha},
                      {"beta", a.beta},
                      {"lambda", a.lambda},
                      {"partner_u", a.partner_u}});
    steps.push_back({{"id", std::string(augment::to_string(st.id))}, {"applications", apps}});
  }
  return steps;
}

inline json dropout_json(const routing::DropoutPolicy& p) {
  return {{"p_drop", p.p_drop},
          {"p_drop_by_modality", p.p_drop_by_modality},
          {"guarantee_one_retained", p.guarantee_one_retained},
          {"p_agn_fill", p.p_agn_fill}};
}

inline routing::DropoutPolicy dropout_from_json(const json& j, routing::DropoutPolicy p = {}) {
  detail::check_keys(j, {"p_drop", "p_drop_by_modality", "guarantee_one_retained", "p_agn_fill"}, "config.dropout");
  detail::read(j, "p_drop", p.p_drop);
  detail::read(j, "p_drop_by_modality", p.p_drop_by_modality);
  detail::read(j, "guarantee_one_retained", p.guarantee_one_retained);
  detail::read(j, "p_agn_fill", p.p_agn_fill);
  p.validate();
  return p;
}

inline json lr_json(const nn::LrSchedule& s) {
  return {{"initial", s.initial}, {"final", s.final}, {"drop_epoch", s.drop_epoch}};
}

inline json config_json(const ExperimentConfig& c) {
  json ds = json::array();
  for (auto& d : c.datasets)
    ds.push_back({{"path", d.path.string()}, {"role", d.role == DatasetRole::Train ? "train" : "heldout"}});
  auto unet = nn::unet_json(c.unet);
  unet.erase("in_channels");
  return {{"datasets", ds},
          {"modality_removal", c.modality_removal},
          {"variant", std::string(nn::to_string(c.variant))},
          {"unet", unet},
          {"augment", augment_json(c.augment)},
          {"dropout", dropout_json(c.dropout)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"crop_size", c.crop},
          {"lr_schedule", lr_json(c.lr)},
          {"lesion_bias", c.lesion_bias},
          {"seed", c.seed}};
}

/// Parses a config document. Relative dataset paths resolve against base_dir.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  try {
    detail::check_keys(j, {"datasets", "modality_removal", "variant", "unet", "augment", "dropout", "epochs",
                           "batch_size", "crop_size", "lr_schedule", "lesion_bias", "seed"},
                       "config");
    for (auto& d : j.at("datasets")) {
      DatasetEntry e;
      if (d.is_string()) {
        e.path = d.get<std::string>();
      } else {
        detail::check_keys(d, {"path", "role"}, "config.datasets[]");
        e.path = d.at("path").get<std::string>();
        const auto role = d.value("role", std::string("train"));
        require(role == "train" || role == "heldout", "config: dataset role must be 'train' or 'heldout'");
        e.role = role == "train" ? DatasetRole::Train : DatasetRole::Heldout;
      }
      if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
      c.datasets.push_back(std::move(e));
    }
    detail::read(j, "modality_removal", c.modality_removal);
    if (j.contains("variant")) c.variant = nn::variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("unet")) {
      detail::check_keys(j["unet"], {"levels", "base_features", "out_classes", "norm"}, "config.unet");
      c.unet = nn::unet_from_json(j["unet"], c.unet);
    }
    if (j.contains("augment")) c.augment = augment_from_json(j["augment"]);
    if (j.contains("dropout")) c.dropout = dropout_from_json(j["dropout"]);
    detail::read(j, "epochs", c.epochs);
    detail::read(j, "batch_size", c.batch_size);
    if (j.contains("crop_size")) {
      const auto& cs = j["crop_size"];
      if (cs.is_number()) {
        const auto n = cs.get<std::size_t>();
        c.crop = {n, n, n};
      } else {
        const auto v = cs.get<std::vector<std::size_t>>();
        require(v.size() == 3, "config: crop_size must be a number or [x, y, z]");
        c.crop = {v[0], v[1], v[2]};
      }
    }
    c.lr = nn::LrSchedule::for_epochs(c.epochs);
    if (j.contains("lr_schedule")) {
      detail::check_keys(j["lr_schedule"], {"initial", "final", "drop_epoch", "drop_fraction"}, "config.lr_schedule");
      const auto& s = j["lr_schedule"];
      detail::read(s, "initial", c.lr.initial);
      detail::read(s, "final", c.lr.final);
      if (s.contains("drop_fraction"))
        c.lr.drop_epoch =
            static_cast<std::size_t>(std::lround(s["drop_fraction"].get<double>() * static_cast<double>(c.epochs)));
      detail::read(s, "drop_epoch", c.lr.drop_epoch);
    }
    detail::read(j, "lesion_bias", c.lesion_bias);
    detail::read(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace mavseg::harness
