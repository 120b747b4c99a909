// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Model input assembly. Every known modality owns a fixed specific channel;
// absent or dropped modalities are zero-filled. An optional agnostic channel,
// always last, receives synthesized modalities during training and an unseen
// modality at inference.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mavseg/augment/augment.hpp"
#include "mavseg/rng.hpp"
#include "mavseg/volume/dataset.hpp"

namespace mavseg::routing {

struct ChannelLayout {
  std::vector<std::string> specific;
  bool has_agnostic = false;

  std::size_t channel_count() const { return specific.size() + (has_agnostic ? 1 : 0); }
  std::size_t agnostic_index() const {
    require(has_agnostic, "layout has no agnostic channel");
    return specific.size();
  }
  std::optional<std::size_t> index_of(const std::string& modality) const {
    auto it = std::find(specific.begin(), specific.end(), modality);
    if (it == specific.end()) return std::nullopt;
    return static_cast<std::size_t>(it - specific.begin());
  }
  bool operator==(const ChannelLayout&) const = default;

  void validate() const {
    std::set<std::string> s(specific.begin(), specific.end());
    require(s.size() == specific.size(), "channel layout: duplicate modality names");
  }
};

/// Union of every dataset's modalities in first-declaration order.
inline ChannelLayout build_layout(const std::vector<std::vector<std::string>>& modality_sets, bool with_agnostic) {
  require(!modality_sets.empty(), "build_layout: empty collection");
  ChannelLayout l;
  l.has_agnostic = with_agnostic;
  for (auto& set : modality_sets)
    for (auto& m : set)
      if (!l.index_of(m)) l.specific.push_back(m);
  return l;
}

inline ChannelLayout build_layout(const DatasetCollection& collection, bool with_agnostic) {
  std::vector<std::vector<std::string>> sets;
  for (auto& d : collection.datasets) sets.push_back(d.descriptor.modalities);
  return build_layout(sets, with_agnostic);
}

struct DropoutPolicy {
  double p_drop = 0.5;                          // default for modalities not in overrides
  std::map<std::string, double> p_drop_by_modality;
  bool guarantee_one_retained = true;
  double p_agn_fill = 0.5;

  double drop_probability(const std::string& m) const {
    auto it = p_drop_by_modality.find(m);
    return it == p_drop_by_modality.end() ? p_drop : it->second;
  }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    require(prob(p_drop) && prob(p_agn_fill), "dropout policy: probability out of [0,1]");
    for (auto& [m, p] : p_drop_by_modality) require(prob(p), "dropout policy: probability out of [0,1] for " + m);
  }
};

struct DropoutResult {
  std::vector<std::string> retained;
  std::vector<std::string> dropped;
  std::optional<std::string> restored;  // set when the guarantee brought one modality back
};

/// Drops each present modality independently. present is processed in the given order.
inline DropoutResult apply_dropout(const std::vector<std::string>& present, const DropoutPolicy& policy, Rng& rng) {
  require(!present.empty(), "apply_dropout: no modalities present");
  policy.validate();
  DropoutResult r;
  std::vector<bool> drop(present.size());
  for (std::size_t i = 0; i < present.size(); ++i) drop[i] = bernoulli(rng, policy.drop_probability(present[i]));
  if (policy.guarantee_one_retained && std::all_of(drop.begin(), drop.end(), [](bool d) { return d; })) {
    const std::size_t keep = uniform_index(rng, present.size());
    drop[keep] = false;
    r.restored = present[keep];
  }
  for (std::size_t i = 0; i < present.size(); ++i) (drop[i] ? r.dropped : r.retained).push_back(present[i]);
  return r;
}

enum class ChannelKind { Modality, Zeroed, Agnostic };

struct ChannelTag {
  ChannelKind kind = ChannelKind::Zeroed;
  std::string modality;                        // Modality: the volume placed; Agnostic: the source
  std::optional<augment::AugPipelineSpec> spec;  // Agnostic during training
  bool operator==(const ChannelTag&) const = default;
};

/// C channels of one spatial grid, channel-major, each channel x-fastest.
struct InputAssembly {
  Dims dims;
  std::vector<float> channels;
  std::vector<ChannelTag> provenance;

  std::size_t channel_count() const { return provenance.size(); }
  float* channel(std::size_t c) { return channels.data() + c * dims.count(); }
  const float* channel(std::size_t c) const { return channels.data() + c * dims.count(); }

  bool channel_is_zero(std::size_t c) const {
    const float* p = channel(c);
    return std::all_of(p, p + dims.count(), [](float v) { return v == 0.0f; });
  }
  bool channel_equals(std::size_t c, const VoxelGrid& g) const {
    return g.dims() == dims && std::equal(g.data().begin(), g.data().end(), channel(c));
  }

  static InputAssembly zeros(const Dims& d, std::size_t count) {
    InputAssembly a;
    a.dims = d;
    a.channels.assign(count * d.count(), 0.0f);
    a.provenance.resize(count);
    return a;
  }

  void place(std::size_t c, const VoxelGrid& g, ChannelTag tag) {
    require_same_dims(g.dims(), dims, "InputAssembly::place");
    std::copy(g.data().begin(), g.data().end(), channel(c));
    provenance[c] = std::move(tag);
  }
};

/// Modality-specific channels for the retained set; everything else zero.
/// Adds a zeroed agnostic slot when the layout has one.
inline InputAssembly assemble_standard(const Case& c, const ChannelLayout& layout,
                                       const std::vector<std::string>& retained) {
  for (auto& m : c.modalities())
    require(layout.index_of(m).has_value(), "assemble_standard: modality " + m + " missing from layout");
  auto a = InputAssembly::zeros(c.dims(), layout.channel_count());
  for (auto& m : retained) {
    require(c.has(m), "assemble_standard: retained modality " + m + " not in case " + c.id);
    a.place(*layout.index_of(m), c.volume(m), {ChannelKind::Modality, m, std::nullopt});
  }
  return a;
}

/// Training assembly for agnostic variants: with probability p_agn_fill, and
/// only when something was dropped, the agnostic channel gets a synthesized
/// modality built from one uniformly chosen dropped modality, with retained
/// modalities as MixUp / LesionSwitch partners.
inline InputAssembly assemble_agnostic_train(const Case& c, const ChannelLayout& layout, const DropoutResult& dropout,
                                             const augment::AugmentConfig& config, const DropoutPolicy& policy,
                                             Rng& rng) {
  require(layout.has_agnostic, "assemble_agnostic_train: layout lacks an agnostic channel");
  auto a = assemble_standard(c, layout, dropout.retained);
  const std::size_t agn = layout.agnostic_index();
  a.provenance[agn] = {ChannelKind::Zeroed, {}, std::nullopt};
  if (dropout.dropped.empty() || !bernoulli(rng, policy.p_agn_fill)) return a;

  const std::string& source = dropout.dropped[uniform_index(rng, dropout.dropped.size())];
  auto spec = augment::sample_pipeline(config, rng);
  if (spec.needs_partner() && dropout.retained.empty()) {
    // No partner to draw from; keep only steps that work on the source alone.
    std::erase_if(spec.steps, [](const augment::AugStep& s) {
      return s.id == augment::AugId::MixUp || s.id == augment::AugId::LesionSwitch;
    });
  }
  auto syn = augment::synthesize_modality(c, source, dropout.retained, spec);
  a.place(agn, syn.grid, {ChannelKind::Agnostic, source, std::move(syn.spec)});
  return a;
}

/// Inference-time channel assignment. Seen modalities map to their specific
/// channel; at most one unseen modality goes to the agnostic slot.
struct AssignmentPlan {
  std::map<std::string, std::size_t> specific;
  std::optional<std::string> agnostic;

  bool operator==(const AssignmentPlan&) const = default;

  void validate(const ChannelLayout& layout) const {
    std::set<std::size_t> used;
    for (auto& [m, idx] : specific) {
      require(idx < layout.specific.size(), "assignment: channel index out of range for " + m);
      require(used.insert(idx).second, "assignment: two modalities assigned to channel " + std::to_string(idx));
    }
    if (agnostic) {
      require(layout.has_agnostic, "assignment: unseen modality " + *agnostic + " assigned but layout lacks an agnostic channel");
      require(specific.count(*agnostic) == 0, "assignment: modality " + *agnostic + " assigned twice");
    }
  }

  /// The same plan with the agnostic assignment removed.
  AssignmentPlan without_agnostic() const { return {specific, std::nullopt}; }
};

/// Default plan: every modality of the case known to the layout goes to its own
/// channel, except those listed in `exclude`.
inline AssignmentPlan default_plan(const std::vector<std::string>& modalities, const ChannelLayout& layout,
                                   const std::set<std::string>& exclude = {}) {
  AssignmentPlan p;
  for (auto& m : modalities)
    if (auto idx = layout.index_of(m); idx && !exclude.count(m)) p.specific[m] = *idx;
  return p;
}

inline InputAssembly assemble_inference(const Case& c, const ChannelLayout& layout, const AssignmentPlan& plan) {
  plan.validate(layout);
  auto a = InputAssembly::zeros(c.dims(), layout.channel_count());
  for (auto& [m, idx] : plan.specific) a.place(idx, c.volume(m), {ChannelKind::Modality, m, std::nullopt});
  if (plan.agnostic) a.place(layout.agnostic_index(), c.volume(*plan.agnostic), {ChannelKind::Agnostic, *plan.agnostic, std::nullopt});
  return a;
}

/// Shuffle baseline: present modalities go to a uniformly random injective
/// assignment over the specific channels.
inline InputAssembly assemble_shuffle(const Case& c, const ChannelLayout& layout, Rng& rng,
                                      std::optional<std::vector<std::string>> modalities = std::nullopt) {
  const auto present = modalities ? *modalities : c.modalities();
  require(!present.empty(), "assemble_shuffle: no modalities present");
  require(present.size() <= layout.specific.size(), "assemble_shuffle: more modalities than channels");
  std::vector<std::size_t> slots(layout.specific.size());
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
  shuffle(slots, rng);
  auto a = InputAssembly::zeros(c.dims(), layout.channel_count());
  for (std::size_t i = 0; i < present.size(); ++i)
    a.place(slots[i], c.volume(present[i]), {ChannelKind::Modality, present[i], std::nullopt});
  return a;
}

inline InputAssembly assemble_single(const Case& c, const std::string& modality) {
  require(c.has(modality), "assemble_single: modality " + modality + " absent from case " + c.id);
  auto a = InputAssembly::zeros(c.dims(), 1);
  a.place(0, c.volume(modality), {ChannelKind::Modality, modality, std::nullopt});
  return a;
}

}  // namespace mavseg::routing
