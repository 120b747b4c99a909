// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Synthetic modality generation. A pipeline is an ordered subsequence of
//
//   LesionSwitch -> Inversion -> MixUp -> Scale -> Shift
//
// where each step is applied to the lesion region, the healthy brain region
// (brain AND NOT lesion), or the whole volume. Masks and labels are never
// modified; only intensities change.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "mavseg/rng.hpp"
#include "mavseg/volume/dataset.hpp"
#include "mavseg/volume/grid.hpp"

namespace mavseg::augment {

enum class AugId { LesionSwitch = 0, Inversion = 1, MixUp = 2, Scale = 3, Shift = 4 };
inline constexpr std::array<AugId, 5> kCanonicalOrder = {AugId::LesionSwitch, AugId::Inversion, AugId::MixUp,
                                                         AugId::Scale, AugId::Shift};

enum class Region { Lesion, Brain, Uniform };

inline std::string_view to_string(AugId id) {
  switch (id) {
    case AugId::LesionSwitch: return "lesion_switch";
    case AugId::Inversion: return "inversion";
    case AugId::MixUp: return "mixup";
    case AugId::Scale: return "scale";
    case AugId::Shift: return "shift";
  }
  return "?";
}

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::Lesion: return "lesion";
    case Region::Brain: return "brain";
    case Region::Uniform: return "uniform";
  }
  return "?";
}

inline Region region_from_string(std::string_view s) {
  if (s == "lesion") return Region::Lesion;
  if (s == "brain") return Region::Brain;
  if (s == "uniform") return Region::Uniform;
  throw ValidationError("unknown region '" + std::string(s) + "'");
}

inline AugId aug_from_string(std::string_view s) {
  for (auto id : kCanonicalOrder)
    if (to_string(id) == s) return id;
  throw ValidationError("unknown augmentation '" + std::string(s) + "'");
}

struct Range {
  double lo = 0.0, hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct ScaleShiftParams {
  Range scale{0.5, 2.0};   // alpha, multiplicative
  Range shift{-0.5, 0.5};  // beta, additive
  bool operator==(const ScaleShiftParams&) const = default;
};

struct MixUpParams {
  Range lambda{0.2, 0.8};
  bool operator==(const MixUpParams&) const = default;
};

/// Activation probabilities for one augmentation on each tissue region.
struct RegionProbs {
  double lesion = 0.5;
  double brain = 0.5;
  bool operator==(const RegionProbs&) const = default;
};

struct AugmentConfig {
  double lesion_switch = 0.5;  // lesion region only
  RegionProbs inversion;
  RegionProbs mixup;
  RegionProbs scale;
  RegionProbs shift;
  // Whole-volume application at probability max(lesion, brain); LesionSwitch is
  // not applicable in this mode.
  bool uniform = false;
  ScaleShiftParams scale_shift;
  MixUpParams mix;

  bool operator==(const AugmentConfig&) const = default;

  static AugmentConfig none() {
    AugmentConfig c;
    c.lesion_switch = 0;
    c.inversion = c.mixup = c.scale = c.shift = {0, 0};
    return c;
  }

  RegionProbs probs(AugId id) const {
    switch (id) {
      case AugId::LesionSwitch: return {lesion_switch, 0.0};
      case AugId::Inversion: return inversion;
      case AugId::MixUp: return mixup;
      case AugId::Scale: return scale;
      case AugId::Shift: return shift;
    }
    return {};
  }

  void validate() const {
    auto prob = [](double p, const char* what) {
      require(p >= 0.0 && p <= 1.0, std::string("augment config: probability out of [0,1] for ") + what);
    };
    prob(lesion_switch, "lesion_switch");
    for (auto id : {AugId::Inversion, AugId::MixUp, AugId::Scale, AugId::Shift}) {
      prob(probs(id).lesion, std::string(to_string(id)).c_str());
      prob(probs(id).brain, std::string(to_string(id)).c_str());
    }
    require(scale_shift.scale.lo <= scale_shift.scale.hi, "augment config: empty scale range");
    require(scale_shift.shift.lo <= scale_shift.shift.hi, "augment config: empty shift range");
    require(0.0 <= mix.lambda.lo && mix.lambda.lo <= mix.lambda.hi && mix.lambda.hi <= 1.0,
            "augment config: lambda range must satisfy 0 <= lo <= hi <= 1");
  }
};

/// One region application of a step with its concrete parameters. Only the
/// fields relevant to the step's augmentation are meaningful.
struct Application {
  Region region = Region::Uniform;
  double alpha = 1.0;      // Scale
  double beta = 0.0;       // Shift
  double lambda = 1.0;     // MixUp
  double partner_u = 0.0;  // MixUp / LesionSwitch: partner = floor(u * pool size)

  bool operator==(const Application&) const = default;
};

/// An augmentation with one or two region applications (lesion before brain).
struct AugStep {
  AugId id;
  std::vector<Application> applications;
  bool operator==(const AugStep&) const = default;
};

struct AugPipelineSpec {
  std::vector<AugStep> steps;

  std::size_t k() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  bool needs_partner() const {
    return std::any_of(steps.begin(), steps.end(),
                       [](const AugStep& s) { return s.id == AugId::MixUp || s.id == AugId::LesionSwitch; });
  }
  bool operator==(const AugPipelineSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Single operations

namespace detail {

struct RegionView {
  Region region;
  const MaskGrid& lesion;
  const MaskGrid& brain;

  bool contains(std::size_t i) const {
    switch (region) {
      case Region::Lesion: return lesion[i];
      case Region::Brain: return brain[i] && !lesion[i];
      case Region::Uniform: return true;
    }
    return false;
  }
};

inline void check_masks(const VoxelGrid& g, const MaskGrid& lesion, const MaskGrid& brain, const char* op) {
  require_same_dims(g.dims(), lesion.dims(), op);
  require_same_dims(g.dims(), brain.dims(), op);
}

}  // namespace detail

/// alpha * v + beta on region voxels; others untouched.
inline VoxelGrid scale_shift(const VoxelGrid& grid, double alpha, double beta, Region region, const MaskGrid& lesion,
                             const MaskGrid& brain) {
  detail::check_masks(grid, lesion, brain, "scale_shift");
  require(std::isfinite(alpha) && std::isfinite(beta), "scale_shift: non-finite alpha/beta");
  VoxelGrid out = grid;
  detail::RegionView r{region, lesion, brain};
  for (std::size_t i = 0; i < out.size(); ++i)
    if (r.contains(i)) out[i] = static_cast<float>(alpha * static_cast<double>(grid[i]) + beta);
  return out;
}

inline VoxelGrid invert(const VoxelGrid& grid, Region region, const MaskGrid& lesion, const MaskGrid& brain) {
  detail::check_masks(grid, lesion, brain, "invert");
  VoxelGrid out = grid;
  detail::RegionView r{region, lesion, brain};
  for (std::size_t i = 0; i < out.size(); ++i)
    if (r.contains(i)) out[i] = -grid[i];
  return out;
}

/// lambda * m1 + (1 - lambda) * m2 on region voxels; m1 elsewhere.
inline VoxelGrid mixup(const VoxelGrid& m1, const VoxelGrid& m2, double lambda, Region region, const MaskGrid& lesion,
                       const MaskGrid& brain) {
  require_same_dims(m1.dims(), m2.dims(), "mixup");
  detail::check_masks(m1, lesion, brain, "mixup");
  require(lambda >= 0.0 && lambda <= 1.0, "mixup: lambda outside [0,1]");
  VoxelGrid out = m1;
  detail::RegionView r{region, lesion, brain};
  for (std::size_t i = 0; i < out.size(); ++i)
    if (r.contains(i))
      out[i] = static_cast<float>(lambda * static_cast<double>(m1[i]) + (1.0 - lambda) * static_cast<double>(m2[i]));
  return out;
}

/// Hard paste: lesion_source on lesion voxels, brain_source elsewhere.
inline VoxelGrid lesion_switch(const VoxelGrid& lesion_source, const VoxelGrid& brain_source, const MaskGrid& lesion) {
  require_same_dims(lesion_source.dims(), brain_source.dims(), "lesion_switch");
  require_same_dims(lesion_source.dims(), lesion.dims(), "lesion_switch");
  VoxelGrid out = brain_source;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (lesion[i]) out[i] = lesion_source[i];
  return out;
}

// ---------------------------------------------------------------------------
// Pipelines

inline AugPipelineSpec sample_pipeline(const AugmentConfig& config, Rng& rng) {
  config.validate();
  AugPipelineSpec spec;
  const auto& ss = config.scale_shift;
  auto draw = [&](AugId id, Region region) {
    Application a;
    a.region = region;
    switch (id) {
      case AugId::LesionSwitch: a.partner_u = uniform01(rng); break;
      case AugId::Inversion: break;
      case AugId::MixUp:
        a.lambda = uniform(rng, config.mix.lambda.lo, config.mix.lambda.hi);
        a.partner_u = uniform01(rng);
        break;
      case AugId::Scale: a.alpha = uniform(rng, ss.scale.lo, ss.scale.hi); break;
      case AugId::Shift: a.beta = uniform(rng, ss.shift.lo, ss.shift.hi); break;
    }
    return a;
  };

  for (AugId id : kCanonicalOrder) {
    const RegionProbs p = config.probs(id);
    AugStep step{id, {}};
    if (config.uniform) {
      if (id == AugId::LesionSwitch) continue;
      if (bernoulli(rng, std::max(p.lesion, p.brain))) step.applications.push_back(draw(id, Region::Uniform));
    } else {
      const bool on_lesion = bernoulli(rng, p.lesion);
      const bool on_brain = id != AugId::LesionSwitch && bernoulli(rng, p.brain);
      if (on_lesion) step.applications.push_back(draw(id, Region::Lesion));
      if (on_brain) step.applications.push_back(draw(id, Region::Brain));
    }
    if (!step.applications.empty()) spec.steps.push_back(std::move(step));
  }
  return spec;
}

/// True when the step ids form a strictly increasing subsequence of the
/// canonical order and every LesionSwitch application targets the lesion.
inline bool is_canonical(const AugPipelineSpec& spec) {
  int last = -1;
  for (auto& s : spec.steps) {
    if (static_cast<int>(s.id) <= last || s.applications.empty()) return false;
    last = static_cast<int>(s.id);
    for (auto& a : s.applications)
      if (s.id == AugId::LesionSwitch && a.region != Region::Lesion) return false;
  }
  return spec.steps.size() <= kCanonicalOrder.size();
}

inline const VoxelGrid& pick_partner(const std::vector<const VoxelGrid*>& pool, double u) {
  return *pool[std::min(pool.size() - 1, static_cast<std::size_t>(u * static_cast<double>(pool.size())))];
}

/// Applies one region application of a step.
inline VoxelGrid apply(AugId id, const Application& a, const VoxelGrid& current,
                       const std::vector<const VoxelGrid*>& partners, const MaskGrid& lesion, const MaskGrid& brain) {
  switch (id) {
    case AugId::LesionSwitch:
      require(!partners.empty(), "synthesize_modality: LesionSwitch needs a partner modality");
      return lesion_switch(current, pick_partner(partners, a.partner_u), lesion);
    case AugId::Inversion: return invert(current, a.region, lesion, brain);
    case AugId::MixUp:
      require(!partners.empty(), "synthesize_modality: MixUp needs a partner modality");
      return mixup(current, pick_partner(partners, a.partner_u), a.lambda, a.region, lesion, brain);
    case AugId::Scale: return scale_shift(current, a.alpha, 0.0, a.region, lesion, brain);
    case AugId::Shift: return scale_shift(current, 1.0, a.beta, a.region, lesion, brain);
  }
  return current;
}

struct Synthesized {
  VoxelGrid grid;
  std::string source;
  AugPipelineSpec spec;
};

/// Folds the pipeline over the source volume, left to right.
inline VoxelGrid synthesize_modality(const Case& c, const VoxelGrid& source,
                                     const std::vector<const VoxelGrid*>& partners, const AugPipelineSpec& spec) {
  require_same_dims(source.dims(), c.dims(), "synthesize_modality");
  for (auto* p : partners) require_same_dims(p->dims(), c.dims(), "synthesize_modality partner");
  if (spec.needs_partner()) require(!partners.empty(), "synthesize_modality: pipeline needs a partner modality");
  VoxelGrid cur = source;
  for (auto& step : spec.steps)
    for (auto& a : step.applications) cur = apply(step.id, a, cur, partners, c.lesion_mask, c.brain_mask);
  return cur;
}

/// Named variant: source and partners are modalities of the case.
inline Synthesized synthesize_modality(const Case& c, const std::string& source,
                                       const std::vector<std::string>& partners, const AugPipelineSpec& spec) {
  std::vector<const VoxelGrid*> pool;
  for (auto& p : partners) pool.push_back(&c.volume(p));
  return {synthesize_modality(c, c.volume(source), pool, spec), source, spec};
}

}  // namespace mavseg::augment
