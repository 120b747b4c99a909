// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Synthetic brain phantoms: an ellipsoidal brain with a central csf-like
// ventricle, white-like core and gray-like rim, plus blob lesions in the
// interior. Each modality profile maps tissue classes to intensities.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mavseg/rng.hpp"
#include "mavseg/volume/manifest.hpp"
#include "mavseg/volume/mvol.hpp"

namespace mavseg::phantom {

enum Tissue : std::int32_t { Background = 0, Csf = 1, Gray = 2, White = 3 };

struct IntRange {
  std::size_t lo = 0, hi = 0;
};

struct RealRange {
  double lo = 0, hi = 0;
};

struct PhantomSpec {
  Dims dims{24, 24, 24};
  Spacing spacing{};
  IntRange lesion_count{1, 3};
  RealRange lesion_radius{1.5, 3.0};  // voxels
  double noise_sigma = 0.05;
  double bias_strength = 0.1;     // peak relative deviation of the multiplicative field
  double bias_smoothness = 1.0;   // field wavelengths across the volume
  double brain_fill = 0.8;        // brain semi-axes relative to half the grid
  double shape_jitter = 0.06;     // relative amplitude of the radial perturbation

  void validate() const {
    require(dims.nx >= 8 && dims.ny >= 8 && dims.nz >= 8, "phantom: grid must be at least 8^3");
    require(lesion_count.lo <= lesion_count.hi, "phantom: empty lesion count range");
    require(lesion_radius.lo > 0 && lesion_radius.lo <= lesion_radius.hi, "phantom: invalid lesion radius range");
    require(noise_sigma >= 0, "phantom: noise sigma must be >= 0");
    require(bias_strength >= 0 && bias_strength < 1, "phantom: bias strength must be in [0,1)");
    require(bias_smoothness > 0, "phantom: bias smoothness must be > 0");
    require(brain_fill > 0 && brain_fill < 1, "phantom: brain_fill must be in (0,1)");
    require(shape_jitter >= 0 && shape_jitter < 0.2, "phantom: shape_jitter must be in [0,0.2)");
  }
};

struct ModalityProfile {
  std::string name;
  std::array<double, 4> tissue_means{0, 0, 0, 0};  // background, csf, gray, white
  double lesion_offset = 0;
  bool lesion_visible = true;

  void validate() const {
    require(!name.empty(), "profile: empty name");
    require(tissue_means[0] == 0, "profile " + name + ": background mean must be 0");
  }
};

inline nlohmann::json profile_json(const ModalityProfile& p) {
  return {{"name", p.name},
          {"tissue_means", p.tissue_means},
          {"lesion_offset", p.lesion_offset},
          {"lesion_visible", p.lesion_visible}};
}

inline ModalityProfile profile_from_json(const nlohmann::json& j) {
  ModalityProfile p;
  try {
    p.name = j.at("name").get<std::string>();
    const auto means = j.at("tissue_means").get<std::vector<double>>();
    require(means.size() == 4, "profile " + p.name + ": tissue_means needs 4 values");
    std::copy(means.begin(), means.end(), p.tissue_means.begin());
    p.lesion_offset = j.at("lesion_offset").get<double>();
    p.lesion_visible = j.at("lesion_visible").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

/// Accepts a bare array of profiles or {"profiles": [...]}. Names must be unique.
inline std::vector<ModalityProfile> profiles_from_json(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_object() && j.contains("profiles") ? j.at("profiles") : j;
  require(arr.is_array() && !arr.empty(), "profiles: expected a nonempty array");
  std::vector<ModalityProfile> out;
  std::set<std::string> names;
  for (auto& p : arr) {
    out.push_back(profile_from_json(p));
    require(names.insert(out.back().name).second, "profiles: duplicate name " + out.back().name);
  }
  return out;
}

inline std::vector<ModalityProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open profiles file " + path.string());
  try {
    return profiles_from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("profiles " + path.string() + ": " + e.what());
  }
}

/// Lesion faintly visible (T1-like ordering).
inline ModalityProfile profile_p1() { return {"P1", {0.0, 0.3, 0.6, 0.9}, -0.08, true}; }
/// Lesion invisible (T2-like ordering).
inline ModalityProfile profile_p2() { return {"P2", {0.0, 1.0, 0.7, 0.5}, 0.0, false}; }
/// Lesion high-contrast relative to P1, but within the lesion contrast range
/// that scale/shift augmentation produces; never used for training.
inline ModalityProfile profile_p3() { return {"P3", {0.0, 0.8, 0.5, 0.4}, 0.12, true}; }

inline std::vector<ModalityProfile> train_profiles() { return {profile_p1(), profile_p2()}; }
inline ModalityProfile unseen_profile() { return profile_p3(); }

struct Anatomy {
  LabelGrid tissue;
  MaskGrid brain_mask;
  MaskGrid lesion_mask;
};

namespace detail {

struct Wave {
  std::array<double, 3> dir;
  double freq, phase, amp;
};

inline std::array<double, 3> random_direction(Rng& rng) {
  for (;;) {
    std::array<double, 3> v{normal(rng), normal(rng), normal(rng)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-9) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

/// Smooth radial perturbation on the unit sphere, bounded by `amp`.
inline std::vector<Wave> radial_waves(Rng& rng, double amp) {
  std::vector<Wave> w;
  for (int i = 0; i < 3; ++i) w.push_back({random_direction(rng), uniform(rng, 1.0, 3.0), uniform(rng, 0, 2 * std::numbers::pi), amp / 3});
  return w;
}

inline double wave_sum(const std::vector<Wave>& ws, const std::array<double, 3>& u) {
  double s = 0;
  for (auto& w : ws) s += w.amp * std::cos(w.freq * (w.dir[0] * u[0] + w.dir[1] * u[1] + w.dir[2] * u[2]) + w.phase);
  return s;
}

/// Normalized radius of point q in an ellipsoid with perturbed boundary.
inline double perturbed_radius(const std::array<double, 3>& q, const std::vector<Wave>& ws) {
  const double r = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
  if (r < 1e-12) return 0;
  return r / (1.0 + wave_sum(ws, {q[0] / r, q[1] / r, q[2] / r}));
}

}  // namespace detail

/// Ellipsoidal brain with concentric tissue shells; 0..k lesion blobs inside.
inline Anatomy gen_anatomy(const PhantomSpec& spec, Rng& rng) {
  spec.validate();
  const Dims d = spec.dims;
  const std::array<double, 3> centre{(d.nx - 1) / 2.0, (d.ny - 1) / 2.0, (d.nz - 1) / 2.0};
  // Largest semi-axis that keeps the perturbed surface one voxel off the border.
  std::array<double, 3> semi{};
  for (int a = 0; a < 3; ++a) {
    const double room = (d[a] - 1) / 2.0 - 1.0;
    semi[a] = room * spec.brain_fill * uniform(rng, 0.92, 1.0);
    semi[a] = std::min(semi[a], room / (1.0 + spec.shape_jitter));
  }
  const auto outer = detail::radial_waves(rng, spec.shape_jitter);
  const auto inner = detail::radial_waves(rng, spec.shape_jitter);
  const double ventricle = uniform(rng, 0.22, 0.3);
  const double cortex = uniform(rng, 0.7, 0.78);

  const double min_semi = std::min({semi[0], semi[1], semi[2]});
  require(spec.lesion_radius.hi <= 0.45 * min_semi,
          "phantom: lesion radius " + std::to_string(spec.lesion_radius.hi) + " cannot fit inside a brain of semi-axis " +
              std::to_string(min_semi));

  Anatomy an{{d, std::vector<std::int32_t>(d.count(), Background)}, MaskGrid(d), MaskGrid(d)};
  std::vector<double> rho(d.count(), 2.0);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::array<double, 3> q{(x - centre[0]) / semi[0], (y - centre[1]) / semi[1], (z - centre[2]) / semi[2]};
        const double r = detail::perturbed_radius(q, outer);
        const std::size_t i = d.index(x, y, z);
        rho[i] = r;
        if (r > 1.0) continue;
        an.brain_mask.set(i, true);
        if (detail::perturbed_radius(q, inner) < ventricle)
          an.tissue.data[i] = Csf;
        else
          an.tissue.data[i] = r > cortex ? Gray : White;
      }

  const std::size_t count =
      spec.lesion_count.lo + uniform_index(rng, spec.lesion_count.hi - spec.lesion_count.lo + 1);
  // Lesion centres sit in the interior band outside the ventricle.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < d.count(); ++i)
    if (an.brain_mask[i] && an.tissue.data[i] != Csf && rho[i] < 0.6) candidates.push_back(i);
  require(count == 0 || !candidates.empty(), "phantom: no room for lesions");
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t ci = candidates[uniform_index(rng, candidates.size())];
    const double cx = static_cast<double>(ci % d.nx), cy = static_cast<double>((ci / d.nx) % d.ny),
                 cz = static_cast<double>(ci / (d.nx * d.ny));
    const double r = uniform(rng, spec.lesion_radius.lo, spec.lesion_radius.hi);
    const std::array<double, 3> ax{r * uniform(rng, 0.8, 1.25), r * uniform(rng, 0.8, 1.25), r * uniform(rng, 0.8, 1.25)};
    const auto blob = detail::radial_waves(rng, 0.15);
    const auto lo = [&](double c, double a) { return static_cast<std::size_t>(std::max(0.0, std::floor(c - a * 1.2))); };
    const auto hi = [&](double c, double a, std::size_t n) {
      return static_cast<std::size_t>(std::min(static_cast<double>(n - 1), std::ceil(c + a * 1.2)));
    };
    for (std::size_t z = lo(cz, ax[2]); z <= hi(cz, ax[2], d.nz); ++z)
      for (std::size_t y = lo(cy, ax[1]); y <= hi(cy, ax[1], d.ny); ++y)
        for (std::size_t x = lo(cx, ax[0]); x <= hi(cx, ax[0], d.nx); ++x) {
          const std::size_t i = d.index(x, y, z);
          if (!an.brain_mask[i]) continue;
          const std::array<double, 3> q{(x - cx) / ax[0], (y - cy) / ax[1], (z - cz) / ax[2]};
          if (detail::perturbed_radius(q, blob) <= 1.0) an.lesion_mask.set(i, true);
        }
  }
  return an;
}

/// (tissue mean + visible lesion offset) * bias field + noise; background stays 0.
inline VoxelGrid render_modality(const Anatomy& an, const ModalityProfile& profile, const PhantomSpec& spec, Rng& rng) {
  profile.validate();
  const Dims d = an.tissue.dims;
  require_same_dims(an.brain_mask.dims(), d, "render_modality");
  require_same_dims(an.lesion_mask.dims(), d, "render_modality");
  std::vector<detail::Wave> bias;
  for (int i = 0; i < 3; ++i)
    bias.push_back({detail::random_direction(rng), 2 * std::numbers::pi * spec.bias_smoothness,
                    uniform(rng, 0, 2 * std::numbers::pi), spec.bias_strength / 3});
  VoxelGrid out(d, spec.spacing);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        const auto t = an.tissue.data[i];
        require(t >= Background && t <= White, "render_modality: invalid tissue label");
        if (t == Background) continue;
        double v = profile.tissue_means[static_cast<std::size_t>(t)];
        if (profile.lesion_visible && an.lesion_mask[i]) v += profile.lesion_offset;
        if (spec.bias_strength > 0) {
          const std::array<double, 3> u{x / double(d.nx), y / double(d.ny), z / double(d.nz)};
          v *= 1.0 + detail::wave_sum(bias, u);
        }
        if (spec.noise_sigma > 0) v += spec.noise_sigma * normal(rng);
        out[i] = static_cast<float>(v);
      }
  return out;
}

struct SplitFractions {
  double train = 0.8;
  double test = 0.2;
};

/// Renders `case_count` cases into `out_dir` and writes the manifest. Case i
/// draws its anatomy and each modality from seeds derived from (seed, i).
inline DatasetDescriptor gen_dataset(const std::string& name, const PhantomSpec& spec,
                                     const std::vector<ModalityProfile>& profiles, std::size_t case_count,
                                     SplitFractions split, const std::filesystem::path& out_dir, std::uint64_t seed) {
  spec.validate();
  require(!profiles.empty(), "gen_dataset: no profiles");
  require(case_count >= 1, "gen_dataset: case count must be >= 1");
  require(split.train >= 0 && split.test >= 0 && std::abs(split.train + split.test - 1.0) < 1e-9,
          "gen_dataset: split fractions must be >= 0 and sum to 1");
  std::set<std::string> names;
  for (auto& p : profiles) {
    p.validate();
    require(names.insert(p.name).second, "gen_dataset: duplicate profile " + p.name);
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetDescriptor desc;
  desc.name = name;
  desc.root = out_dir;
  for (auto& p : profiles) desc.modalities.push_back(p.name);
  for (std::size_t i = 0; i < case_count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "case%03zu", i);
    const std::filesystem::path rel(id);
    std::filesystem::create_directories(out_dir / rel);
    Rng arng = make_rng(seed, {i, 0});
    const Anatomy an = gen_anatomy(spec, arng);
    CaseRef ref{id, {}, (rel / "lesion.mvol").string(), (rel / "brain.mvol").string(), (rel / "label.mvol").string()};
    for (std::size_t m = 0; m < profiles.size(); ++m) {
      Rng mrng = make_rng(seed, {i, 1 + m});
      const auto file = (rel / (profiles[m].name + ".mvol")).string();
      mvol::write_volume(render_modality(an, profiles[m], spec, mrng), out_dir / file);
      ref.volumes[profiles[m].name] = file;
    }
    mvol::write_mask(an.lesion_mask, out_dir / ref.lesion_mask, spec.spacing);
    mvol::write_mask(an.brain_mask, out_dir / ref.brain_mask, spec.spacing);
    mvol::write_mask(an.lesion_mask, out_dir / ref.label, spec.spacing);
    desc.cases.push_back(std::move(ref));
  }

  std::vector<std::string> ids;
  for (auto& c : desc.cases) ids.push_back(c.id);
  Rng srng = make_rng(seed, {~std::uint64_t{0}});
  shuffle(ids, srng);
  const auto n_train = static_cast<std::size_t>(std::lround(split.train * static_cast<double>(case_count)));
  desc.split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  desc.split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(desc.split.train.begin(), desc.split.train.end());
  std::sort(desc.split.test.begin(), desc.split.test.end());
  desc.validate();
  write_manifest(desc, out_dir);
  return desc;
}

}  // namespace mavseg::phantom
