// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mavseg/rng.hpp"
#include "mavseg/volume/dataset.hpp"
#include "mavseg/volume/grid.hpp"

namespace mavseg {

struct NormalizeResult {
  VoxelGrid grid;
  bool degenerate = false;  // masked std < 1e-6; grid is all zeros
  double mean = 0.0;
  double std = 0.0;
};

inline constexpr double kDegenerateStd = 1e-6;

/// Z-score over the masked voxels using the population standard deviation.
/// Voxels outside the mask become 0.
inline NormalizeResult zscore_normalize(const VoxelGrid& grid, const MaskGrid& mask) {
  require_same_dims(grid.dims(), mask.dims(), "zscore_normalize");
  std::size_t n = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (mask[i]) {
      sum += grid[i];
      ++n;
    }
  require(n > 0, "zscore_normalize: empty mask");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (mask[i]) {
      const double d = grid[i] - mean;
      ss += d * d;
    }
  const double sd = std::sqrt(ss / static_cast<double>(n));

  NormalizeResult r{VoxelGrid(grid.dims(), grid.spacing()), false, mean, sd};
  if (sd < kDegenerateStd) {
    r.degenerate = true;
    return r;
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (mask[i]) r.grid[i] = static_cast<float>((grid[i] - mean) / sd);
  return r;
}

/// Normalizes every modality of a case over its brain mask.
inline Case normalize_case(const Case& c, std::vector<std::string>* degenerate = nullptr) {
  Case out = c;
  for (auto& [name, grid] : out.volumes) {
    auto r = zscore_normalize(c.volume(name), c.brain_mask);
    if (r.degenerate && degenerate) degenerate->push_back(c.id + "/" + name);
    grid = std::move(r.grid);
  }
  return out;
}

namespace detail {

inline std::size_t resampled_extent(std::size_t n, float from, float to) {
  auto e = static_cast<long long>(std::llround(static_cast<double>(n) * from / to));
  return static_cast<std::size_t>(std::max(1LL, e));
}

inline Dims resampled_dims(const Dims& d, const Spacing& from, const Spacing& to) {
  require(to.sx > 0 && to.sy > 0 && to.sz > 0, "resample: target spacing must be positive");
  return {resampled_extent(d.nx, from.sx, to.sx), resampled_extent(d.ny, from.sy, to.sy),
          resampled_extent(d.nz, from.sz, to.sz)};
}

// Source coordinate of output index i; voxel 0 of both grids share an origin.
inline double source_coord(std::size_t i, float from, float to) {
  return static_cast<double>(i) * static_cast<double>(to) / static_cast<double>(from);
}

}  // namespace detail

/// Trilinear resampling onto a new voxel spacing. Samples beyond the last
/// voxel clamp to the edge.
inline VoxelGrid resample_trilinear(const VoxelGrid& grid, const Spacing& target) {
  const Dims& in = grid.dims();
  const Dims out = detail::resampled_dims(in, grid.spacing(), target);
  VoxelGrid r(out, target);

  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [&](std::size_t axis) {
    std::vector<Tap> t(out[axis]);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double c = detail::source_coord(i, grid.spacing()[axis], target[axis]);
      const double maxc = static_cast<double>(in[axis] - 1);
      const double cc = std::clamp(c, 0.0, maxc);
      const auto i0 = static_cast<std::size_t>(std::floor(cc));
      const std::size_t i1 = std::min(i0 + 1, in[axis] - 1);
      t[i] = {i0, i1, cc - static_cast<double>(i0)};
    }
    return t;
  };
  const auto tx = taps(0), ty = taps(1), tz = taps(2);
  auto lerp = [](double a, double b, double f) { return f == 0.0 ? a : a + (b - a) * f; };

  for (std::size_t z = 0; z < out.nz; ++z)
    for (std::size_t y = 0; y < out.ny; ++y)
      for (std::size_t x = 0; x < out.nx; ++x) {
        const Tap &a = tx[x], &b = ty[y], &c = tz[z];
        auto v = [&](std::size_t i, std::size_t j, std::size_t k) { return static_cast<double>(grid.at(i, j, k)); };
        const double c00 = lerp(v(a.i0, b.i0, c.i0), v(a.i1, b.i0, c.i0), a.f);
        const double c10 = lerp(v(a.i0, b.i1, c.i0), v(a.i1, b.i1, c.i0), a.f);
        const double c01 = lerp(v(a.i0, b.i0, c.i1), v(a.i1, b.i0, c.i1), a.f);
        const double c11 = lerp(v(a.i0, b.i1, c.i1), v(a.i1, b.i1, c.i1), a.f);
        const double c0 = lerp(c00, c10, b.f);
        const double c1 = lerp(c01, c11, b.f);
        r.at(x, y, z) = static_cast<float>(lerp(c0, c1, c.f));
      }
  return r;
}

/// Nearest-neighbour resampling for masks so they stay binary.
inline MaskGrid resample_nearest(const MaskGrid& mask, const Spacing& from, const Spacing& to) {
  const Dims& in = mask.dims();
  const Dims out = detail::resampled_dims(in, from, to);
  MaskGrid r(out);
  auto pick = [&](std::size_t i, std::size_t axis) {
    const double c = detail::source_coord(i, from[axis], to[axis]);
    const auto k = static_cast<long long>(std::llround(c));
    return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(in[axis]) - 1));
  };
  for (std::size_t z = 0; z < out.nz; ++z)
    for (std::size_t y = 0; y < out.ny; ++y)
      for (std::size_t x = 0; x < out.nx; ++x)
        r.set(out.index(x, y, z), mask.at(pick(x, 0), pick(y, 1), pick(z, 2)));
  return r;
}

/// Resamples every grid of a case; masks use nearest neighbour.
inline Case resample_case(const Case& c, const Spacing& target) {
  require(!c.volumes.empty(), "resample_case: case has no volumes");
  const Spacing from = c.volumes.begin()->second.spacing();
  Case out;
  out.id = c.id;
  for (auto& [name, grid] : c.volumes) out.volumes.emplace(name, resample_trilinear(grid, target));
  out.lesion_mask = resample_nearest(c.lesion_mask, from, target);
  out.brain_mask = resample_nearest(c.brain_mask, from, target);
  out.label = resample_nearest(c.label, from, target);
  return out;
}

/// Voxel is lesion iff its raw label is non-zero.
inline MaskGrid merge_labels(const LabelGrid& raw) {
  require(raw.data.size() == raw.dims.count(), "merge_labels: data length does not match dims");
  MaskGrid out(raw.dims);
  for (std::size_t i = 0; i < raw.data.size(); ++i) out.set(i, raw.data[i] != 0);
  return out;
}

using Origin = std::array<std::size_t, 3>;
using Extent = std::array<std::size_t, 3>;

inline VoxelGrid crop(const VoxelGrid& g, const Origin& o, const Extent& e) {
  VoxelGrid out(Dims{e[0], e[1], e[2]}, g.spacing());
  for (std::size_t z = 0; z < e[2]; ++z)
    for (std::size_t y = 0; y < e[1]; ++y) {
      const float* src = &g.data()[g.dims().index(o[0], o[1] + y, o[2] + z)];
      std::copy(src, src + e[0], &out.data()[out.dims().index(0, y, z)]);
    }
  return out;
}

inline MaskGrid crop(const MaskGrid& m, const Origin& o, const Extent& e) {
  const Dims d{e[0], e[1], e[2]};
  std::vector<std::uint8_t> data(d.count());
  for (std::size_t z = 0; z < e[2]; ++z)
    for (std::size_t y = 0; y < e[1]; ++y) {
      const auto* src = &m.data()[m.dims().index(o[0], o[1] + y, o[2] + z)];
      std::copy(src, src + e[0], &data[d.index(0, y, z)]);
    }
  return MaskGrid(d, std::move(data));
}

/// Applies the same box to every grid of the case.
inline Case crop_case(const Case& c, const Origin& o, const Extent& e) {
  Case out;
  out.id = c.id;
  for (auto& [name, grid] : c.volumes) out.volumes.emplace(name, crop(grid, o, e));
  out.lesion_mask = crop(c.lesion_mask, o, e);
  out.brain_mask = crop(c.brain_mask, o, e);
  out.label = crop(c.label, o, e);
  return out;
}

/// Draws a crop origin. With probability lesion_bias (and when the case has a
/// lesion) the box is forced to contain a uniformly chosen lesion voxel.
inline Origin sample_crop_origin(const Case& c, const Extent& size, Rng& rng, double lesion_bias) {
  const Dims& d = c.dims();
  for (std::size_t a = 0; a < 3; ++a)
    require(size[a] > 0 && size[a] <= d[a], "random_crop: crop " + std::to_string(size[a]) + " larger than volume " +
                                                std::to_string(d[a]) + " on axis " + std::to_string(a));
  Origin o{};
  const bool biased = bernoulli(rng, lesion_bias);
  std::vector<std::size_t> lesion;
  if (biased) {
    for (std::size_t i = 0; i < c.lesion_mask.size(); ++i)
      if (c.lesion_mask[i]) lesion.push_back(i);
  }
  if (!lesion.empty()) {
    const std::size_t v = lesion[uniform_index(rng, lesion.size())];
    const std::array<std::size_t, 3> p{v % d.nx, (v / d.nx) % d.ny, v / (d.nx * d.ny)};
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t lo = p[a] + 1 >= size[a] ? p[a] + 1 - size[a] : 0;
      const std::size_t hi = std::min(p[a], d[a] - size[a]);
      o[a] = lo + uniform_index(rng, hi - lo + 1);
    }
  } else {
    for (std::size_t a = 0; a < 3; ++a) o[a] = uniform_index(rng, d[a] - size[a] + 1);
  }
  return o;
}

inline Case random_crop(const Case& c, const Extent& size, Rng& rng, double lesion_bias = 0.5) {
  const Origin o = sample_crop_origin(c, size, rng, lesion_bias);
  return crop_case(c, o, size);
}

}  // namespace mavseg
